"""Discrete Wiener space on a partition of the real line.

A :class:`Grid` partitions an interval into half-open cells ``(a_i, a_{i+1}]``.
White noise is represented by one centred Gaussian increment per cell with
variance equal to the cell width.  Multiple integrals of step kernels are
computed as the continuum Wiener-Ito integral of the piecewise constant
function, which reduces to Wick products of the cell increments.  Terms with
all cell indices distinct are plain products; a cell repeated ``k`` times
contributes the Wick power ``h^{k/2} He_k(xi / sqrt(h))``.  The pure
off-diagonal sum is available through ``diagonal="drop"``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.polynomial import hermite_e

__all__ = [
    "Grid",
    "StepKernel",
    "NoiseRealization",
    "SeparableKernel",
    "ProductFormulaReport",
    "draw_noise",
    "multiple_integral",
    "wick_expectation",
    "inner",
    "norm",
    "contract",
    "symmetrize",
    "product_formula_check",
    "hermite_poly",
    "wick_power",
    "set_partitions",
    "all_pairings",
    "read_kernel_csv",
    "write_kernel_csv",
]

MAX_ORDER = 4
ENUMERATION_BUDGET = 10**6
_CHUNK_ELEMENTS = 2**22


class ChaosError(ValueError):
    """Raised on invalid chaos-level input (grid mismatch, budget, order cap)."""


class Grid:
    """Partition of ``(left, right]`` into cells ``(edges[i], edges[i+1]]``.

    The two-argument form builds ``cells`` cells of equal width.  Non-uniform
    partitions are created with :meth:`from_edges`.
    """

    def __init__(self, left: float, right: float, cells: int):
        if not right > left:
            raise ChaosError(f"grid needs left < right, got {left}, {right}")
        if int(cells) != cells or cells < 1:
            raise ChaosError(f"cells must be a positive integer, got {cells}")
        self._edges = np.linspace(left, right, int(cells) + 1)
        self._uniform = True

    @classmethod
    def from_edges(cls, edges: Sequence[float]) -> "Grid":
        e = np.asarray(edges, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ChaosError("a grid needs at least two edges")
        if not np.all(np.isfinite(e)) or np.any(np.diff(e) <= 0):
            raise ChaosError("grid edges must be finite and strictly increasing")
        obj = cls.__new__(cls)
        obj._edges = e.copy()
        w = np.diff(e)
        obj._uniform = bool(np.allclose(w, w[0], rtol=1e-12, atol=0.0))
        return obj

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def left(self) -> float:
        return float(self._edges[0])

    @property
    def right(self) -> float:
        return float(self._edges[-1])

    @property
    def cells(self) -> int:
        return self._edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self._edges)

    @property
    def uniform(self) -> bool:
        return self._uniform

    @property
    def h(self) -> float:
        """Common cell width; only defined for uniform grids."""
        if not self._uniform:
            raise ChaosError("cell width h is only defined on a uniform grid")
        return (self.right - self.left) / self.cells

    def edge_index(self, t: float) -> int:
        """Index of the edge equal to ``t`` (relative tolerance 1e-9 of the local width)."""
        e = self._edges
        i = int(np.searchsorted(e, t))
        best = None
        for j in (i - 1, i):
            if 0 <= j < e.size:
                width = e[min(j + 1, e.size - 1)] - e[max(j - 1, 0)]
                if abs(e[j] - t) <= 1e-9 * width:
                    best = j
        if best is None:
            raise ChaosError(f"time {t!r} is not a cell boundary of the grid")
        return best

    def cell_mask(self, a: float, b: float) -> np.ndarray:
        """Boolean mask of the cells contained in ``(a, b]``; both ends must be edges."""
        m = np.zeros(self.cells, dtype=bool)
        ia = 0 if a <= self.left else self.edge_index(a)
        ib = self.cells if b >= self.right else self.edge_index(b)
        m[ia:ib] = True
        return m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self._edges.shape == other._edges.shape and bool(
            np.array_equal(self._edges, other._edges)
        )

    def __hash__(self) -> int:
        return hash(self._edges.tobytes())

    def __repr__(self) -> str:
        kind = "uniform" if self._uniform else "graded"
        return f"Grid({self.left!r}, {self.right!r}, cells={self.cells}, {kind})"


@dataclass(eq=False)
class StepKernel:
    """Piecewise constant function on ``grid``^order, stored densely.

    ``values`` has shape ``(cells,) * order``; order zero holds a scalar.
    """

    values: np.ndarray
    grid: Grid
    symmetric: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim > 0 and any(s != self.grid.cells for s in v.shape):
            raise ChaosError(
                f"kernel table shape {v.shape} does not match {self.grid.cells} cells"
            )
        if not np.all(np.isfinite(v)):
            raise ChaosError("kernel values must be finite")
        self.values = v

    @property
    def order(self) -> int:
        return self.values.ndim

    @classmethod
    def scalar(cls, x: float, grid: Grid) -> "StepKernel":
        return cls(np.asarray(float(x)), grid, symmetric=True)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        v = self.values
        return all(
            np.allclose(v, np.transpose(v, p), rtol=0.0, atol=atol)
            for p in itertools.permutations(range(v.ndim))
        )

    def weighted(self) -> np.ndarray:
        """Values multiplied by the product of the cell widths along every axis."""
        out = self.values
        w = self.grid.widths
        for ax in range(self.order):
            shape = [1] * self.order
            shape[ax] = -1
            out = out * w.reshape(shape)
        return out


@dataclass(eq=False)
class NoiseRealization:
    """Gaussian cell increments, shape ``(cells,)`` or ``(M, cells)`` for a batch."""

    grid: Grid
    increments: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.increments, dtype=float)
        if x.shape[-1] != self.grid.cells:
            raise ChaosError(
                f"noise has {x.shape[-1]} increments for a grid of {self.grid.cells} cells"
            )
        self.increments = x

    @property
    def batched(self) -> bool:
        return self.increments.ndim == 2

    def __len__(self) -> int:
        return self.increments.shape[-1]


def draw_noise(grid: Grid, seed=None, size: int | None = None) -> NoiseRealization:
    """Draw independent ``N(0, width_i)`` increments for every cell.

    Parameters
    ----------
    grid : Grid
    seed : int, SeedSequence or Generator
    size : int, optional
        Number of independent realizations; the result is then batched.
    """
    rng = np.random.default_rng(seed)
    shape = (grid.cells,) if size is None else (int(size), grid.cells)
    z = rng.standard_normal(shape)
    return NoiseRealization(grid, z * np.sqrt(grid.widths))


# ---------------------------------------------------------------- polynomials


def hermite_poly(q: int, x):
    """Hermite polynomial normalized by ``1/q!``: ``H_q(x) = He_q(x) / q!``.

    ``He_q`` is the probabilists' Hermite polynomial, so ``H_1(x) = x`` and
    ``H_2(x) = (x^2 - 1) / 2``.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    coef = np.zeros(q + 1)
    coef[q] = 1.0 / math.factorial(q)
    out = hermite_e.hermeval(x, coef)
    return float(out) if np.ndim(out) == 0 else out


def _he(k: int, x: np.ndarray) -> np.ndarray:
    """Probabilists' Hermite polynomial by the three-term recurrence."""
    if k == 0:
        return np.ones_like(x)
    prev, cur = np.ones_like(x), x
    for n in range(1, k):
        prev, cur = cur, x * cur - n * prev
    return cur


def wick_power(k: int, xi: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Wick power ``:xi^k:`` of cell increments with variances ``widths``."""
    s = np.sqrt(widths)
    return s**k * _he(k, xi / s)


# ---------------------------------------------------------------- combinatorics


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def all_pairings(items: Sequence[int]) -> Iterator[list[tuple[int, int]]]:
    """All perfect matchings of an even-length sequence."""
    items = list(items)
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        b = items[i]
        rest = items[1:i] + items[i + 1 :]
        for tail in all_pairings(rest):
            yield [(a, b)] + tail


def _distinct_mask(n: int, m: int) -> np.ndarray:
    """Boolean tensor of shape (n,)*m that is True where all indices differ."""
    if m <= 1:
        return np.ones((n,) * m, dtype=bool)
    idx = np.indices((n,) * m)
    mask = np.ones((n,) * m, dtype=bool)
    for a, b in itertools.combinations(range(m), 2):
        mask &= idx[a] != idx[b]
    return mask


# ---------------------------------------------------------------- integrals


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ChaosError("kernel and noise live on different grids")


def _contract_axes(tensor: np.ndarray, factors: list[np.ndarray]) -> np.ndarray:
    """Contract every axis of ``tensor`` with the matching batch of vectors.

    ``factors[j]`` has shape ``(M, n)``; the result has shape ``(M,)``.
    """
    m = len(factors)
    M = factors[0].shape[0]
    out = np.empty(M)
    n = tensor.shape[0] if m else 1
    step = max(1, _CHUNK_ELEMENTS // max(1, n ** max(m - 1, 0)))
    for s in range(0, M, step):
        sl = slice(s, s + step)
        r = factors[0][sl] @ tensor.reshape(n, -1)
        for j in range(1, m):
            r = r.reshape(r.shape[0], n, -1)
            r = np.einsum("mi,mij->mj", factors[j][sl], r)
        out[sl] = r.reshape(-1)
    return out


def multiple_integral(
    f: StepKernel,
    w: NoiseRealization,
    diagonal: str = "wick",
    max_order: int = MAX_ORDER,
):
    """Multiple Wiener-Ito integral ``I_q(f)`` of a step kernel.

    Parameters
    ----------
    f : StepKernel
        Kernel of order ``q``; order zero returns the scalar itself.
    w : NoiseRealization
        Single or batched noise on the same grid.
    diagonal : {"wick", "drop"}
        ``"wick"`` gives the exact integral of the step function (cells
        repeated inside an index tuple enter through Wick powers);
        ``"drop"`` keeps only index tuples with pairwise distinct cells.
    max_order : int
        Refuse orders above this cap.

    Returns
    -------
    float or ndarray
        A float for a single realization, shape ``(M,)`` for a batch.
    """
    _check_same_grid(f.grid, w.grid)
    q = f.order
    if q > max_order:
        raise ChaosError(f"order {q} exceeds the configured cap {max_order}")
    if diagonal not in ("wick", "drop"):
        raise ChaosError(f"diagonal must be 'wick' or 'drop', got {diagonal!r}")
    xi = np.atleast_2d(w.increments)
    M, n = xi.shape
    if q == 0:
        res = np.full(M, float(f.values))
    else:
        widths = w.grid.widths
        powers = {1: xi}
        res = np.zeros(M)
        partitions = [[[i] for i in range(q)]] if diagonal == "drop" else set_partitions(range(q))
        letters = "abcdefgh"
        for part in partitions:
            label = [""] * q
            for b, block in enumerate(part):
                for pos in block:
                    label[pos] = letters[b]
            out = "".join(letters[: len(part)])
            t = np.einsum("".join(label) + "->" + out, f.values)
            t = t * _distinct_mask(n, len(part))
            if not np.any(t):
                continue
            facs = []
            for block in part:
                k = len(block)
                if k not in powers:
                    powers[k] = wick_power(k, xi, widths)
                facs.append(powers[k])
            res += _contract_axes(t, facs)
    return float(res[0]) if not w.batched else res


def inner(f: StepKernel, g: StepKernel) -> float:
    """Discrete ``L^2`` inner product weighted by the cell widths."""
    _check_same_grid(f.grid, g.grid)
    if f.order != g.order:
        raise ChaosError("inner product needs kernels of equal order")
    return float(np.sum(f.weighted() * g.values))


def norm(f: StepKernel) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def wick_expectation(
    f: StepKernel,
    g: StepKernel,
    diagonal: str = "wick",
    budget: int = ENUMERATION_BUDGET,
) -> float:
    """Exact ``E[I_p(f) I_q(g)]`` by enumerating pair partitions.

    Every perfect matching of the ``p + q`` kernel slots is visited.
    Matchings that pair two slots of the same kernel vanish (a Wick product
    has no self-contractions).  For each surviving matching the paired slots
    share one cell index and the summand carries the width of that cell.
    With ``diagonal="drop"`` the indices inside each kernel must also be
    distinct.
    """
    _check_same_grid(f.grid, g.grid)
    p, q = f.order, g.order
    n = f.grid.cells
    if n ** max(p, q) > budget:
        raise ChaosError(
            f"pairing enumeration needs {n ** max(p, q)} terms (budget {budget}); "
            "use a Monte Carlo estimate instead"
        )
    if p == 0 and q == 0:
        return float(f.values) * float(g.values)
    if (p + q) % 2:
        return 0.0
    widths = f.grid.widths
    total = 0.0
    for pairing in all_pairings(range(p + q)):
        if any((a < p) == (b < p) for a, b in pairing):
            continue
        k = len(pairing)
        idx = np.indices((n,) * k).reshape(k, -1)
        slot = [0] * (p + q)
        for j, (a, b) in enumerate(pairing):
            slot[a] = slot[b] = j
        fi = tuple(idx[slot[s]] for s in range(p))
        gi = tuple(idx[slot[s]] for s in range(p, p + q))
        term = f.values[fi] * g.values[gi] * np.prod(widths[idx], axis=0)
        if diagonal == "drop":
            keep = np.ones(idx.shape[1], dtype=bool)
            for a, b in itertools.combinations(range(p), 2):
                keep &= fi[a] != fi[b]
            for a, b in itertools.combinations(range(q), 2):
                keep &= gi[a] != gi[b]
            term = term * keep
        total += float(np.sum(term))
    return total


# ---------------------------------------------------------------- algebra


def contract(f: StepKernel, g: StepKernel, r: int) -> StepKernel:
    """Contraction ``f (x)_r g`` over the first ``r`` coordinates of both kernels."""
    _check_same_grid(f.grid, g.grid)
    p, q = f.order, g.order
    if not 0 <= r <= min(p, q):
        raise ChaosError(f"contraction index r={r} outside [0, {min(p, q)}]")
    fw = f.values
    w = f.grid.widths
    for ax in range(r):
        shape = [1] * p
        shape[ax] = -1
        fw = fw * w.reshape(shape)
    out = np.tensordot(fw, g.values, axes=(list(range(r)), list(range(r))))
    return StepKernel(np.asarray(out), f.grid)


def symmetrize(f: StepKernel) -> StepKernel:
    """Average of the kernel over all permutations of its arguments."""
    q = f.order
    if q <= 1 or f.is_symmetric(atol=0.0):
        return StepKernel(f.values.copy(), f.grid, symmetric=True)
    perms = list(itertools.permutations(range(q)))
    acc = np.zeros_like(f.values)
    for p in perms:
        acc += np.transpose(f.values, p)
    return StepKernel(acc / len(perms), f.grid, symmetric=True)


@dataclass
class ProductFormulaReport:
    """Outcome of a Monte Carlo check of the product formula."""

    p: int
    q: int
    trials: int
    diagonal: str
    mean_deviation: float
    mean_abs_deviation: float
    standard_error: float
    diagonal_allowance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (
            f"{tag} product formula p={self.p} q={self.q} ({self.diagonal}): "
            f"mean deviation {self.mean_deviation:.3e} +/- {self.standard_error:.3e}, "
            f"mean |deviation| {self.mean_abs_deviation:.3e}, "
            f"diagonal allowance {self.diagonal_allowance:.3e}"
        )


def product_formula_check(
    f: StepKernel,
    g: StepKernel,
    trials: int = 10_000,
    seed=None,
    diagonal: str = "wick",
) -> ProductFormulaReport:
    """Compare ``I_p(f) I_q(g)`` with ``sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f~ (x)_r g~)``.

    Both sides are evaluated on the same noise draws.  Under the Wick
    realization the identity holds draw by draw.  Under ``"drop"`` the
    expectations differ by the diagonal mass of the full contraction, an
    ``O(h)`` quantity that is computed exactly and reported as the
    allowance.
    """
    p, q = f.order, g.order
    fs, gs = symmetrize(f), symmetrize(g)
    noise = draw_noise(f.grid, seed, size=trials)
    lhs = multiple_integral(fs, noise, diagonal) * multiple_integral(gs, noise, diagonal)
    rhs = np.zeros(trials)
    for r in range(min(p, q) + 1):
        coef = math.factorial(r) * math.comb(p, r) * math.comb(q, r)
        rhs += coef * multiple_integral(contract(fs, gs, r), noise, diagonal)
    dev = lhs - rhs
    mean = float(dev.mean())
    se = float(dev.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    allowance = 0.0
    if diagonal == "drop" and p == q and p > 0 and f.grid.cells ** p <= ENUMERATION_BUDGET:
        exact_lhs = wick_expectation(fs, gs, diagonal="drop")
        exact_rhs = math.factorial(p) * inner(fs, gs)
        allowance = abs(exact_lhs - exact_rhs)
    scale = float(np.sqrt(np.mean(lhs**2))) if trials else 0.0
    tol = 4.0 * se + allowance + 1e-12 * max(scale, 1.0)
    return ProductFormulaReport(
        p=p,
        q=q,
        trials=trials,
        diagonal=diagonal,
        mean_deviation=mean,
        mean_abs_deviation=float(np.abs(dev).mean()),
        standard_error=se,
        diagonal_allowance=allowance,
        passed=abs(mean) <= tol,
        details={"max_abs_deviation": float(np.abs(dev).max()) if trials else 0.0},
    )


# ---------------------------------------------------------------- separable kernels


class SeparableKernel:
    """Symmetric kernel ``sum_k w_k a_k^{(x)q}`` kept in factored form.

    ``vectors`` has shape ``(K, cells)``.  The integral of a pure tensor power
    is ``I_q(a^{(x)q}) = |a|^q He_q(<a, xi> / |a|)``, so integrals cost one
    matrix product and never form the ``cells^q`` table.
    """

    def __init__(self, grid: Grid, vectors: np.ndarray, weights: np.ndarray, order: int):
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        wt = np.asarray(weights, dtype=float).reshape(-1)
        if v.shape != (wt.size, grid.cells):
            raise ChaosError("vectors must have shape (len(weights), cells)")
        if order < 1:
            raise ChaosError("separable kernels need order >= 1")
        self.grid = grid
        self.vectors = v
        self.weights = wt
        self.order = int(order)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.vectors**2 * self.grid.widths, axis=1))

    def gram(self, other: "SeparableKernel | None" = None) -> np.ndarray:
        o = self if other is None else other
        _check_same_grid(self.grid, o.grid)
        return (self.vectors * self.grid.widths) @ o.vectors.T

    def inner(self, other: "SeparableKernel") -> float:
        """``q! <self, other>``, the covariance of the two integrals."""
        if other.order != self.order:
            return 0.0
        g = self.gram(other) ** self.order
        return math.factorial(self.order) * float(self.weights @ g @ other.weights)

    def second_moment(self) -> float:
        return self.inner(self)

    def restrict(self, mask: np.ndarray) -> "SeparableKernel":
        """Kernel restricted to the product of the selected cells."""
        return SeparableKernel(self.grid, self.vectors * mask, self.weights, self.order)

    def scaled(self, factor: float) -> "SeparableKernel":
        return SeparableKernel(self.grid, self.vectors, self.weights * factor, self.order)

    def to_step_kernel(self) -> StepKernel:
        q = self.order
        t = np.zeros((self.grid.cells,) * q)
        for wk, a in zip(self.weights, self.vectors):
            term = a
            for _ in range(q - 1):
                term = np.multiply.outer(term, a)
            t += wk * term
        return StepKernel(t, self.grid, symmetric=True)

    def integrate_projections(self, proj: np.ndarray, norms: np.ndarray | None = None) -> np.ndarray:
        """Integral from precomputed projections ``proj = xi @ vectors.T``."""
        nr = self.norms() if norms is None else norms
        live = nr > 0
        x = proj[..., live] / nr[live]
        return (_he(self.order, x) * (self.weights[live] * nr[live] ** self.order)).sum(axis=-1)

    def integrate(self, w: NoiseRealization):
        _check_same_grid(self.grid, w.grid)
        out = self.integrate_projections(np.atleast_2d(w.increments) @ self.vectors.T)
        return float(out[0]) if not w.batched else out


# ---------------------------------------------------------------- csv io


def write_kernel_csv(f: StepKernel, path) -> None:
    """Write a kernel as CSV: a header of edges, then row-major flattened values."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["order", f.order, "symmetric", int(f.symmetric)])
        wr.writerow(["edges"] + [repr(float(e)) for e in f.grid.edges])
        wr.writerow(["index", "value"])
        for k, val in enumerate(np.ravel(f.values, order="C")):
            wr.writerow([k, repr(float(val))])


def read_kernel_csv(path) -> StepKernel:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    try:
        order = int(rows[0][1])
        sym = bool(int(rows[0][3]))
        grid = Grid.from_edges([float(x) for x in rows[1][1:]])
        vals = np.array([float(r[1]) for r in rows[3:]])
    except (IndexError, ValueError) as exc:
        raise ChaosError(f"malformed kernel file {path}: {exc}") from exc
    if vals.size != grid.cells**order:
        raise ChaosError(f"kernel file {path} holds {vals.size} values, expected {grid.cells ** order}")
    return StepKernel(vals.reshape((grid.cells,) * order), grid, symmetric=sym)
