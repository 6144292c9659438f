"""Selected dyadic increments and their dominant/negligible split.

A :class:`DyadicScheme` fixes the resolution ``N`` and the exponents
``beta`` and ``gamma``.  Increments of length ``2^-N`` start at the anchors
``e_l = l K / 2^N`` with ``K = floor(2^{N^beta})``.  In chaos mode each
increment is a multiple integral; restricting its noise to the block
``(e_{l-1} + 2^-N, e_l + 2^-N]`` gives the dominant part, and the rest of the
noise domain gives the negligible part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .chaos import Grid, NoiseRealization, SeparableKernel, draw_noise
from .hermite import (
    HermiteParams,
    SamplePath,
    default_truncation,
    increment_kernel,
)

__all__ = [
    "DyadicScheme",
    "IncrementSet",
    "DecomposedIncrement",
    "ChaosIncrementModel",
    "ChaosContext",
    "select_indices",
    "anchor",
    "anchor_fraction",
    "required_times",
    "extract_increments",
    "decompose_increment",
    "dominant_iid_kernel",
    "sample_dominant_iid",
    "graded_edges",
]


class IncrementError(ValueError):
    """Invalid scheme, misaligned grid or missing path values."""


@dataclass(frozen=True)
class DyadicScheme:
    """Resolution ``N`` with selection exponents ``0 < gamma < beta < 1``."""

    N: int
    beta: float = 0.5
    gamma: float = 0.45

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise IncrementError(f"N must be a positive integer, got {self.N}")
        if not 0.0 < self.gamma < self.beta < 1.0:
            raise IncrementError(f"need 0 < gamma < beta < 1, got gamma={self.gamma}, beta={self.beta}")

    @property
    def K(self) -> int:
        """Anchor spacing in steps, ``floor(2^{N^beta})``."""
        return _floor_pow2(self.N**self.beta)

    @property
    def step(self) -> float:
        return 2.0 ** (-self.N)

    @property
    def n_unrestricted(self) -> int:
        return (1 << self.N) // self.K

    @property
    def gamma_bound(self) -> int:
        return _floor_pow2(self.N**self.gamma)

    def cardinality(self, restricted: bool = True) -> int:
        n = self.n_unrestricted
        return min(n, self.gamma_bound) if restricted else n

    @classmethod
    def for_cardinality(cls, target: int, beta: float = 0.5, gamma: float = 0.45, n_max: int = 4000) -> "DyadicScheme":
        """Smallest resolution whose restricted index set has at least ``target`` elements."""
        for N in range(1, n_max + 1):
            s = cls(N, beta, gamma)
            if s.K <= (1 << N) and s.cardinality(True) >= target:
                return s
        raise IncrementError(f"no N <= {n_max} reaches |L| = {target}")


def _floor_pow2(x: float) -> int:
    """``floor(2^x)`` robust to rounding when ``2^x`` is an integer."""
    v = 2.0**x
    f = math.floor(v)
    if v - f > 1.0 - 1e-9:
        f += 1
    return int(f)


def select_indices(scheme: DyadicScheme, restricted: bool = True) -> np.ndarray:
    """Sorted indices ``l``: all of ``1..floor(2^N / K)``, or those up to ``floor(2^{N^gamma})``."""
    if scheme.K > (1 << scheme.N) or scheme.n_unrestricted < 1:
        raise IncrementError(f"K = {scheme.K} exceeds 2^N = {1 << scheme.N}: the index set is empty")
    return np.arange(1, scheme.cardinality(restricted) + 1)


def anchor(l: int, scheme: DyadicScheme) -> float:
    """Anchor ``l K / 2^N`` (exact in binary floating point)."""
    return math.ldexp(int(l) * scheme.K, -scheme.N)


def anchor_fraction(l: int, scheme: DyadicScheme) -> Fraction:
    return Fraction(int(l) * scheme.K, 1 << scheme.N)


def required_times(scheme: DyadicScheme, restricted: bool = True) -> np.ndarray:
    """Every time a path must carry: 0, the anchors and the anchors plus one step."""
    idx = select_indices(scheme, restricted)
    e = np.array([anchor(l, scheme) for l in idx])
    return np.unique(np.concatenate([[0.0], e, e + scheme.step]))


@dataclass(eq=False)
class IncrementSet:
    """Increments ``Z(e_l + 2^-N) - Z(e_l)``; ``deltas`` is ``(|L|,)`` or ``(M, |L|)``."""

    scheme: DyadicScheme
    indices: np.ndarray
    anchors: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        self.anchors = np.asarray(self.anchors, dtype=float)
        self.deltas = np.asarray(self.deltas, dtype=float)
        if not (self.indices.size == self.anchors.size == self.deltas.shape[-1]):
            raise IncrementError("indices, anchors and deltas must have equal lengths")

    @property
    def cardinality(self) -> int:
        return int(self.indices.size)

    def to_csv(self, path) -> Path:
        if self.deltas.ndim != 1:
            raise IncrementError("CSV export holds a single increment set")
        path = Path(path)
        rows = [f"{int(l)},{a!r},{d!r}" for l, a, d in zip(self.indices, self.anchors.tolist(), self.deltas.tolist())]
        path.write_text("l,anchor,delta\n" + "\n".join(rows) + "\n")
        return path


def extract_increments(path: SamplePath, scheme: DyadicScheme, restricted: bool = True) -> IncrementSet:
    """Read ``Z(e + 2^-N) - Z(e)`` at every selected anchor off a sampled path."""
    idx = select_indices(scheme, restricted)
    e = np.array([anchor(l, scheme) for l in idx])
    i0 = path.index_of(e) if e.size else np.array([], int)
    i1 = path.index_of(e + scheme.step)
    d = path.values[..., i1] - path.values[..., i0]
    return IncrementSet(scheme, idx, e, d)


@dataclass(eq=False)
class DecomposedIncrement:
    """Total increment with its dominant and negligible parts (scalars or arrays)."""

    total: np.ndarray
    dominant: np.ndarray
    negligible: np.ndarray


# ---------------------------------------------------------------- grids


def graded_edges(start: float, stop: float, width: float, ratio: float = 1.2) -> np.ndarray:
    """Edges from ``start`` down to ``stop`` with cell widths ``width * ratio^k``.

    Returned in increasing order, ending at ``start`` and beginning exactly at
    ``stop``; a final sliver shorter than half the previous cell is merged.
    """
    out = [start]
    x, w = start, width
    while x > stop:
        w *= ratio
        nxt = x - w
        if nxt - stop < 0.5 * w:
            nxt = stop
        out.append(nxt)
        x = nxt
    return np.array(out[::-1])


# ---------------------------------------------------------------- chaos mode


class ChaosIncrementModel:
    """Projected kernels of every selected increment on one aligned grid.

    The grid is uniform with ``cells_per_step`` cells per ``2^-N`` on
    ``(0, e_max + 2^-N]`` and grows geometrically to the left down to
    ``-t_left``.  Every block boundary ``e_l + 2^-N`` is a grid edge.

    With ``calibrate`` each kernel is rescaled so that the exact second
    moment of its increment equals ``2^{-2HN}``; the factors differ from one
    another only through the far-left cells.
    """

    def __init__(
        self,
        scheme: DyadicScheme,
        params: HermiteParams,
        cells_per_step: int = 16,
        nodes: int = 8,
        t_left: float | None = None,
        ratio: float = 1.2,
        restricted: bool = True,
        calibrate: bool = True,
    ):
        self.scheme = scheme
        self.params = params
        self.indices = select_indices(scheme, restricted)
        self.anchors = np.array([anchor(l, scheme) for l in self.indices])
        h = scheme.step
        right = self.anchors[-1] + h
        n_fine = int(round(right / h)) * cells_per_step
        fine = np.linspace(0.0, right, n_fine + 1)
        T = default_truncation(params, h) if t_left is None else t_left
        left = graded_edges(0.0, -T, h / cells_per_step, ratio)
        self.grid = Grid.from_edges(np.concatenate([left[:-1], fine]))
        self.nodes = nodes
        raw = [increment_kernel(params, self.grid, e, e + h, nodes) for e in self.anchors]
        ratio_l = np.array([k.second_moment() for k in raw]) / h ** (2 * params.H)
        self.raw_variance_ratio = float(ratio_l.mean())
        self.factors = 1.0 / np.sqrt(ratio_l) if calibrate else np.ones_like(ratio_l)
        self.kernels = [k.scaled(f) for k, f in zip(raw, self.factors)]
        self.masks = []
        for e in self.anchors:
            lo = e - scheme.K * h + h
            self.masks.append(self.grid.cell_mask(lo, e + h))
        self.dominant = [k.restrict(m) for k, m in zip(self.kernels, self.masks)]

    @property
    def cardinality(self) -> int:
        return int(self.indices.size)

    def dominant_cells(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.masks[i])

    def draw(self, seed=None, size: int | None = None) -> NoiseRealization:
        return draw_noise(self.grid, seed, size)

    def exact_second_moments(self) -> dict:
        """Exact ``E Delta^2``, ``E Delta~^2`` and ``E Delta^2 - E Delta~^2`` per index."""
        tot = np.array([k.second_moment() for k in self.kernels])
        dom = np.array([k.second_moment() for k in self.dominant])
        cross = np.array([k.inner(d) for k, d in zip(self.kernels, self.dominant)])
        neg = tot - 2 * cross + dom
        return {"total": tot, "dominant": dom, "negligible": neg, "cross": cross - dom}

    def decompose(self, noise: NoiseRealization) -> DecomposedIncrement:
        """Total, dominant and negligible parts of every increment, shape ``(M, |L|)``.

        The negligible part is integrated separately: with ``d`` and ``b`` the
        restrictions of a factor to the block and to its complement, the
        complement of the block in ``a^{(x)q}`` integrates to
        ``sum_{j>=1} C(q, j) I_j(b^{(x)j}) I_{q-j}(d^{(x)(q-j)})``.
        """
        if noise.grid != self.grid:
            raise IncrementError("noise does not live on the model grid")
        xi = np.atleast_2d(noise.increments)
        q = self.params.q
        w = self.grid.widths
        tot, dom, neg = (np.empty((xi.shape[0], self.cardinality)) for _ in range(3))
        for i, (k, m) in enumerate(zip(self.kernels, self.masks)):
            a = k.vectors
            d = a * m
            b = a - d
            pa, pd, pb = xi @ a.T, xi @ d.T, xi @ b.T
            na, nd, nb = (np.sqrt(np.sum(v**2 * w, axis=1)) for v in (a, d, b))
            tot[:, i] = k.integrate_projections(pa, na)
            dom[:, i] = self.dominant[i].integrate_projections(pd, nd)
            acc = np.zeros(xi.shape[0])
            for j in range(1, q + 1):
                acc += math.comb(q, j) * (_power_integral(j, pb, nb) * _power_integral(q - j, pd, nd)) @ k.weights
            neg[:, i] = acc
        if not noise.batched:
            return DecomposedIncrement(tot[0], dom[0], neg[0])
        return DecomposedIncrement(tot, dom, neg)


def _power_integral(k: int, proj: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """``I_k(v^{(x)k}) = |v|^k He_k(<v, xi>/|v|)`` column by column."""
    if k == 0:
        return np.ones_like(proj)
    out = np.zeros_like(proj)
    live = norms > 0
    x = proj[:, live] / norms[live]
    prev, cur = np.ones_like(x), x
    for n in range(1, k):
        prev, cur = cur, x * cur - n * prev
    out[:, live] = cur * norms[live] ** k
    return out


@dataclass(eq=False)
class ChaosContext:
    """A chaos model together with the noise it is evaluated on."""

    model: ChaosIncrementModel
    noise: NoiseRealization


def decompose_increment(l: int, scheme: DyadicScheme, context: ChaosContext) -> DecomposedIncrement:
    """Dominant/negligible split of the ``l``-th increment in chaos mode."""
    model = context.model
    if model.scheme != scheme:
        raise IncrementError("context was built for a different scheme")
    pos = np.flatnonzero(model.indices == l)
    if pos.size == 0:
        raise IncrementError(f"index {l} is not selected by the scheme")
    full = model.decompose(context.noise)
    i = int(pos[0])
    return DecomposedIncrement(full.total[..., i], full.dominant[..., i], full.negligible[..., i])


# ---------------------------------------------------------------- i.i.d. dominant parts


def dominant_iid_kernel(
    scheme: DyadicScheme,
    params: HermiteParams,
    cells_per_step: int = 16,
    nodes: int = 8,
    ratio: float = 1.2,
    calibrate: bool = True,
) -> tuple[SeparableKernel, dict]:
    """Kernel of one dominant part in units of ``2^-N``.

    After shifting by the anchor and rescaling time by ``2^N`` the dominant
    part is ``2^{-NH} I_q(g)`` where ``g`` integrates ``u`` over ``[0, 1]``
    and keeps noise in ``(-K + 1, 1]``.  The returned kernel lives on a grid
    of that block only.  Calibration uses the full (untruncated at the block)
    increment, matching :class:`ChaosIncrementModel`.
    """
    K = scheme.K
    fine = np.linspace(0.0, 1.0, cells_per_step + 1)
    box = graded_edges(0.0, -(K - 1.0), 1.0 / cells_per_step, ratio) if K > 1 else np.array([0.0])
    T = default_truncation(params, 1.0)
    outer = graded_edges(box[0], -max(T, K + 1.0), box[1] - box[0] if box.size > 1 else 1.0, ratio)
    edges = np.concatenate([outer[:-1], box[:-1], fine])
    full_grid = Grid.from_edges(edges)
    raw = increment_kernel(params, full_grid, 0.0, 1.0, nodes)
    ratio_ = raw.second_moment()
    factor = 1.0 / math.sqrt(ratio_) if calibrate else 1.0
    start = outer.size - 1
    sub = Grid.from_edges(edges[start:])
    g = SeparableKernel(sub, raw.vectors[:, start:], raw.weights * factor, params.q)
    info = {"raw_variance_ratio": ratio_, "factor": factor, "block_cells": sub.cells}
    return g, info


def sample_dominant_iid(
    scheme: DyadicScheme,
    params: HermiteParams,
    count: int,
    seed=None,
    kernel: SeparableKernel | None = None,
    **kernel_options,
) -> np.ndarray:
    """``count`` independent draws of the dominant-part law at resolution ``N``."""
    if count < 1:
        raise IncrementError("count must be positive")
    g = kernel if kernel is not None else dominant_iid_kernel(scheme, params, **kernel_options)[0]
    noise = draw_noise(g.grid, seed, size=count)
    return g.integrate(noise) * 2.0 ** (-scheme.N * params.H)
