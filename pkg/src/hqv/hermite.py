"""Sample paths of Hermite processes.

Three samplers are provided:

* ``sample_gaussian_exact`` draws fractional Brownian motion (order one)
  exactly at a finite set of times from a Cholesky factor of the covariance.
* ``sample_chaos`` evaluates the multiple-integral representation with the
  power kernel projected onto a step-function basis (any order, small scale).
* ``sample_dmt`` forms normalized partial sums of Hermite polynomials of a
  long-memory stationary Gaussian sequence (any order, large scale, biased).
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, linalg, special

from .chaos import Grid, NoiseRealization, SeparableKernel, draw_noise

__all__ = [
    "HermiteParams",
    "SamplePath",
    "DmtConfig",
    "covariance",
    "sample_gaussian_exact",
    "gaussian_factor",
    "GaussianFactor",
    "integrate_many",
    "kernel_L",
    "normalizing_constant",
    "default_truncation",
    "chaos_grid",
    "increment_kernel",
    "sample_chaos",
    "sample_dmt",
    "rosenblatt_cumulants",
    "read_path_csv",
]

METHODS = ("gaussian-exact", "chaos", "dmt-sum")
MAX_EXACT_POINTS = 4000


class HermiteError(ValueError):
    """Invalid sampler input or numerical failure inside a sampler."""


@dataclass(frozen=True)
class HermiteParams:
    """Order ``q`` and Hurst index ``H`` of a Hermite process."""

    q: int
    H: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise HermiteError(f"order q must be an integer >= 1, got {self.q}")
        if not 0.5 < self.H < 1.0:
            raise HermiteError(f"Hurst index must lie in (1/2, 1), got {self.H}")

    @property
    def alpha(self) -> float:
        """Magnitude of the kernel exponent, ``1/2 + (1 - H)/q``."""
        return 0.5 + (1.0 - self.H) / self.q


def covariance(s, t, H: float):
    """Covariance ``(t^2H + s^2H - |t - s|^2H) / 2`` of a standardized Hermite process."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- paths


@dataclass(eq=False)
class SamplePath:
    """Process values at increasing times.

    ``values`` is one-dimensional for a single path and ``(M, len(times))``
    for a batch of independent paths on common times.
    """

    times: np.ndarray
    values: np.ndarray
    method: str
    params: HermiteParams | None
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.method not in METHODS:
            raise HermiteError(f"unknown method tag {self.method!r}; expected one of {METHODS}")
        if self.times.ndim != 1 or self.values.shape[-1] != self.times.size:
            raise HermiteError("times and values must have equal lengths")
        if np.any(self.times < 0) or np.any(np.diff(self.times) <= 0):
            raise HermiteError("times must be nonnegative and strictly increasing")
        if self.times.size and self.times[0] == 0.0 and np.any(self.values[..., 0] != 0.0):
            raise HermiteError("value at time 0 must be 0")

    @property
    def batched(self) -> bool:
        return self.values.ndim == 2

    def index_of(self, t: Sequence[float]) -> np.ndarray:
        """Positions of the requested times; raises listing every absent time."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t)
        pos_c = np.clip(pos, 0, self.times.size - 1)
        scale = max(1.0, float(self.times[-1]))
        ok = np.abs(self.times[pos_c] - t) <= 1e-12 * scale
        if not np.all(ok):
            missing = ", ".join(repr(float(x)) for x in t[~ok][:20])
            raise HermiteError(f"path has no value at times: {missing}")
        return pos_c

    def sidecar(self) -> dict:
        return {
            "method": self.method,
            "params": None if self.params is None else {"q": self.params.q, "H": self.params.H},
            "seed": self.seed,
            "metadata": self.metadata,
        }

    def to_csv(self, path) -> Path:
        """Write ``time,value`` rows and a JSON sidecar ``<path>.json``."""
        if self.batched:
            raise HermiteError("CSV export holds one path; select a row first")
        path = Path(path)
        rows = "\n".join(f"{t!r},{v!r}" for t, v in zip(self.times.tolist(), self.values.tolist()))
        path.write_text("time,value\n" + rows + "\n")
        Path(str(path) + ".json").write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))
        return path

    def row(self, i: int) -> "SamplePath":
        if not self.batched:
            return self
        return SamplePath(self.times, self.values[i], self.method, self.params, self.seed, dict(self.metadata))


def read_path_csv(path, params: HermiteParams | None = None) -> SamplePath:
    """Read a path written by :meth:`SamplePath.to_csv`.

    The sidecar supplies method, parameters and seed when present; ``params``
    fills in the parameters when it does not.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or [c.strip() for c in lines[0].split(",")] != ["time", "value"]:
        raise HermiteError(f"{path}: line 1 must be the header 'time,value'")
    times, values = [], []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            a, b = line.split(",")
            times.append(float(a))
            values.append(float(b))
        except ValueError as exc:
            raise HermiteError(f"{path}: line {no}: cannot parse {line!r}") from exc
    side = Path(str(path) + ".json")
    method, seed, meta = "gaussian-exact", None, {}
    if side.exists():
        info = json.loads(side.read_text())
        method = info.get("method", method)
        seed = info.get("seed")
        meta = info.get("metadata", {})
        if params is None and info.get("params"):
            params = HermiteParams(int(info["params"]["q"]), float(info["params"]["H"]))
    return SamplePath(np.array(times), np.array(values), method, params, seed, meta)


# ---------------------------------------------------------------- exact Gaussian


@dataclass(eq=False)
class GaussianFactor:
    """Cholesky factor of the fractional Brownian covariance at fixed times."""

    times: np.ndarray
    positive: np.ndarray
    chol: np.ndarray
    H: float

    @property
    def dim(self) -> int:
        return int(self.chol.shape[0])

    def paths(self, normals: np.ndarray) -> np.ndarray:
        """Map standard normals of shape ``(M, dim)`` to values ``(M, len(times))``."""
        g = np.atleast_2d(normals)
        out = np.zeros((g.shape[0], self.times.size))
        out[:, self.positive] = g @ self.chol.T
        return out


def gaussian_factor(points: Sequence[float], H: float, jitter: float = 0.0) -> GaussianFactor:
    """Factor the covariance at ``points`` (sorted, distinct, nonnegative)."""
    if not 0.0 < H < 1.0:
        raise HermiteError(f"Hurst index must lie in (0, 1), got {H}")
    t = np.sort(np.asarray(points, dtype=float))
    if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) == 0):
        raise HermiteError("points must be nonempty, distinct and nonnegative")
    if t.size > MAX_EXACT_POINTS:
        raise HermiteError(f"{t.size} points exceed the dense factorization budget {MAX_EXACT_POINTS}")
    pos = t > 0
    tp = t[pos]
    cov = np.atleast_2d(covariance(tp[:, None], tp[None, :], H))
    if jitter:
        cov = cov + jitter * np.eye(tp.size)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise HermiteError(
            "covariance factorization failed (numerically not positive definite); "
            "retry with jitter=1e-12"
        ) from exc
    return GaussianFactor(t, pos, chol, H)


def sample_gaussian_exact(
    points: Sequence[float],
    H: float,
    seed=None,
    size: int | None = None,
    jitter: float = 0.0,
) -> SamplePath:
    """Exact fractional Brownian motion at ``points``.

    Parameters
    ----------
    points : sequence of float
        Distinct nonnegative times (sorted on output).
    H : float
        Hurst index in (0, 1); only ``H > 1/2`` is a Hermite process, the
        rest is accepted for Gaussian comparisons.
    seed : int, SeedSequence or Generator
    size : int, optional
        Number of independent paths; values then have shape ``(size, n)``.
    jitter : float
        Added to the covariance diagonal before factorization.
    """
    fac = gaussian_factor(points, H, jitter)
    rng = np.random.default_rng(seed)
    m = 1 if size is None else int(size)
    vals = fac.paths(rng.standard_normal((m, fac.dim)))
    params = HermiteParams(1, H) if H > 0.5 else None
    return SamplePath(fac.times, vals[0] if size is None else vals, "gaussian-exact", params, _seed_tag(seed))


def _seed_tag(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


# ---------------------------------------------------------------- kernel


def kernel_L(t: float, y: Sequence[float], params: HermiteParams) -> float:
    """Pointwise value of the Hermite kernel ``L_t(y)``.

    ``c(H,q) * int_0^t prod_i (u - y_i)_+^{-alpha} du`` by adaptive quadrature
    with the algebraic endpoint singularity handled by a weight function.
    Returns ``inf`` when the largest coordinate is repeated so that the
    singularity is not integrable.
    """
    if not t > 0:
        raise HermiteError("kernel_L needs t > 0")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != params.q:
        raise HermiteError(f"y must have {params.q} coordinates")
    a = params.alpha
    top = float(y.max())
    if top >= t:
        return 0.0
    lo = max(0.0, top)
    at_lo = y == top if top >= 0.0 else np.zeros(y.size, dtype=bool)
    mult = int(at_lo.sum())
    if mult * a >= 1.0:
        return math.inf
    rest = y[~at_lo]

    def smooth(u):
        return float(np.prod((u - rest) ** (-a)))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if mult:
                val, _ = integrate.quad(smooth, lo, t, weight="alg", wvar=(-a * mult, 0.0), limit=200)
            else:
                val, _ = integrate.quad(smooth, lo, t, limit=200)
        except integrate.IntegrationWarning as exc:
            raise HermiteError(
                f"quadrature did not converge near the singularity at {lo}; "
                "raise the subdivision limit or split the interval"
            ) from exc
    return normalizing_constant(params) * val


def _overlap(s: float, a: float) -> float:
    """``int_0^inf x^{-a} (x + s)^{-a} dx`` by quadrature."""
    head, _ = integrate.quad(lambda x: (x + s) ** (-a), 0.0, 1.0, weight="alg", wvar=(-a, 0.0))
    tail, _ = integrate.quad(lambda x: x ** (-a) * (x + s) ** (-a), 1.0, np.inf, limit=200)
    return head + tail


@functools.lru_cache(maxsize=None)
def _unnormalized_variance(q: int, H: float, nodes: int) -> float:
    a = 0.5 + (1.0 - H) / q
    # int_0^1 int_0^1 G(|u-v|)^q du dv = 2 int_0^1 (1-s) G(s)^q ds, G(s) ~ s^{1-2a}
    x, w = special.roots_jacobi(nodes, 1.0, 2.0 * H - 2.0)
    s = 0.5 * (1.0 + x)
    g = np.array([_overlap(float(si), a) for si in s])
    # weight (1-x)(1+x)^{2H-2} = 2^{2H-1} (1-s) s^{2H-2}; ds = dx/2
    vals = g**q / s ** (2.0 * H - 2.0)
    integral = np.sum(w * vals) / 2.0 ** (2.0 * H - 1.0) / 2.0
    return math.factorial(q) * 2.0 * integral


@functools.lru_cache(maxsize=None)
def normalizing_constant(params: HermiteParams, nodes: int = 16) -> float:
    """Constant ``c(H, q)`` making ``E Z_1^2 = 1``.

    The variance of the unnormalized kernel at ``t = 1`` is reduced by
    stationarity to a one-dimensional integral over the lag, whose inner
    overlap integral is evaluated by adaptive quadrature and whose outer
    integral uses Gauss-Jacobi nodes matched to the lag singularity.
    """
    v = _unnormalized_variance(params.q, params.H, nodes)
    if not np.isfinite(v) or v <= 0:
        raise HermiteError(f"variance integral failed for {params}")
    return 1.0 / math.sqrt(v)


# ---------------------------------------------------------------- chaos sampler


def default_truncation(params: HermiteParams, scale: float = 1.0, tol: float = 1e-4) -> float:
    """Left truncation point of the noise domain.

    The relative variance carried by noise older than ``T`` behaves like
    ``(T/scale)^{-(2 alpha - 1)}``; ``T`` is chosen so that this is about
    ``tol``.  Never below 50 time units.
    """
    expo = 2.0 * params.alpha - 1.0
    T = scale * tol ** (-1.0 / expo)
    return float(min(max(T, 50.0 * max(scale, 1.0)), 1e120))


def chaos_grid(
    right: float,
    width: float,
    t_left: float,
    fine_left: float = 0.0,
    ratio: float = 1.2,
) -> Grid:
    """Uniform cells of ``width`` on ``(fine_left, right]`` and geometrically
    growing cells further left down to ``-t_left``.
    """
    n_fine = int(round((right - fine_left) / width))
    if n_fine < 1 or abs(n_fine * width - (right - fine_left)) > 1e-9 * width:
        raise HermiteError("the fine region must hold a whole number of cells")
    if ratio < 1.0:
        raise HermiteError("grading ratio must be at least 1")
    fine = fine_left + width * np.arange(n_fine + 1)
    fine[-1] = right
    left = []
    x, w = fine_left, width
    while x > -t_left:
        w = w * ratio
        x = max(x - w, -t_left)
        left.append(x)
    return Grid.from_edges(np.concatenate([np.array(left[::-1]), fine]))


def _cell_average_matrix(u: np.ndarray, grid: Grid, a: float) -> np.ndarray:
    """Mean of ``(u - y)_+^{-a}`` over each cell, rows indexed by ``u``."""
    p = 1.0 - a
    e = grid.edges
    d = np.maximum(u[:, None] - e[None, :], 0.0) ** p
    return (d[:, :-1] - d[:, 1:]) / (p * grid.widths)[None, :]


def increment_kernel(
    params: HermiteParams,
    grid: Grid,
    t0: float,
    t1: float,
    nodes: int = 8,
    scale: float | None = None,
) -> SeparableKernel:
    """Projection of the kernel of ``Z_{t1} - Z_{t0}`` onto the grid.

    The time integral is replaced by Gauss-Legendre nodes on each piece of
    ``[t0, t1]`` between grid edges; each node contributes a pure tensor power
    of the cell averages of ``(u - y)_+^{-alpha}``.
    """
    if not t1 > t0:
        raise HermiteError("increment kernel needs t1 > t0")
    e = grid.edges
    cuts = np.concatenate([[t0], e[(e > t0) & (e < t1)], [t1]])
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = cuts[:-1, None], cuts[1:, None]
    u = (0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)).ravel()
    wt = (0.5 * (hi - lo) * w[None, :]).ravel()
    c = normalizing_constant(params) if scale is None else scale
    return SeparableKernel(grid, _cell_average_matrix(u, grid, params.alpha), c * wt, params.q)


def _stack(kernels: Sequence[SeparableKernel]) -> tuple[np.ndarray, list[slice]]:
    sl, start = [], 0
    for k in kernels:
        sl.append(slice(start, start + k.weights.size))
        start += k.weights.size
    return np.vstack([k.vectors for k in kernels]), sl


def integrate_many(kernels: Sequence[SeparableKernel], noise: NoiseRealization, chunk: int = 4096) -> np.ndarray:
    """Integrals of several separable kernels on shared noise, shape ``(M, len(kernels))``."""
    vecs, sl = _stack(kernels)
    norms = [k.norms() for k in kernels]
    xi = np.atleast_2d(noise.increments)
    out = np.empty((xi.shape[0], len(kernels)))
    for s in range(0, xi.shape[0], chunk):
        proj = xi[s : s + chunk] @ vecs.T
        for j, k in enumerate(kernels):
            out[s : s + chunk, j] = k.integrate_projections(proj[:, sl[j]], norms[j])
    return out


def sample_chaos(
    grid: Grid,
    params: HermiteParams,
    t_points: Sequence[float],
    seed=None,
    size: int | None = None,
    nodes: int = 8,
    calibrate: bool = True,
) -> SamplePath:
    """Hermite process at ``t_points`` from the projected multiple integral.

    All times share one noise draw.  Values are built from the integrals of
    the increments between consecutive times, so the path is additive.  With
    ``calibrate`` the kernel is rescaled so that the projected variance at
    the largest time equals ``t^{2H}``; the raw ratio is kept in metadata.
    """
    t = np.sort(np.asarray(t_points, dtype=float))
    if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) == 0):
        raise HermiteError("t_points must be nonempty, distinct and nonnegative")
    if t[-1] > grid.right or grid.left >= 0:
        raise HermiteError(f"grid {grid} must cover (left < 0, {t[-1]}]")
    pos = t[t > 0]
    bounds = np.concatenate([[0.0], pos])
    inside = (grid.edges[1:] > 0) & (grid.edges[:-1] < t[-1])
    coarsest = grid.widths[inside].max()
    if np.diff(bounds).min() < coarsest * (1 - 1e-9):
        raise HermiteError(
            f"grid too coarse: cells of width {coarsest:g} for time steps of {np.diff(bounds).min():g}"
        )
    kern = [increment_kernel(params, grid, a, b, nodes) for a, b in zip(bounds[:-1], bounds[1:])]
    whole = SeparableKernel(
        grid,
        np.vstack([k.vectors for k in kern]),
        np.concatenate([k.weights for k in kern]),
        params.q,
    )
    raw = whole.second_moment() / pos[-1] ** (2 * params.H)
    factor = 1.0 / math.sqrt(raw) if calibrate else 1.0
    noise = draw_noise(grid, seed, size=size)
    inc = integrate_many(kern, noise) * factor
    vals = np.zeros((inc.shape[0], t.size))
    vals[:, t > 0] = np.cumsum(inc, axis=1)
    meta = {
        "raw_variance_ratio": raw,
        "calibration": factor,
        "t_left": -grid.left,
        "cells": grid.cells,
        "nodes": nodes,
    }
    return SamplePath(t, vals[0] if size is None else vals, "chaos", params, _seed_tag(seed), meta)


# ---------------------------------------------------------------- DMT sums


@dataclass(frozen=True)
class DmtConfig:
    """Partial-sum approximation with ``n`` summands per unit time.

    The driving sequence has covariance ``r(k) = (1 + k^2)^{(H-1)/q}``.
    """

    n: int
    H: float
    q: int

    def __post_init__(self):
        if self.n < 1:
            raise HermiteError("n must be >= 1")
        HermiteParams(self.q, self.H)

    @property
    def alpha(self) -> float:
        """Covariance decay exponent ``(2H - 2)/q``."""
        return (2.0 * self.H - 2.0) / self.q

    def autocovariance(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return (1.0 + k**2) ** ((self.H - 1.0) / self.q)

    @property
    def normalization(self) -> float:
        """Standard deviation of ``sum_{i<=n} He_q(xi_i)``, computed exactly."""
        return _dmt_norm(self.n, self.H, self.q)


@functools.lru_cache(maxsize=64)
def _dmt_norm(n: int, H: float, q: int) -> float:
    k = np.arange(1, n, dtype=float)
    r = (1.0 + k**2) ** ((H - 1.0) / q)
    total = n + 2.0 * np.sum((n - k) * r**q)
    return math.sqrt(math.factorial(q) * total)


def _circulant_eigs(cfg: DmtConfig, length: int) -> tuple[np.ndarray, int]:
    m = 1 << max(1, int(math.ceil(math.log2(max(length, 2)))))
    for _ in range(4):
        k = np.arange(m + 1)
        r = cfg.autocovariance(k)
        row = np.concatenate([r, r[-2:0:-1]])
        lam = np.fft.rfft(row).real
        if lam.min() >= -1e-10 * lam.max():
            return np.clip(lam, 0.0, None), m
        m *= 2
    raise HermiteError("circulant embedding has negative eigenvalues even after padding")


def sample_dmt(
    config: DmtConfig,
    params: HermiteParams,
    t_points: Sequence[float],
    seed=None,
    size: int | None = None,
) -> SamplePath:
    """Normalized Hermite partial sums ``sum_{i <= floor(n t)} He_q(xi_i) / norm``.

    The stationary sequence is produced by circulant embedding.  The norm is
    the exact standard deviation of the sum up to ``n``, so the value at
    ``t = 1`` has variance one.
    """
    if (params.q, params.H) != (config.q, config.H):
        raise HermiteError("DmtConfig and params disagree on (q, H)")
    t = np.sort(np.asarray(t_points, dtype=float))
    if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) == 0):
        raise HermiteError("t_points must be nonempty, distinct and nonnegative")
    idx = np.floor(config.n * t + 1e-9).astype(int)
    length = int(idx.max())
    if length > 2**24:
        raise HermiteError(f"{length} summands exceed the memory budget")
    lam, m = _circulant_eigs(config, max(length, 1))
    two_m = 2 * m
    amp = np.sqrt(lam / two_m)
    amp_full = np.concatenate([amp, amp[-2:0:-1]])
    rng = np.random.default_rng(seed)
    M = 1 if size is None else int(size)
    out = np.zeros((M, t.size))
    norm_ = config.normalization
    step = max(1, (1 << 21) // two_m)
    done = 0
    while done < M:
        b = min(step, M - done)
        pairs = (b + 1) // 2
        g = rng.standard_normal((pairs, two_m)) + 1j * rng.standard_normal((pairs, two_m))
        z = np.fft.fft(g * amp_full[None, :], axis=1)
        seq = np.empty((2 * pairs, length))
        seq[0::2] = z.real[:, :length]
        seq[1::2] = z.imag[:, :length]
        seq = seq[:b]
        csum = np.cumsum(_he_q(params.q, seq), axis=1)
        csum = np.concatenate([np.zeros((b, 1)), csum], axis=1)
        out[done : done + b] = csum[:, idx] / norm_
        done += b
    meta = {"n": config.n, "normalization": norm_, "embedding": two_m}
    return SamplePath(t, out[0] if size is None else out, "dmt-sum", params, _seed_tag(seed), meta)


def _he_q(q: int, x: np.ndarray) -> np.ndarray:
    coef = np.zeros(q + 1)
    coef[q] = 1.0
    return np.polynomial.hermite_e.hermeval(x, coef)


# ---------------------------------------------------------------- q = 2 cumulants


def _lag_kernel_matrix(H: float, n: int) -> np.ndarray:
    """Galerkin matrix of ``|u - v|^{H-1}`` on ``[0, 1]`` in the orthonormal cell basis."""
    h = 1.0 / n

    def prim(x):
        return np.abs(x) ** (H + 1.0) / (H * (H + 1.0))

    k = np.arange(n, dtype=float)
    # int_{cell i} int_{cell j} |u - v|^{H-1} for lag k = i - j
    lag = (prim((k + 1) * h) - 2.0 * prim(k * h) + prim((k - 1) * h))
    return linalg.toeplitz(lag) / h


@functools.lru_cache(maxsize=16)
def rosenblatt_cumulants(H: float, n: int = 1024) -> dict:
    """Cumulants of the standardized order-two Hermite variable ``Z_1``.

    ``kappa_m = 2^{m-1} (m-1)! (c B)^m tr(K^m)`` where ``K`` is the integral
    operator with kernel ``|u - v|^{H-1}`` on the unit interval and
    ``(c B)^2 = H(2H - 1)/2``.  Traces come from a Galerkin discretization
    with exact cell integrals; the change from ``n/2`` to ``n`` cells is
    returned as an error indicator.
    """
    HermiteParams(2, H)
    cb2 = H * (2.0 * H - 1.0) / 2.0

    def kappas(m):
        ev = linalg.eigvalsh(_lag_kernel_matrix(H, m))
        return {j: 2 ** (j - 1) * math.factorial(j - 1) * cb2 ** (j / 2) * float(np.sum(ev**j)) for j in (3, 4)}

    fine, coarse = kappas(n), kappas(n // 2)
    return {
        "kappa2": 1.0,
        "kappa3": fine[3],
        "kappa4": fine[4],
        "fourth_moment": 3.0 + fine[4],
        "fourth_moment_change": abs(fine[4] - coarse[4]),
        "cells": n,
    }
