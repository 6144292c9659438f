"""Modified quadratic variation, its decomposition and the Hurst estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hermite import (
    DmtConfig,
    HermiteParams,
    chaos_grid,
    default_truncation,
    rosenblatt_cumulants,
    sample_chaos,
    sample_dmt,
)
from .increments import DecomposedIncrement, DyadicScheme, IncrementSet

__all__ = [
    "QuadVarResult",
    "EstimatorResult",
    "AsymptoticVariance",
    "compute_sn",
    "compute_vn",
    "compute_un",
    "quadratic_variation",
    "compute_vn_parts",
    "estimate_hurst",
    "estimator",
    "asymptotic_variance",
    "studentized_deviation",
]


MC_CHUNK = 50_000


class QuadVarError(ValueError):
    """Degenerate sample or inconsistent input to a quadratic-variation statistic."""


@dataclass
class QuadVarResult:
    scheme: DyadicScheme
    cardinality: int
    s_n: float
    v_n: float
    u_n: float
    parts: tuple | None = None

    def as_dict(self) -> dict:
        out = {
            "N": self.scheme.N,
            "beta": self.scheme.beta,
            "gamma": self.scheme.gamma,
            "cardinality": self.cardinality,
            "s_n": self.s_n,
            "v_n": self.v_n,
            "u_n": self.u_n,
        }
        if self.parts is not None:
            out["parts"] = list(self.parts)
        return out


@dataclass
class EstimatorResult:
    h_hat: float
    scheme: DyadicScheme
    s_n: float
    cardinality: int
    studentized: float | None = None

    def as_dict(self) -> dict:
        out = {"h_hat": self.h_hat, "s_n": self.s_n, "cardinality": self.cardinality, "N": self.scheme.N}
        if self.studentized is not None:
            out["studentized"] = self.studentized
        return out


def compute_sn(incs: IncrementSet | np.ndarray):
    """Mean of the squared increments (per row for a batch)."""
    d = incs.deltas if isinstance(incs, IncrementSet) else np.asarray(incs, dtype=float)
    if d.shape[-1] == 0:
        raise QuadVarError("S_N of an empty increment set")
    out = np.mean(d**2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def compute_un(s_n, N: int, H: float):
    """``2^{2HN} S_N - 1``."""
    return np.exp2(2.0 * H * N) * s_n - 1.0


def compute_vn(incs: IncrementSet | np.ndarray, H: float, N: int | None = None):
    """``sqrt(|L|) (2^{2HN} S_N - 1)``; ``N`` is taken from the increment set when omitted."""
    if isinstance(incs, IncrementSet):
        N = incs.scheme.N
        d = incs.deltas
    else:
        d = np.asarray(incs, dtype=float)
        if N is None:
            raise QuadVarError("N is required for a bare array of increments")
    card = d.shape[-1]
    return math.sqrt(card) * compute_un(compute_sn(d), N, H)


def quadratic_variation(incs: IncrementSet, H: float) -> QuadVarResult:
    if incs.deltas.ndim != 1:
        raise QuadVarError("quadratic_variation takes one increment set; use compute_vn for batches")
    s = compute_sn(incs)
    u = float(compute_un(s, incs.scheme.N, H))
    return QuadVarResult(incs.scheme, incs.cardinality, s, math.sqrt(incs.cardinality) * u, u)


def compute_vn_parts(
    parts: DecomposedIncrement,
    scheme: DyadicScheme,
    H: float,
    dominant_second: np.ndarray,
    negligible_second: np.ndarray,
) -> tuple:
    """Split of ``V_N`` into dominant, negligible and cross contributions.

    Parameters
    ----------
    parts : DecomposedIncrement
        Chaos-mode increments, arrays of shape ``(|L|,)`` or ``(M, |L|)``.
    dominant_second, negligible_second : ndarray
        Exact second moments of the two parts for every index.

    Returns
    -------
    (v1, v2, v3)
        ``v1`` and ``v2`` are centred sums of squares of the dominant and
        negligible parts, ``v3`` twice the sum of their products; all carry
        the factor ``2^{2HN} / sqrt(|L|)``.
    """
    if parts is None or parts.dominant is None:
        raise QuadVarError("the three-part split needs chaos-mode increments")
    dom = np.asarray(parts.dominant)
    neg = np.asarray(parts.negligible)
    card = dom.shape[-1]
    c = np.exp2(2.0 * H * scheme.N) / math.sqrt(card)
    v1 = c * np.sum(dom**2 - dominant_second, axis=-1)
    v2 = c * np.sum(neg**2 - negligible_second, axis=-1)
    v3 = 2.0 * c * np.sum(dom * neg, axis=-1)
    return v1, v2, v3


def estimate_hurst(s_n, N: int):
    """``-log(S_N) / (2 N log 2)``."""
    s = np.asarray(s_n, dtype=float)
    if np.any(~(s > 0)):
        raise QuadVarError("S_N must be positive (degenerate sample)")
    out = -np.log2(s) / (2.0 * N)
    return float(out) if out.ndim == 0 else out


def studentized_deviation(h_hat, H_true: float, scheme: DyadicScheme, cardinality: int | None = None):
    """``2 N log(2) sqrt(|L|) (H - h_hat)``."""
    card = scheme.cardinality(True) if cardinality is None else cardinality
    return 2.0 * scheme.N * math.log(2.0) * math.sqrt(card) * (H_true - np.asarray(h_hat))


def estimator(incs: IncrementSet, H_true: float | None = None) -> EstimatorResult:
    s = compute_sn(incs)
    h = estimate_hurst(s, incs.scheme.N)
    st = None
    if H_true is not None:
        st = float(studentized_deviation(h, H_true, incs.scheme, incs.cardinality))
    return EstimatorResult(h, incs.scheme, s, incs.cardinality, st)


@dataclass
class AsymptoticVariance:
    """``E Z_1^4 - 1`` with its standard error (zero for closed forms)."""

    value: float
    standard_error: float
    method: str
    details: dict


def asymptotic_variance(
    params: HermiteParams,
    method: str = "analytic",
    budget: int = 100_000,
    seed=None,
    sampler: str = "dmt",
    dmt_n: int = 2**12,
    chaos_width: float = 1.0 / 256,
) -> AsymptoticVariance:
    """Limit variance of the centred quadratic variation.

    ``method="analytic"`` is exact for order one (value 2).
    ``method="cumulant"`` (order two) uses the trace formula for the fourth
    cumulant.  ``method="mc"`` estimates ``E Z_1^4 - 1`` from ``budget``
    draws of ``Z_1`` with the ``"dmt"`` or ``"chaos"`` sampler; both have
    unit variance by construction.
    """
    q, H = params.q, params.H
    if method == "analytic":
        if q != 1:
            raise QuadVarError("closed form available for q = 1 only; use method='cumulant' or 'mc'")
        return AsymptoticVariance(2.0, 0.0, "analytic", {})
    if method == "cumulant":
        if q == 1:
            return AsymptoticVariance(2.0, 0.0, "cumulant", {})
        if q != 2:
            raise QuadVarError("trace formula implemented for q <= 2")
        c = rosenblatt_cumulants(H)
        return AsymptoticVariance(c["fourth_moment"] - 1.0, c["fourth_moment_change"], "cumulant", c)
    if method != "mc":
        raise QuadVarError(f"unknown method {method!r}; choose analytic, cumulant or mc")
    if sampler == "dmt":
        cfg = DmtConfig(dmt_n, H, q)

        def draw(ss, size):
            return sample_dmt(cfg, params, [1.0], ss, size=size)

        details = {"sampler": "dmt", "n": dmt_n}
    elif sampler == "chaos":
        grid = chaos_grid(1.0, chaos_width, default_truncation(params))

        def draw(ss, size):
            return sample_chaos(grid, params, [1.0], ss, size=size)

        details = {"sampler": "chaos", "width": chaos_width}
    else:
        raise QuadVarError(f"unknown sampler {sampler!r}; choose dmt or chaos")
    # fixed-size chunks keep memory bounded and results independent of the budget split
    z4 = np.empty(budget)
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for k, ss in enumerate(root.spawn(-(-budget // MC_CHUNK))):
        lo = k * MC_CHUNK
        size = min(MC_CHUNK, budget - lo)
        path = draw(ss, size)
        z4[lo : lo + size] = path.values[:, -1] ** 4
    if sampler == "chaos":
        details["raw_variance_ratio"] = path.metadata["raw_variance_ratio"]
    details["M"] = budget
    return AsymptoticVariance(float(z4.mean() - 1.0), float(z4.std(ddof=1) / math.sqrt(budget)), "mc", details)
