"""Ornstein-Uhlenbeck process driven by a Hermite process.

``dX = -X dt + dZ`` with ``X_0 = 0`` is integrated by the explicit Euler
scheme on the dyadic grid of the driver.  Writing ``Y = X - Z`` the drift
part ``Y_k = -h sum_{j<k} X_j`` is the left Riemann sum of ``-int X``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .hermite import SamplePath
from .increments import DyadicScheme, anchor, select_indices
from .quadvar import compute_vn, estimate_hurst

__all__ = [
    "HouPath",
    "solve_langevin",
    "compute_vnx",
    "vnx_decomposition",
    "estimate_hurst_hou",
]


class HouError(ValueError):
    """Driver not on a dyadic grid, or anchors outside the solved range."""


@dataclass(eq=False)
class HouPath:
    """Solution values on the driver's grid; ``x_values`` may be batched ``(M, n)``."""

    times: np.ndarray
    x_values: np.ndarray
    driver: SamplePath
    N: int

    @property
    def step(self) -> float:
        return 2.0 ** (-self.N)

    @property
    def y_values(self) -> np.ndarray:
        return self.x_values - self.driver.values


def solve_langevin(driver: SamplePath, N: int) -> HouPath:
    """Euler scheme ``X_{k+1} = X_k - h X_k + (Z_{k+1} - Z_k)`` with ``h = 2^-N``.

    The driver must be sampled at ``0, h, 2h, ...`` (any final time).
    """
    t = driver.times
    h = 2.0 ** (-N)
    k = np.arange(t.size)
    if t.size < 2 or t[0] != 0.0 or not np.allclose(t, k * h, rtol=0.0, atol=1e-12 * h):
        raise HouError(f"driver must live on the uniform grid j * 2^-{N} starting at 0")
    dz = np.diff(driver.values, axis=-1)
    x = np.zeros_like(driver.values)
    # X_{k+1} = (1 - h) X_k + dZ_k is a first-order recursive filter
    x[..., 1:] = lfilter([1.0], [1.0, -(1.0 - h)], dz, axis=-1)
    return HouPath(t, x, driver, N)


def _anchor_positions(hou: HouPath, scheme: DyadicScheme) -> tuple[np.ndarray, np.ndarray]:
    if scheme.N != hou.N:
        raise HouError("scheme resolution differs from the solver step")
    idx = select_indices(scheme, True)
    j = np.array([int(round(anchor(l, scheme) / hou.step)) for l in idx])
    if j[-1] + 1 >= hou.times.size:
        raise HouError(
            f"anchor {anchor(idx[-1], scheme)} + 2^-N lies beyond the solved range [0, {hou.times[-1]}]"
        )
    return j, j + 1


def compute_vnx(hou: HouPath, scheme: DyadicScheme, H: float):
    """``2^{2HN}/sqrt(|L|) sum_l (dX_l^2 - 2^{-2HN})``, centred with the driver's increment moment."""
    i0, i1 = _anchor_positions(hou, scheme)
    return compute_vn(hou.x_values[..., i1] - hou.x_values[..., i0], H, scheme.N)


def vnx_decomposition(hou: HouPath, scheme: DyadicScheme, H: float) -> dict:
    """``V_N(X) = V_N(Z) + quadratic_y + 2 cross`` with every term returned.

    ``quadratic_y`` is ``2^{2HN}/sqrt(|L|) sum dY^2`` and ``cross`` is
    ``2^{2HN}/sqrt(|L|) sum dZ dY``.  ``residual`` is the left side minus the
    right side.
    """
    i0, i1 = _anchor_positions(hou, scheme)
    card = i0.size
    c = np.exp2(2 * H * scheme.N) / math.sqrt(card)
    z = hou.driver.values
    y = -hou.step * np.concatenate(
        [np.zeros(z.shape[:-1] + (1,)), np.cumsum(hou.x_values[..., :-1], axis=-1)], axis=-1
    )
    dz = z[..., i1] - z[..., i0]
    dy = y[..., i1] - y[..., i0]
    vz = compute_vn(dz, H, scheme.N)
    quad = c * np.sum(dy**2, axis=-1)
    cross = c * np.sum(dz * dy, axis=-1)
    vx = compute_vnx(hou, scheme, H)
    return {"v_x": vx, "v_z": vz, "quadratic_y": quad, "cross": cross, "residual": vx - (vz + quad + 2 * cross)}


def estimate_hurst_hou(hou: HouPath, scheme: DyadicScheme):
    """Hurst estimate ``-log2(S_N(X)) / (2N)`` from the solution's increments."""
    i0, i1 = _anchor_positions(hou, scheme)
    dx = hou.x_values[..., i1] - hou.x_values[..., i0]
    return estimate_hurst(np.mean(dx**2, axis=-1), scheme.N)
