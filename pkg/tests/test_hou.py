from __future__ import annotations

import math

import numpy as np
import pytest

from hqv.harness import config_from_dict, run_hou_experiment
from hqv.hermite import HermiteParams, SamplePath, sample_gaussian_exact
from hqv.hou import HouError, HouPath, compute_vnx, estimate_hurst_hou, solve_langevin, vnx_decomposition
from hqv.increments import DyadicScheme, IncrementSet, anchor, sample_dominant_iid, select_indices
from hqv.quadvar import compute_vn, estimate_hurst, studentized_deviation

P1 = HermiteParams(1, 0.7)


def grid_path(N, values):
    t = np.arange(values.shape[-1]) * 2.0**-N
    return SamplePath(t, values, "gaussian-exact", P1, None)


def exact_driver(N, rng, size, T=1.0):
    t = np.arange(int(T * 2**N) + 1) * 2.0**-N
    return sample_gaussian_exact(t, 0.7, rng, size=size)


def test_zero_driver():
    hou = solve_langevin(grid_path(6, np.zeros(65)), 6)
    assert np.all(hou.x_values == 0.0)


def test_linear_driver_converges_to_ode_solution():
    N = 12
    t = np.arange(2**N + 1) * 2.0**-N
    hou = solve_langevin(grid_path(N, t.copy()), N)
    assert np.max(np.abs(hou.x_values - (1 - np.exp(-t)))) < 1e-3


def test_euler_recursion_by_hand():
    z = np.array([0.0, 1.0, 0.5, 2.0])
    hou = solve_langevin(grid_path(1, z), 1)
    x = [0.0]
    for k in range(3):
        x.append(x[-1] * 0.5 + z[k + 1] - z[k])
    np.testing.assert_allclose(hou.x_values, x, rtol=1e-15)


def test_non_uniform_grid_rejected():
    p = SamplePath(np.array([0.0, 0.25, 0.75]), np.zeros(3), "gaussian-exact", P1, None)
    with pytest.raises(HouError):
        solve_langevin(p, 2)


def test_moments_stable_under_refinement(rng):
    sup = []
    for N in (8, 10):
        x = solve_langevin(exact_driver(N, rng, 4000), N).x_values
        sup.append(np.max(np.mean(x**2, axis=0)))
    assert np.isfinite(sup).all()
    assert sup[1] == pytest.approx(sup[0], rel=0.1)


def test_vnx_with_driver_in_place_of_solution(rng):
    N = 10
    s = DyadicScheme(N)
    drv = exact_driver(N, rng, 5)
    fake = HouPath(drv.times, drv.values, drv, N)
    e = np.array([anchor(l, s) for l in select_indices(s)])
    j = np.rint(e * 2**N).astype(int)
    inc = IncrementSet(s, select_indices(s), e, drv.values[:, j + 1] - drv.values[:, j])
    np.testing.assert_array_equal(compute_vnx(fake, s, 0.7), compute_vn(inc, 0.7))
    np.testing.assert_array_equal(
        estimate_hurst_hou(fake, s), estimate_hurst(np.mean(inc.deltas**2, axis=1), N)
    )


def test_decomposition_identity(rng):
    N = 10
    s = DyadicScheme(N)
    hou = solve_langevin(exact_driver(N, rng, 200), N)
    d = vnx_decomposition(hou, s, 0.7)
    scale = np.abs(d["v_z"]) + np.abs(d["quadratic_y"]) + 2 * np.abs(d["cross"])
    assert np.all(np.abs(d["residual"]) <= 1e-10 * scale)


def test_drift_increment_scaling(rng):
    # E dY^2 <= h int E X^2 <= h^2 sup E X^2 at every resolution
    scaled, sup = [], []
    for N in (8, 10):
        s = DyadicScheme(N)
        hou = solve_langevin(exact_driver(N, rng, 2000), N)
        j = np.rint(np.array([anchor(l, s) for l in select_indices(s)]) * 2**N).astype(int)
        dy = hou.y_values[:, j + 1] - hou.y_values[:, j]
        scaled.append(np.mean(dy**2) * 2.0 ** (2 * N))
        sup.append(np.max(np.mean(hou.x_values**2, axis=0)))
    assert scaled[0] <= sup[0] and scaled[1] <= sup[1]
    assert scaled[1] <= 2.0 * scaled[0]


def test_anchors_beyond_solution():
    with pytest.raises(HouError):
        compute_vnx(solve_langevin(grid_path(10, np.zeros(20)), 10), DyadicScheme(10), 0.7)


def test_estimator_bias_shrinks():
    cfg = config_from_dict(
        {"kind": "hou", "q": 1, "hurst": 0.7, "sweep": [10, 14], "replications": 500, "seed": 3}
    )
    rows = run_hou_experiment(cfg)
    assert abs(rows[1]["bias_x"]) < abs(rows[0]["bias_x"])


def test_hybrid_studentized_variance(rng):
    # i.i.d. dominant driver increments plus drift corrections at their worst size
    s = DyadicScheme.for_cardinality(128)
    card, M = 128, 10_000
    dz = sample_dominant_iid(s, P1, card * M, rng).reshape(M, card)
    x_sup = math.sqrt(math.gamma(2 * 0.7 + 1) / 2)
    dy = -(2.0**-s.N) * x_sup * rng.choice([-1.0, 1.0], size=(M, card))
    h = estimate_hurst(np.mean((dz + dy) ** 2, axis=1), s.N)
    st = studentized_deviation(h, 0.7, s, card)
    assert np.var(st, ddof=1) == pytest.approx(2.0, rel=0.10)
