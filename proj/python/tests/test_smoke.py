import math

import numpy as np
import pytest

import varspec

trapezoid = getattr(np, "trapezoid", None) or np.trapz

ONE_WAY = {
    "design": {"kind": "one_way", "group_sizes": [3] * 20},
    "sigmas": [{"diag": [0.5, 0.3, 0.1, 0.0]}, {"diag": [1.0, 1.0, 1.0, 1.0]}],
    "target": 1,
}


def test_mp_stieltjes_root():
    z, g = complex(1.2, 0.3), 0.5
    m = varspec.mp_stieltjes(z, g)
    assert abs(g * z * m * m + (z + g - 1) * m + 1) < 1e-12
    assert m.imag > 0


def test_mp_density_integrates_to_one():
    g = 0.25
    xs = np.linspace(0.0, 2.5, 20001)
    f = np.array([varspec.mp_density(x, g) for x in xs])
    assert abs(trapezoid(f, xs) - 1.0) < 1e-3


def test_closed_forms_shapes():
    a = [0.1 + 0.2j, -0.3 + 0.5j]
    assert len(varspec.oneway_b(a, [2, 3, 4], 1)) == 2
    assert len(varspec.nested_b([0.1j, 0.2j, 0.3j], [5, 2, 2], 2)) == 3
    assert len(varspec.crossed_b([0.1j] * 5, 4, 2, 3, 2, 5)) == 5


def test_solve_matches_general_route():
    z = complex(0.7, 0.2)
    cf = varspec.solve_at_z(ONE_WAY, z)
    gen = varspec.solve_at_z(ONE_WAY, z, general=True)
    assert cf["converged"] and gen["converged"]
    assert abs(cf["m0"] - gen["m0"]) < 1e-9
    assert cf["m0"].imag > 0


def test_density_and_compare():
    grid = np.linspace(-0.5, 4.0, 600)
    x, f, ok = varspec.density(ONE_WAY, grid, 1e-3)
    assert ok and len(f) == len(grid)
    assert abs(trapezoid(f, x) - 1.0) < 0.05
    eigs = varspec.simulate(ONE_WAY, seed=3, reps=2)
    assert len(eigs) == 2 and len(eigs[0]) == 4
    again = varspec.simulate(ONE_WAY, seed=3, reps=2)
    assert np.array_equal(np.asarray(eigs), np.asarray(again))
    report = varspec.compare(eigs[0], x, f, 1e-3)
    assert 0.0 <= report["ks"] <= 1.0


def test_check_passes():
    passed, checks = varspec.check(ONE_WAY, 4)
    assert passed and len(checks) > 0


def test_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        varspec.mp_stieltjes(1.0 + 0j, 0.5)
    with pytest.raises(ValueError):
        varspec.oneway_b([0j, 0j, 0j], [2, 3], 1)
