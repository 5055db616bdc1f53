import math

import numpy as np
import pytest

from cnls.core import VecField, make_grid
from cnls.groundstate import build_vector_ground_state
from cnls.solver import rescale
from cnls.variational import coercivity_check, energy, sharp_constants, weinstein

from conftest import gaussian_field, smooth_localized_field

Q2 = 11.700896525184481


@pytest.mark.parametrize("N", [1, 2, 3, 5, 10, 100, math.inf])
def test_constant_identities(N):
    c = sharp_constants(N, Q2)
    assert abs(c.C_N * c.threshold_mass2 - 2) < 1e-12
    c_inf = sharp_constants(math.inf, Q2).C_N
    if not math.isinf(N):
        assert abs((c_inf - c.C_N) - c_inf / (2 * N)) < 1e-12 * c_inf


def test_constant_rows():
    c1 = sharp_constants(1, Q2)
    assert c1.C_N == pytest.approx(2 / Q2) and c1.threshold_mass2 == pytest.approx(Q2)
    assert sharp_constants(2, Q2).threshold_mass2 == pytest.approx(2 / 3 * Q2)
    ci = sharp_constants(math.inf, Q2)
    assert ci.C_N == pytest.approx(4 / Q2) and ci.threshold_mass2 == pytest.approx(Q2 / 2)
    assert ci.as_row()["N"] == "inf"


def test_constants_monotone():
    vals = [sharp_constants(n, Q2).C_N for n in range(1, 40)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < sharp_constants(math.inf, Q2).C_N


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_constants_reject(bad):
    with pytest.raises(ValueError):
        sharp_constants(bad, Q2)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_weinstein_at_ground_state(townes, N):
    vgs = build_vector_ground_state(townes, N)
    expected = 2 * (2 * N - 1) / (N * townes.mass2)
    assert abs(weinstein(vgs.components) / expected - 1) < 1e-4


def test_weinstein_scaling_invariance(rng):
    g = make_grid(16.0, 64)
    u = smooth_localized_field(rng, g, 2)
    w = weinstein(u)
    assert weinstein(u * 3.7) == pytest.approx(w, rel=1e-12)
    assert weinstein(rescale(u, 2.0)) == pytest.approx(w, rel=1e-8)
    assert weinstein(rescale(u, 0.5)) == pytest.approx(w, rel=1e-8)


def test_weinstein_zero_field():
    g = make_grid(4.0, 8)
    with pytest.raises(ValueError):
        weinstein(VecField(g, np.zeros((1, 8, 8))))


def test_weinstein_bounded_by_sharp_constant(townes):
    rng = np.random.default_rng(3)
    g = make_grid(32.0, 128)
    for n in (1, 2, 3):
        cn = sharp_constants(n, townes.mass2).C_N
        for _ in range(10):
            u = smooth_localized_field(rng, g, n, bandwidth=rng.uniform(1, 4), width=rng.uniform(1, 4))
            assert weinstein(u) <= cn * (1 + 5e-3)


@pytest.mark.parametrize("N", [1, 2])
def test_ground_state_local_maximizer(townes, N):
    rng = np.random.default_rng(11)
    vgs = build_vector_ground_state(townes, N)
    w0 = weinstein(vgs.components)
    X, Y = vgs.components.grid.coords
    env = np.exp(-(X**2 + Y**2) / 8)
    for _ in range(5):
        pert = rng.standard_normal(vgs.components.data.shape) * env * 1e-2
        w = weinstein(vgs.components.with_data(vgs.components.data + pert))
        assert w <= w0 * (1 + 1e-4)


def test_gaussian_energy_closed_form():
    g = make_grid(24.0, 256)
    for A in (0.5, 1.0, np.sqrt(8)):
        u = gaussian_field(g, [A])
        expected = 0.5 * A**2 * np.pi - A**4 * np.pi / 8
        assert energy(u) == pytest.approx(expected, rel=1e-10, abs=1e-12)
    assert energy(gaussian_field(g, [np.sqrt(8)])) == pytest.approx(-4 * np.pi, rel=1e-10)


def test_energy_zero_and_ground_state(townes):
    g = make_grid(4.0, 8)
    assert energy(VecField(g, np.zeros((2, 8, 8)))) == 0
    for N in (1, 2, 3):
        vgs = build_vector_ground_state(townes, N)
        assert abs(energy(vgs.components)) < 1e-6 * vgs.mass2


def test_coercivity_scaled_ground_state(townes):
    vgs = build_vector_ground_state(townes, 2)
    c = sharp_constants(2, townes.mass2)
    rep = coercivity_check(vgs.components * 0.9, c)
    assert rep.mass2 / rep.threshold_mass2 == pytest.approx(0.81, rel=1e-6)
    assert rep.holds and rep.status in ("holds",)


def test_coercivity_tiny_data(rng):
    g = make_grid(16.0, 64)
    u = smooth_localized_field(rng, g, 2) * 0.01
    rep = coercivity_check(u, sharp_constants(2, Q2))
    assert rep.holds
    assert rep.energy == pytest.approx(0.5 * rep.grad2, rel=1e-3)
    assert rep.slack >= 0


def test_coercivity_boundary(townes):
    vgs = build_vector_ground_state(townes, 3)
    rep = coercivity_check(vgs.components, sharp_constants(3, townes.mass2))
    assert rep.boundary and rep.status == "boundary" and not rep.holds


def test_coercivity_above_threshold():
    g = make_grid(16.0, 128)
    rep = coercivity_check(gaussian_field(g, [np.sqrt(8)]), sharp_constants(1, Q2))
    assert rep.status == "above threshold"
