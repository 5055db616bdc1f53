import io
import json

import numpy as np
import pytest

from cnls.core import VecField, make_grid, norm_l4l2
from cnls.diagnostics import (
    DiagnosticsMonitor,
    DiagnosticsRecord,
    ScatteringAccumulator,
    _pair_integral_direct,
    _pair_integral_fft,
    central_difference,
    dispersion_fit,
    edge_window,
    mass_abc,
    morawetz_action,
    morawetz_derivative,
    morawetz_direct,
    morawetz_fft,
    periodic_offsets,
    relative_drift,
    second_difference,
    virial_chain,
)
from cnls.experiments import morawetz_test_data
from cnls.solver import SolverConfig, evolve, galilean_boost, linear_half_step

from conftest import gaussian_field, smooth_localized_field

RECORD_FIELDS = ["t", "mass_abc", "l2h_0", "l2h_1", "l2h_2", "energy", "variance", "virial_v1",
                 "morawetz_M", "l4_accum", "sup_norm", "localized"]


def test_edge_window_profile():
    g = make_grid(20.0, 64)
    dx, dy = periodic_offsets(g)
    w = edge_window(dx, dy, g.L)
    inner = (np.abs(dx) <= 0.9 * g.L / 2) & (np.abs(dy) <= 0.9 * g.L / 2)
    assert np.all(w[inner] == 1.0)
    assert np.all(w[0, :] == 0.0) and np.all((w >= 0) & (w <= 1))


def test_pair_integral_oracle(rng):
    g = make_grid(3.0, 8)
    k, f, h = (rng.standard_normal((8, 8)) for _ in range(3))
    assert _pair_integral_fft(k, f, h, g) == pytest.approx(_pair_integral_direct(k, f, h, g), rel=1e-12)
    naive = 0.0
    for a in range(8):
        for b in range(8):
            for c in range(8):
                for d in range(8):
                    naive += k[(a - c) % 8, (b - d) % 8] * f[a, b] * h[c, d]
    assert _pair_integral_direct(k, f, h, g) == pytest.approx(naive * g.dx**4, rel=1e-12)
    with pytest.raises(ValueError):
        _pair_integral_direct(np.ones((32, 32)), np.ones((32, 32)), np.ones((32, 32)), make_grid(1.0, 32))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("weight", ["abs", "quadratic"])
def test_morawetz_direct_oracle(n, weight):
    u = morawetz_test_data(make_grid(2 * np.pi, 16), n, width=0.8)
    a_fft, t_fft = morawetz_fft(u, weight)
    a_dir, t_dir = morawetz_direct(u, weight)
    assert a_fft == pytest.approx(a_dir, rel=1e-10)
    for name in ("hessian", "bilaplacian", "nonlinear", "momentum"):
        assert getattr(t_fft, name) == pytest.approx(getattr(t_dir, name), rel=1e-10, abs=1e-12)


def test_morawetz_zero_field():
    u = VecField(make_grid(8.0, 32), np.zeros((2, 32, 32)))
    assert morawetz_action(u) == 0.0
    assert morawetz_derivative(u) == 0.0


def test_morawetz_even_data_vanishes():
    g = make_grid(16.0, 64)
    u = gaussian_field(g, [1.0, 0.5])
    scale = morawetz_action(morawetz_test_data(g, 2))
    assert abs(scale) > 1e-3
    assert abs(morawetz_action(u)) < 1e-12 * abs(scale)
    # a common boost makes P proportional to rho, so M is still odd-integrand zero
    moving = galilean_boost(gaussian_field(g, [1.0]), [2 * np.pi / g.L * 3, 0.0])
    assert abs(morawetz_action(moving)) < 1e-10 * abs(scale)


def test_morawetz_identity_short_run():
    g = make_grid(16.0, 64)
    u0 = morawetz_test_data(g, 2)
    dt = 2e-3
    vals = []
    evolve(u0, SolverConfig(t_end=2 * dt, dt_max=dt, sample_interval=dt, adaptive=False),
           [lambda t, u: vals.append((morawetz_action(u), morawetz_derivative(u)))])
    fd = central_difference([v[0] for v in vals], dt)[0]
    assert fd == pytest.approx(vals[1][1], rel=1e-3)


def test_virial_gaussian_values():
    g = make_grid(20.0, 128)
    A = 1.3
    vc = virial_chain(gaussian_field(g, [A]))
    assert vc.V == pytest.approx(A**2 * np.pi, rel=1e-10)
    assert vc.V1 == 0.0 or abs(vc.V1) < 1e-14
    assert vc.sixteenE == pytest.approx(16 * (0.5 * A**2 * np.pi - A**4 * np.pi / 8), rel=1e-10)
    assert vc.localized


def test_virial_flags_delocalized():
    g = make_grid(6.0, 64)
    assert not virial_chain(gaussian_field(g, [1.0], width=1.5)).localized


def test_virial_first_identity_short_run():
    g = make_grid(20.0, 128)
    u0 = galilean_boost(gaussian_field(g, [1.0, 0.7]), [2 * np.pi / g.L, 0.0])
    dt = 1e-3
    vals = []
    evolve(u0, SolverConfig(t_end=2 * dt, dt_max=dt, sample_interval=dt, adaptive=False),
           [lambda t, u: vals.append(virial_chain(u))])
    fd = central_difference([v.V for v in vals], dt)[0]
    assert abs(fd - vals[1].V1) < 1e-5 * abs(vals[1].V1) + 1e-6
    fd2 = second_difference([v.V for v in vals], dt)[0]
    assert fd2 == pytest.approx(vals[1].sixteenE, rel=1e-4)


def test_accumulator_trapezoid_and_order():
    acc = ScatteringAccumulator()
    for t in np.linspace(0, 1, 11):
        acc.add(t, t ** 0.25)  # integrand t
    assert acc.total == pytest.approx(0.5, rel=1e-12)
    assert all(b >= a for a, b in zip(acc.accum, acc.accum[1:]))
    assert acc.tail_fraction(0.1) == pytest.approx(0.19, rel=1e-12)
    with pytest.raises(ValueError):
        acc.add(0.5, 1.0)


def test_accumulator_zero_field():
    g = make_grid(4.0, 8)
    acc = ScatteringAccumulator()
    for t in (0.0, 0.5, 1.0):
        acc.update(t, VecField(g, np.zeros((1, 8, 8))))
    assert acc.total == 0.0 and acc.tail_fraction() == 0.0


def test_dispersion_fit_free_gaussian():
    g = make_grid(64.0, 256)
    u0 = gaussian_field(g, [1.0])
    times = np.linspace(2.0, 4.0, 9)
    l4 = [norm_l4l2(linear_half_step(u0, 2 * t)) for t in times]
    slope = dispersion_fit(times, l4, (2.0, 4.0))
    assert slope == pytest.approx(-0.5, abs=0.05)
    exact = [(np.pi / (2 * (1 + 4 * t * t))) ** 0.25 for t in times]
    np.testing.assert_allclose(l4, exact, rtol=1e-8)


@pytest.mark.parametrize("window", [(0.0, 1.0), (3.0, 2.0), (1.0, 10.0)])
def test_dispersion_fit_bad_window(window):
    with pytest.raises(ValueError):
        dispersion_fit([1.0, 2.0, 3.0], [1.0, 0.8, 0.7], window)


def test_mass_abc_probes(rng):
    g = make_grid(8.0, 32)
    u = VecField(smooth_localized_field(rng, g, 3).grid, smooth_localized_field(rng, g, 3).data, offset=-1)
    m = u.component_masses()
    assert mass_abc(u, 1, 0, 0) == pytest.approx(m.sum())
    assert mass_abc(u, 0, 1, 0) == pytest.approx(m[2] - m[0])
    assert mass_abc(u, 0, 0, 1) == pytest.approx(m[0] + m[2])
    assert mass_abc(u, 2, -1, 3) == pytest.approx(2 * m.sum() - (m[2] - m[0]) + 3 * (m[0] + m[2]))


def test_record_json_fields():
    rec = DiagnosticsRecord(0.0, {"1,0,0": 1.0}, 1, 1, 1, 0.5, 2.0, 0.0, 0.0, 0.0, 1.0)
    assert list(json.loads(rec.to_json())) == RECORD_FIELDS


def test_monitor_stream_and_mass_probes():
    g = make_grid(16.0, 64)
    X, Y = g.coords
    u0 = VecField(g, np.array([0.8 * np.exp(-(X**2 + Y**2) / 2), 0.5 * np.exp(-(X**2 + Y**2) / 3 + 0.5j * X)]),
                  offset=-1)
    buf = io.StringIO()
    mon = DiagnosticsMonitor(stream=buf)
    evolve(u0, SolverConfig(t_end=1.0, dt_max=5e-3, sample_interval=0.1), [mon])
    lines = buf.getvalue().splitlines()
    assert len(lines) == 11 == len(mon.records)
    first = json.loads(lines[0])
    assert list(first) == RECORD_FIELDS and set(first["mass_abc"]) == {"1,0,0", "0,1,0", "0,0,1"}
    t = mon.series("t")
    assert np.all(np.diff(t) > 0)
    assert np.all(np.diff(mon.series("l4_accum")) >= 0)
    for key in first["mass_abc"]:
        series = [r.mass_abc[key] for r in mon.records]
        assert relative_drift(series, 1.0) < 1e-10


def test_small_data_accumulator_saturates():
    g = make_grid(64.0, 256)
    u0 = gaussian_field(g, [1.0]) * np.sqrt(0.01 * 11.7 / np.pi)
    mon = DiagnosticsMonitor()
    evolve(u0, SolverConfig(t_end=3.5, dt_max=0.01, sample_interval=0.05), [mon])
    assert mon.accumulator.tail_fraction(0.1) < 0.02
