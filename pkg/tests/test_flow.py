import math
from dataclasses import replace

import numpy as np
import pytest

from yamabe_blowup import flow
from yamabe_blowup.bubble import dimension
from yamabe_blowup.errors import DomainError
from yamabe_blowup.flow import (FlowState, SchemeBreakdown, ThetaGrid, constant_state, diagnostics, energy,
                                initial_state, mu_fit, naive_run, run_blowup, step)


def _sphere_volume(N):
    return 2 * math.pi ** ((N + 1) / 2) / math.gamma((N + 1) / 2)


@pytest.mark.parametrize("N", [5, 6, 7])
def test_cell_volumes_tile_the_sphere(N):
    g = ThetaGrid(N, 300)
    assert np.all(g.volumes > 0)
    assert g.volumes.sum() == pytest.approx(_sphere_volume(N), rel=1e-12)


def test_laplacian_conserves_mass():
    g = ThetaGrid(5, 200)
    u = np.exp(np.cos(g.theta))
    assert abs(g.integrate(g.apply_laplacian(u))) < 1e-10 * g.integrate(np.abs(g.apply_laplacian(u)))


def test_laplacian_on_first_harmonic():
    g = ThetaGrid(5, 2000)
    u = np.cos(g.theta)
    lap = g.apply_laplacian(u)
    inner = slice(5, -5)
    assert np.max(np.abs(lap[inner] + 5 * u[inner])) < 1e-2


def test_grid_and_state_validation():
    with pytest.raises(DomainError):
        ThetaGrid(5, 8)
    g = ThetaGrid(5, 32)
    with pytest.raises(DomainError):
        FlowState(g, -np.ones(32), 0.0, 1e-3, 0.0)
    with pytest.raises(DomainError):
        FlowState(g, np.ones(31), 0.0, 1e-3, 0.0)
    with pytest.raises(DomainError):
        flow._advance(constant_state(5, g), 1e-3, "explicit")


@pytest.mark.parametrize("scheme", ["imex", "imex2", "fully_implicit"])
def test_constant_solution_is_stationary(scheme):
    st = constant_state(5, ThetaGrid(5, 200))
    u0 = st.u.copy()
    for _ in range(50):
        st = step(st, scheme)
    assert np.max(np.abs(st.u - u0)) < 1e-9


def test_positive_potential_pulls_constants_down():
    st = constant_state(5, ThetaGrid(5, 100), h=1.0, dt=1e-2)
    u0 = st.u[0]
    for _ in range(20):
        st = step(st)
    assert np.all(st.u < u0)
    assert np.ptp(st.u) < 1e-12 * u0  # spatially constant data stays constant


def test_ordered_data_stay_ordered():
    g = ThetaGrid(5, 200)
    c = constant_state(5, g).u[0]
    base = c * (1 + 0.05 * np.cos(g.theta))
    lo = FlowState(g, base, 0.0, 1e-3, 0.5)
    hi = FlowState(g, 1.05 * base, 0.0, 1e-3, 0.5)
    for _ in range(100):
        lo, hi = step(lo), step(hi)
    assert np.all(hi.u > lo.u)
    assert np.all(lo.u > 0)


def test_richardson_scheme_is_second_order():
    g = ThetaGrid(5, 120)
    c = constant_state(5, g).u[0]
    start = FlowState(g, c * (1 + 0.05 * np.cos(g.theta)), 0.0, 0.0, 0.5)

    def run(scheme, dt, T=0.2):
        st = replace(start, dt=dt)
        for _ in range(int(round(T / dt))):
            st = step(st, scheme)
        return st.u

    ref = run("imex2", 0.2 / 256)
    errs = [np.max(np.abs(run("imex2", 0.2 / n) - ref)) for n in (8, 16, 32)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.7)
    first = [np.max(np.abs(run("imex", 0.2 / n) - ref)) for n in (16, 32)]
    assert math.log2(first[0] / first[1]) == pytest.approx(1.0, abs=0.3)


def test_breakdown_is_reported(monkeypatch):
    st = constant_state(5, ThetaGrid(5, 32))
    monkeypatch.setattr(flow, "_advance", lambda state, dt, scheme: -state.u)
    with pytest.raises(SchemeBreakdown) as info:
        step(st, min_dt=1e-6)
    assert "min_u" in str(info.value) or info.value.details


def test_initial_profile_matches_the_bubble_scale():
    st = initial_state(5, 1.0, 6.0, ThetaGrid(5, 800))
    from yamabe_blowup.dynamics import mu0
    assert mu_fit(5, st.u) == pytest.approx(float(mu0(5, 6.0)), rel=0.05)
    d = diagnostics(st)
    assert d["min_u"] > 0 and d["ab_ratio"] == 0.0
    assert math.isfinite(energy(st))


def test_unshot_trajectory_leaves_the_threshold():
    rows = naive_run(5, 1.0, 6.0, 40.0, grid=ThetaGrid(5, 400), dt=0.02)
    ratio = rows[-1]["max_u"] / rows[0]["max_u"]
    assert ratio > 100 or ratio < 1e-2


def test_short_shooting_run():
    run = run_blowup(5, 1.0, 6.0, 9.0, grid=ThetaGrid(5, 600))
    t, m = run.column("t"), run.column("mu_fit")
    assert t[-1] >= 9.0 - 0.05
    assert m[-1] < m[0]
    # mu is still ~0.16 here, so only the inner core is compared with the bubble
    assert run.core_deviation(ymax=2.0) < 0.05
    assert np.all(run.column("min_u") > 0)
    with pytest.raises(DomainError):
        run_blowup(5, 1.0, 6.0, 5.0)


def test_refining_space_and_time_moves_mu_by_under_one_percent():
    from yamabe_blowup.flow import ShootingConfig

    coarse = run_blowup(5, 1.0, 6.0, 12.0, grid=ThetaGrid(5, 600))
    fine = run_blowup(5, 1.0, 6.0, 12.0, grid=ThetaGrid(5, 1200), cfg=ShootingConfig(dt_max=0.01))
    a = np.interp(12.0, coarse.column("t"), coarse.column("mu_fit"))
    b = np.interp(12.0, fine.column("t"), fine.column("mu_fit"))
    assert abs(a / b - 1) < 0.01
