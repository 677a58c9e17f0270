"""Conjugation defect of the smoothed spectral step."""

import numpy as np

from diracflow.circle import build_circle_family
from diracflow.egorov import SmoothStep, defect_study, heisenberg_defect
from diracflow.families import apply_function, assemble_snapshot
from diracflow.propagator import evolve

CHI = SmoothStep(0.5)


def test_constant_family_has_zero_defect(const_family):
    e = heisenberg_defect(const_family, CHI, 4.0, tol=1e-10)
    assert np.linalg.norm(e) < 1e-9


def test_defect_vanishes_at_time_zero(twisted_family):
    e = heisenberg_defect(twisted_family, CHI, 0.0)
    assert np.linalg.norm(e) < 1e-12


def test_smooth_step_shape():
    assert CHI(0.0) == 0.5
    assert CHI(10.0) > 1.0 - 1e-8
    assert CHI(-10.0) < 1e-8


def test_conservation_under_independent_back_propagation(twisted_family):
    """U(0,t)(chi(H(t)) + E(t))U(t,0) must reproduce chi(H(0)) even when the
    two propagators are integrated independently."""
    t = 3.0
    u_fwd = evolve(twisted_family, 0.0, t, tol=1e-9).u
    u_bwd = evolve(twisted_family, t, 0.0, tol=1e-9).u  # independent run
    chi_0 = apply_function(assemble_snapshot(twisted_family, 0.0), CHI)
    chi_t = apply_function(assemble_snapshot(twisted_family, t), CHI)
    e = u_fwd @ chi_0 @ np.linalg.inv(u_fwd) - chi_t
    back = u_bwd @ (chi_t + e) @ u_fwd
    assert np.linalg.norm(back - chi_0) < 1e-7


def test_defect_study_metric_family(metric_geom):
    report = defect_study(
        lambda n: build_circle_family(metric_geom, n),
        CHI,
        np.linspace(-20.0, 20.0, 5),
        [8, 16],
        tol=1e-8,
    )
    assert report.passed
    assert all(np.isfinite(report.uniform_bounds[n]) for n in (8, 16))
    assert report.growth_ratios[16] < report.growth_cap
    # unweighted norms bounded as well
    assert all(np.max(report.raw_norms[n]) < 1.0 for n in (8, 16))
    # proxies recorded for both smoothing orders at each rung
    for n in (8, 16):
        assert set(report.smoothing_proxies[n]) == {1, 2}
        assert all(np.isfinite(v) for v in report.smoothing_proxies[n].values())


def test_defect_study_ripple_family(ripple_geom):
    report = defect_study(
        lambda n: build_circle_family(ripple_geom, n),
        CHI,
        np.linspace(-6.0, 6.0, 5),
        [6, 12],
        tol=1e-7,
    )
    # genuinely non-commuting family: defect nonzero yet weighted norms stay
    # bounded across the doubling
    assert np.max(report.raw_norms[6]) > 1e-4
    assert report.growth_ratios[12] < report.growth_cap


def test_csv_rows_shape(metric_geom):
    report = defect_study(
        lambda n: build_circle_family(metric_geom, n),
        CHI,
        np.linspace(-5.0, 5.0, 3),
        [8],
        tol=1e-8,
    )
    rows = list(report.csv_rows())
    assert len(rows) == 3
    assert len(rows[0]) == 6
