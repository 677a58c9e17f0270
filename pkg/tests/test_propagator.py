"""Propagator: oracles, composition, order, and isometry diagnostics."""

import numpy as np
import pytest

from diracflow.circle import CircleGeometry, build_circle_family
from diracflow.families import HamiltonianFamily, constant_family
from diracflow.propagator import (
    check_l2t_isometry,
    evolve,
    evolve_fixed_steps,
    phase,
)


def test_autonomous_family_matches_matrix_exponential():
    h = np.array([[1.0, 0.3], [0.3, -0.5]])
    fam = constant_family(h)
    prop = evolve(fam, 0.0, 1.0, tol=1e-12)
    lam, v = np.linalg.eigh(h)
    exact = (v * np.exp(1j * lam)) @ v.conj().T
    assert np.linalg.norm(prop.u - exact) < 1e-11
    assert prop.est_error < 1e-11


def test_equal_endpoints_give_identity(metric_family):
    prop = evolve(metric_family, 1.3, 1.3, tol=1e-12)
    assert np.array_equal(prop.u, np.eye(metric_family.dim))
    assert prop.steps == 0


def test_static_half_integer_circle_full_turn():
    fam = build_circle_family(CircleGeometry(alpha=0.5), 6)
    prop = evolve(fam, 0.0, 2.0 * np.pi, tol=1e-10)
    # every mode carries exp(2 pi i (n + 1/2)) = -1
    assert np.linalg.norm(prop.u + np.eye(fam.dim)) < 1e-9


def test_phase_values():
    fam = constant_family(np.diag([1.0]))
    assert np.allclose(phase(fam, 0.0), np.eye(1))
    assert abs(phase(fam, np.pi)[0, 0] + 1.0) < 1e-12
    fam2 = constant_family(np.diag([2.0, -2.0]))
    assert np.linalg.norm(phase(fam2, np.pi / 2.0) + np.eye(2)) < 1e-12


def test_phase_rejects_infinite_time(metric_family):
    with pytest.raises(ValueError):
        phase(metric_family, float("inf"))


def test_composition_law(twisted_family):
    tol = 1e-7
    u_full = evolve(twisted_family, -2.0, 3.0, tol=tol).u
    u_a = evolve(twisted_family, -2.0, 1.2, tol=tol).u
    u_b = evolve(twisted_family, 1.2, 3.0, tol=tol).u
    assert np.linalg.norm(u_full - u_b @ u_a) < 10 * tol


def test_uniform_bound_stable_under_refinement(twisted_geom):
    norms = []
    for n in (6, 12):
        fam = build_circle_family(twisted_geom, n)
        u = evolve(fam, -6.0, 6.0, tol=1e-7).u
        norms.append(np.linalg.norm(u, 2))
    # midpoint steps are exactly unitary, so the bound is machine-tight
    assert all(abs(x - 1.0) < 1e-10 for x in norms)


def test_midpoint_order_two(ripple_family):
    ref = evolve_fixed_steps(ripple_family, 0.0, 2.0, 512, scheme="magnus4").u
    errs = []
    for n in (16, 32, 64):
        errs.append(np.linalg.norm(evolve_fixed_steps(ripple_family, 0.0, 2.0, n).u - ref))
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert all(1.7 < r < 2.3 for r in rates)


def test_magnus4_order_four(ripple_family):
    ref = evolve_fixed_steps(ripple_family, 0.0, 2.0, 512, scheme="magnus4").u
    errs = []
    for n in (8, 16, 32):
        errs.append(
            np.linalg.norm(evolve_fixed_steps(ripple_family, 0.0, 2.0, n, scheme="magnus4").u - ref)
        )
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert all(3.5 < r < 4.5 for r in rates)


def test_adaptive_estimate_tracks_actual_error(ripple_family):
    tol = 1e-7
    prop = evolve(ripple_family, 0.0, 3.0, tol=tol)
    ref = evolve_fixed_steps(ripple_family, 0.0, 3.0, 1024, scheme="magnus4").u
    actual = np.linalg.norm(prop.u - ref)
    assert actual < 10 * tol
    assert prop.est_error < 10 * tol


def test_crank_nicolson_unitary_step(metric_family):
    u = evolve(metric_family, 0.0, 1.0, tol=1e-6, scheme="crank_nicolson").u
    assert np.linalg.norm(u.conj().T @ u - np.eye(metric_family.dim)) < 1e-10


def test_isometry_constant_family(const_family):
    prop = evolve(const_family, 0.0, 4.0, tol=1e-12)
    rep = check_l2t_isometry(const_family, prop, isometry_tol=1e-12)
    assert rep.drift_per_unit_time < 1e-10
    assert rep.passed


def test_isometry_unitary_circle_family(twisted_family):
    prop = evolve(twisted_family, -6.0, 6.0, tol=1e-7)
    rep = check_l2t_isometry(twisted_family, prop, isometry_tol=1e-8)
    assert rep.passed
    assert rep.max_drift < 1e-8 * rep.elapsed


def test_isometry_gronwall_envelope(ripple_family):
    prop = evolve(ripple_family, -3.0, 3.0, tol=2e-7)
    rep = check_l2t_isometry(ripple_family, prop)
    assert rep.passed
    assert rep.max_drift <= max(rep.gronwall_envelope, 1e-8)
    assert rep.gronwall_envelope > 0.0


def test_nonfinite_abort():
    def h0(t):
        return np.diag([np.inf if abs(t - 0.5) < 0.2 else 1.0]).astype(complex)

    fam = HamiltonianFamily(dim=1, h0_at=h0, h_plus=np.eye(1), h_minus=np.eye(1))
    from diracflow.errors import DiracflowError

    with pytest.raises(DiracflowError):
        evolve(fam, 0.0, 1.0, tol=1e-8)


def test_step_trace_csv(tmp_path, metric_family):
    path = tmp_path / "trace.csv"
    evolve(metric_family, 0.0, 2.0, tol=1e-7, trace_path=path)
    import csv

    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "dt", "est_error"]
    assert len(rows) > 1
    assert float(rows[1][1]) > 0.0
