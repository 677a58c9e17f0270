"""Circle geometries: closed-form spectra, eta values, boundary formula."""

import numpy as np
import pytest

from diracflow.circle import (
    CircleGeometry,
    aps_rhs_circle,
    build_circle_family,
    closed_form_spectrum,
    eta_invariant,
    eta_invariant_scaled,
    metric_step_geometry,
    mode_lattice,
)
from diracflow.errors import BandwidthError
from diracflow.families import assemble_snapshot
from diracflow.profiles import ConstantProfile

INF = float("inf")


def test_static_antiperiodic_family_is_half_integer_lattice():
    geom = CircleGeometry(alpha=0.5)
    fam = build_circle_family(geom, 8)
    for t in (-3.0, 0.0, 5.0):
        es = assemble_snapshot(fam, t)
        assert np.allclose(es.eigenvalues, np.sort(np.arange(-8, 8) + 0.5))


def test_metric_step_spectrum_and_persistent_zero_mode(metric_geom):
    fam = build_circle_family(metric_geom, 8)
    for t in (-10.0, -1.0, 0.0, 2.0, 30.0):
        es = assemble_snapshot(fam, t)
        oracle = closed_form_spectrum(metric_geom, t, 8)
        assert np.max(np.abs(es.eigenvalues - oracle)) < 1e-12
        assert np.min(np.abs(es.eigenvalues)) == 0.0  # the n = 0 mode never moves


def test_twist_shifts_every_curve(twisted_geom):
    fam = build_circle_family(twisted_geom, 6)
    for t in (-2.0, 0.0, 1.5):
        es = assemble_snapshot(fam, t)
        expected = np.sort(mode_lattice(0.5, 6) + twisted_geom.a(t))
        assert np.max(np.abs(es.eigenvalues - expected)) < 1e-12


def test_integer_twist_preserves_integer_lattice():
    geom = CircleGeometry(alpha=0.0, twist=ConstantProfile(1.0))
    lam = closed_form_spectrum(geom, 0.0, 5)
    assert np.allclose(lam, np.round(lam))


def test_scaled_lattice_closed_form():
    geom = CircleGeometry(alpha=0.0, h=ConstantProfile(4.0))
    lam = closed_form_spectrum(geom, 12.3, 6)
    assert np.allclose(lam, np.arange(-6, 7) / 2.0)


def test_bandwidth_budget_enforced():
    geom = CircleGeometry(alpha=0.5, c_ripples=((5, ConstantProfile(0.05)),))
    with pytest.raises(BandwidthError):
        build_circle_family(geom, 8)
    build_circle_family(geom, 12)  # 5 <= 12 // 2 is allowed


def test_ripple_family_hermitian_core_and_similarity(ripple_geom):
    fam = build_circle_family(ripple_geom, 6)
    h0 = fam.h0(0.7)
    assert np.linalg.norm(h0 - h0.conj().T) < 1e-12
    t_fac = fam.t_factor(0.7)
    h = fam.h_base(0.7)
    assert np.linalg.norm(h - t_fac @ h0 @ np.linalg.inv(t_fac)) < 1e-10
    es = assemble_snapshot(fam, 0.7)
    assert np.max(np.abs(np.imag(es.eigenvalues))) < 1e-10


@pytest.mark.parametrize("b,expected", [(0.5, 0.0), (0.25, 0.5), (0.0, 0.0), (0.9, -0.8)])
def test_eta_closed_form_values(b, expected):
    assert eta_invariant(b, "hurwitz").value == pytest.approx(expected, abs=1e-14)


def test_eta_kernel_dimension_at_integer_offset():
    from diracflow.circle import lattice_kernel_dim

    assert lattice_kernel_dim(0.0) == 1
    assert lattice_kernel_dim(2.0) == 1
    assert lattice_kernel_dim(0.25) == 0


@pytest.mark.parametrize("b", [0.1, 0.25, 0.5, 0.9])
def test_eta_methods_agree(b):
    hurwitz = eta_invariant(b, "hurwitz")
    lattice = eta_invariant(b, "partial_sum_zeta")
    assert abs(hurwitz.value - lattice.value) < 1e-6
    assert not lattice.flagged


@pytest.mark.parametrize("b", [0.1, 0.25, 0.9])
def test_eta_reflection_antisymmetry(b):
    for method in ("hurwitz", "partial_sum_zeta"):
        total = eta_invariant(b, method).value + eta_invariant(1.0 - b, method).value
        assert abs(total) < 2e-6


def test_eta_scale_invariance():
    plain = eta_invariant(0.3, "partial_sum_zeta").value
    scaled = eta_invariant_scaled(0.3, scale=2.0).value
    assert abs(plain - scaled) < 1e-6


def test_eta_integer_shift_invariance():
    assert eta_invariant(0.25, "hurwitz").value == eta_invariant(2.25, "hurwitz").value


def test_boundary_formula_alpha_zero(metric_geom):
    rhs = aps_rhs_circle(metric_geom)
    assert rhs.eta_plus == 0.0 and rhs.eta_minus == 0.0
    assert rhs.ker_plus == 1 and rhs.ker_minus == 1
    assert rhs.geometric_terms == 0.0
    assert rhs.rhs_value == -1.0
    assert not rhs.caveats


def test_boundary_formula_alpha_half():
    rhs = aps_rhs_circle(metric_step_geometry(alpha=0.5))
    assert rhs.rhs_value == 0.0
    assert not rhs.caveats


def test_boundary_formula_twisted_carries_caveat(twisted_geom):
    rhs = aps_rhs_circle(twisted_geom)
    assert rhs.rhs_value == 0.0  # eta(0.75) cancels between the two ends
    assert rhs.caveats


def test_closed_form_requires_constant_lapse(ripple_geom):
    from diracflow.errors import DiracflowError

    with pytest.raises(DiracflowError):
        closed_form_spectrum(ripple_geom, 0.0, 6)
