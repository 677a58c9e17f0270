"""Snapshots, spectral cuts, projections and the decay check."""

import numpy as np
import pytest

from diracflow.circle import build_circle_family, metric_step_geometry
from diracflow.errors import GapTooSmall, InvariantViolation
from diracflow.families import (
    HamiltonianFamily,
    SpectralCut,
    apply_function,
    assemble_snapshot,
    constant_family,
    negative_cut,
    nonnegative_cut,
    nonpositive_cut,
    positive_cut,
    projection_rank,
    reference_operator,
    spectral_projection,
    verify_decay_hypothesis,
)
from diracflow.profiles import SmoothStepProfile

INF = float("inf")


def test_snapshot_sorts_diagonal_family():
    fam = constant_family(np.diag([3.0, -1.0, 0.0]))
    es = assemble_snapshot(fam, 0.0)
    assert np.allclose(es.eigenvalues, [-1.0, 0.0, 3.0])


def test_snapshot_matches_fourier_diagonalization():
    geom = metric_step_geometry(alpha=0.5, h_from=1.0, h_to=1.0)
    fam = build_circle_family(geom, 8)
    es = assemble_snapshot(fam, 0.3)
    expected = np.sort(np.arange(-8, 8) + 0.5)
    assert np.max(np.abs(es.eigenvalues - expected)) < 1e-14


def test_snapshot_at_plus_infinity_is_endpoint():
    geom = metric_step_geometry(alpha=0.0, h_from=1.0, h_to=4.0)
    fam = build_circle_family(geom, 8)
    es = assemble_snapshot(fam, INF)
    assert np.allclose(es.eigenvalues, np.sort(np.arange(-8, 9) / 2.0))


def test_snapshot_rejects_non_hermitian_core():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    fam = HamiltonianFamily(dim=2, h0_at=lambda t: bad, h_plus=bad, h_minus=bad)
    with pytest.raises(InvariantViolation):
        assemble_snapshot(fam, 0.0)


def test_snapshot_reconstruction_and_phase_gauge():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = (a + a.conj().T) / 2
    fam = constant_family(h)
    es = assemble_snapshot(fam, 0.0)
    assert es.reconstruction_error(h) < 1e-12
    # gauge: the largest-modulus entry of each column is real positive
    for j in range(6):
        col = es.eigenvectors[:, j]
        pivot = col[np.argmax(np.abs(col))]
        assert abs(pivot.imag) < 1e-12 and pivot.real > 0


def test_projection_ranks_on_stated_spectrum():
    fam = constant_family(np.diag([-1.0, 0.0, 2.0]))
    es = assemble_snapshot(fam, 0.0)
    assert projection_rank(es, nonpositive_cut()) == 2
    assert projection_rank(es, negative_cut()) == 1
    assert projection_rank(es, nonnegative_cut()) == 2
    assert projection_rank(es, positive_cut()) == 1


def test_projection_rank_counts_fourier_modes(metric_geom, metric_family):
    es = assemble_snapshot(metric_family, 1.7)
    # modes n >= 0 of the periodic lattice, zero mode included
    assert projection_rank(es, nonnegative_cut()) == 9


def test_projection_idempotent_and_weighted_selfadjoint(ripple_family):
    es = assemble_snapshot(ripple_family, 0.4)
    p = spectral_projection(es, negative_cut())
    assert np.linalg.norm(p @ p - p) < 1e-10
    g = es.inner_product_weight
    assert np.linalg.norm(g @ p - p.conj().T @ g) < 1e-10


def test_complementary_cuts_sum_to_identity(metric_family):
    es = assemble_snapshot(metric_family, 0.9)
    for cut in (negative_cut(), nonpositive_cut(), SpectralCut(0.3, "above", True)):
        total = spectral_projection(es, cut) + spectral_projection(es, cut.complement())
        assert np.linalg.norm(total - np.eye(es.dim)) < 1e-12


def test_cut_on_eigenvalue_requires_exact_tie():
    fam = constant_family(np.diag([-1.0, 0.0, 2.0]))
    es = assemble_snapshot(fam, 0.0)
    # exact tie is fine, include_threshold decides it
    spectral_projection(es, nonpositive_cut())
    # a near miss inside gap_tol is refused
    off = SpectralCut(1e-12, "below", False)
    with pytest.raises(GapTooSmall):
        spectral_projection(es, off)


def test_apply_function_basics():
    fam = constant_family(np.diag([-2.0, 3.0]))
    es = assemble_snapshot(fam, 0.0)
    assert np.allclose(apply_function(es, lambda x: np.ones_like(x)), np.eye(2))
    assert np.allclose(apply_function(es, np.sign), np.diag([-1.0, 1.0]))
    zero = assemble_snapshot(constant_family(np.diag([0.0])), 0.0)
    assert np.allclose(reference_operator(zero), [[1.0]])


def test_apply_function_polynomial_homomorphism(metric_family):
    es = assemble_snapshot(metric_family, 0.25)
    f = lambda x: x**2 - 1.0
    g = lambda x: 0.5 * x + 2.0
    lhs = apply_function(es, lambda x: f(x) * g(x))
    rhs = apply_function(es, f) @ apply_function(es, g)
    assert np.linalg.norm(lhs - rhs) < 1e-10 * np.linalg.norm(lhs)


def test_real_spectrum_invariant(metric_family):
    es = assemble_snapshot(metric_family, 2.0)
    scale = max(np.max(np.abs(es.eigenvalues)), 1.0)
    assert np.max(np.abs(np.imag(es.eigenvalues))) <= 1e-10 * scale


def test_decay_fit_constant_family_is_exact(const_family):
    rep = verify_decay_hypothesis(const_family, np.linspace(-40, 40, 41))
    assert rep.exact_plus and rep.exact_minus and rep.passed


def test_decay_fit_recovers_declared_exponent(metric_geom):
    fam = build_circle_family(metric_geom, 6)
    grid = np.concatenate([-np.geomspace(3, 200, 25), np.geomspace(3, 200, 25)])
    rep = verify_decay_hypothesis(fam, grid)
    assert rep.passed
    assert abs(rep.exponent_plus + 2.0) < 0.3
    assert abs(rep.exponent_minus + 2.0) < 0.3


def test_decay_fit_flags_slow_family():
    geom_slow_h = SmoothStepProfile(1.0, 4.0, decay=1.2)

    # declare delta=2 but decay like <t>^{-1.2}: must fail the tail fit
    def h0(t):
        return np.diag(np.arange(-4, 5) / np.sqrt(geom_slow_h(t))).astype(complex)

    fam = HamiltonianFamily(dim=9, h0_at=h0, h_plus=h0(INF), h_minus=h0(-INF), delta=2.0)
    grid = np.concatenate([-np.geomspace(3, 200, 25), np.geomspace(3, 200, 25)])
    rep = verify_decay_hypothesis(fam, grid)
    assert not rep.passed


def test_non_selfadjoint_perturbation_snapshot(twisted_geom):
    fam0 = build_circle_family(twisted_geom, 6)

    def v_at(t):
        v = np.zeros((fam0.dim, fam0.dim), dtype=complex)
        v[0, 1] = 0.3j / (1.0 + t * t)
        return v

    fam = HamiltonianFamily(
        dim=fam0.dim, h0_at=fam0.h0_at, h_plus=fam0.h_plus, h_minus=fam0.h_minus,
        delta=fam0.delta, v_at=v_at, dh_base_at=fam0.dh_base_at,
    )
    es = assemble_snapshot(fam, 0.5)
    assert not es.hermitian
    h_full = fam.h(0.5)
    assert es.reconstruction_error(h_full) < 1e-10


def test_family_serialization_round_trip(twisted_geom):
    from diracflow.config import geometry_spec_from_geometry

    spec = geometry_spec_from_geometry(twisted_geom)
    clone = spec.build()
    assert clone.alpha == twisted_geom.alpha
    for t in (-INF, -3.0, 0.0, 2.0, INF):
        assert np.isclose(clone.a(t), twisted_geom.a(t), atol=1e-12)
        assert np.isclose(float(clone.h(t)), float(twisted_geom.h(t)), atol=1e-12)
