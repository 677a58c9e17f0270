"""Tracks, flow partitions and the counting formula against closed forms."""

import numpy as np
import pytest

from diracflow.circle import build_circle_family, closed_form_spectrum, twisted_geometry
from diracflow.errors import NoFlowPartition
from diracflow.families import HamiltonianFamily, constant_family
from diracflow.spectral_flow import (
    build_tracks,
    crossing_count_oracle,
    make_flow_partition,
    spectral_flow,
    time_to_compactified,
)

INF = float("inf")


def test_constant_family_has_flat_tracks(const_family):
    tracks = build_tracks(const_family, grid_density=33)
    assert np.max(np.abs(tracks.values - tracks.values[0])) < 1e-13
    assert tracks.min_overlap > 0.999


def test_twisted_tracks_cross_zero_where_expected(twisted_geom, twisted_family):
    tracks = build_tracks(twisted_family, grid_density=257)
    # track starting at m + a(-inf) crosses zero once iff its endpoint changes sign
    start = tracks.values[0]
    end = tracks.values[-1]
    n_crossing = np.count_nonzero((start < 0) & (end > 0))
    assert n_crossing == 2
    for j in range(tracks.n_tracks):
        signs = np.sign(tracks.values[:, j])
        flips = np.count_nonzero(np.diff(signs) != 0)
        expected = 1 if (start[j] < 0) != (end[j] < 0) else 0
        assert flips == expected


def test_metric_family_keeps_identically_zero_track(metric_family):
    tracks = build_tracks(metric_family, grid_density=65)
    zero_track = np.min(np.max(np.abs(tracks.values), axis=0))
    assert zero_track == 0.0


def test_partition_threshold_for_two_point_spectrum():
    fam = constant_family(np.diag([-1.0, 1.0]))
    tracks = build_tracks(fam, grid_density=17)
    part = make_flow_partition(tracks)
    assert part.n_segments == 1
    assert part.thresholds[0] == pytest.approx(0.5)


def test_partition_dodges_moving_curves(twisted_family):
    tracks = build_tracks(twisted_family, grid_density=129)
    part = make_flow_partition(tracks)
    assert part.n_segments >= 2
    for j in range(part.n_segments):
        i0, i1 = part.breakpoint_indices[j], part.breakpoint_indices[j + 1]
        a_j = part.thresholds[j]
        dist = np.min(np.abs(tracks.values[i0 : i1 + 1] - a_j))
        assert dist >= part.gap_margins[j] * 0.99


def test_partition_thresholds_fit_under_lowest_positive_curve(metric_family):
    tracks = build_tracks(metric_family, grid_density=65)
    part = make_flow_partition(tracks)
    positive = tracks.values[tracks.values > 1e-9]
    assert np.all(part.thresholds > 0.0)
    assert np.all(part.thresholds < np.min(positive))


def test_partition_failure_when_spectrum_everywhere():
    # eigenvalues fill (0, 1) densely enough that no threshold survives
    lam = np.linspace(0.05, 0.95, 10)
    fam = constant_family(np.diag(lam))
    tracks = build_tracks(fam, grid_density=9)
    with pytest.raises(NoFlowPartition):
        make_flow_partition(tracks, gap_search_cap=1.0, min_gap=0.2)


def test_flow_constant_family(const_family):
    assert spectral_flow(const_family).value == 0


def test_flow_twisted_matches_crossing_oracle(twisted_geom, twisted_family):
    res = spectral_flow(twisted_family)
    lam_m = closed_form_spectrum(twisted_geom, -INF, 8)
    lam_p = closed_form_spectrum(twisted_geom, INF, 8)
    assert res.value == crossing_count_oracle(lam_m, lam_p) == 2


def test_flow_metric_family_zero(metric_geom, metric_family):
    res = spectral_flow(metric_family)
    assert res.value == 0


def test_flow_downward_twist_gives_negative_flow():
    geom = twisted_geometry(alpha=0.5, a_from=1.75, a_to=-0.25)
    fam = build_circle_family(geom, 6)
    assert spectral_flow(fam).value == -2


def test_partition_independence(twisted_family):
    reference = spectral_flow(twisted_family).value
    for density, cap in [(97, 0.6), (161, 1.4), (201, 2.2)]:
        res = spectral_flow(twisted_family, grid_density=density, gap_search_cap=cap)
        assert res.value == reference


def test_concatenation(twisted_family):
    left = spectral_flow(twisted_family, interval=(-INF, 0.5)).value
    right = spectral_flow(twisted_family, interval=(0.5, INF)).value
    total = spectral_flow(twisted_family).value
    assert left + right == total


def test_homotopy_robustness(twisted_geom):
    base = build_circle_family(twisted_geom, 6)
    rng = np.random.default_rng(5)
    a = rng.normal(size=(base.dim, base.dim)) + 1j * rng.normal(size=(base.dim, base.dim))
    herm = (a + a.conj().T) / 2
    herm /= np.linalg.norm(herm, 2)

    def bump(t):
        return np.exp(-0.1 * t * t)

    for eps in (0.0, 0.05, 0.1):
        def h0(t, eps=eps):
            return base.h0(t) + eps * bump(t) * herm

        fam = HamiltonianFamily(dim=base.dim, h0_at=h0, h_plus=base.h_plus,
                                h_minus=base.h_minus, delta=base.delta)
        assert spectral_flow(fam).value == 2


def test_compactification_round_trip():
    for t in (-INF, -17.3, -1.0, 0.0, 0.4, 9.9, INF):
        s = time_to_compactified(t)
        assert -1.0 <= s <= 1.0
        if np.isfinite(t):
            back = s / (1.0 - s * s)
            assert back == pytest.approx(t, rel=1e-12, abs=1e-12)


def test_track_csv_rows(twisted_family):
    tracks = build_tracks(twisted_family, grid_density=17)
    rows = list(tracks.csv_rows())
    assert len(rows) == 17 * twisted_family.dim
    assert len(rows[0]) == 4
