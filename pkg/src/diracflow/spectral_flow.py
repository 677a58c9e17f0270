"""Spectral flow of the Hermitian reference family H0(t) via flow partitions.

The extended time line is charted by s in [-1, 1] through t = s/(1-s^2),
with the endpoint operators taken from the family's exact asymptotic data
rather than large-time snapshots.  Eigenvalue tracks are matched between
neighboring grid points by eigenvector overlap, a partition of the
interval picks one spectrum-avoiding threshold per segment, and the flow
is the telescoped change of the counting function dim 1_{[0, a_j)}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NoFlowPartition, TrackMatchingError
from .families import INF, HamiltonianFamily

#: an eigenvalue within this relative distance of zero counts as zero
ZERO_RTOL = 1e-10
#: minimal usable gap width, relative to the spectral scale
MIN_GAP_RTOL = 1e-6
#: matched eigenvector overlap below this triggers grid refinement
OVERLAP_FLOOR = 0.8


def compactified_to_time(s: float) -> float:
    if s >= 1.0:
        return INF
    if s <= -1.0:
        return -INF
    return s / (1.0 - s * s)


def time_to_compactified(t: float) -> float:
    if t == INF:
        return 1.0
    if t == -INF:
        return -1.0
    if t == 0.0:
        return 0.0
    return (-1.0 + np.sqrt(1.0 + 4.0 * t * t)) / (2.0 * t)


def _h0_snapshot(family: HamiltonianFamily, t: float):
    h0 = family.h0(t)
    off = h0[~np.eye(h0.shape[0], dtype=bool)]
    if not np.any(off):
        d = np.real(np.diag(h0))
        order = np.argsort(d, kind="stable")
        return d[order], np.eye(h0.shape[0])[:, order].astype(complex)
    return np.linalg.eigh(h0)


@dataclass
class EigenvalueTracks:
    """Continuously matched eigenvalue curves of H0 over a compactified grid.

    values[i, j] is track j at grid point i; tracks are labeled by their
    ascending order at the first grid point.
    """

    s_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    min_overlap: float
    max_jump: float

    @property
    def n_tracks(self) -> int:
        return self.values.shape[1]

    def spectral_scale(self) -> float:
        return float(max(np.max(np.abs(self.values)), 1.0))

    def csv_rows(self):
        for i, s in enumerate(self.s_grid):
            for j in range(self.n_tracks):
                yield (float(s), float(self.t_grid[i]), j, float(self.values[i, j]))


def build_tracks(
    family: HamiltonianFamily,
    interval: Tuple[float, float] = (-INF, INF),
    grid_density: int = 129,
    max_refine: int = 12,
) -> EigenvalueTracks:
    """Track eigenvalues of H0 over the interval, refining where matching
    between neighbors is ambiguous."""
    s_lo = time_to_compactified(interval[0])
    s_hi = time_to_compactified(interval[1])
    if not s_lo < s_hi:
        raise ValueError(f"empty interval {interval}")
    s_nodes = list(np.linspace(s_lo, s_hi, grid_density))
    eigs = {}
    vecs = {}

    def load(s):
        if s not in eigs:
            lam, v = _h0_snapshot(family, compactified_to_time(s))
            eigs[s], vecs[s] = lam, v
        return eigs[s], vecs[s]

    min_overlap = 1.0
    i = 0
    refines = 0
    while i < len(s_nodes) - 1:
        a, b = s_nodes[i], s_nodes[i + 1]
        _, va = load(a)
        _, vb = load(b)
        overlap = np.abs(va.conj().T @ vb) ** 2
        row, col = linear_sum_assignment(-overlap)
        matched = overlap[row, col]
        if np.min(matched) < OVERLAP_FLOOR:
            if refines >= max_refine * grid_density:
                t_a, t_b = compactified_to_time(a), compactified_to_time(b)
                raise TrackMatchingError(
                    f"eigenvector matching stayed ambiguous on t in [{t_a}, {t_b}] "
                    f"after {refines} refinements"
                )
            s_nodes.insert(i + 1, 0.5 * (a + b))
            refines += 1
            continue
        min_overlap = min(min_overlap, float(np.min(matched)))
        i += 1

    # chain permutations so column j follows one continuous curve
    n = len(s_nodes)
    dim = family.dim
    values = np.empty((n, dim))
    lam0, v_prev = load(s_nodes[0])
    perm = np.arange(dim)
    values[0] = lam0
    for i in range(1, n):
        lam, v = load(s_nodes[i])
        overlap = np.abs(v_prev.conj().T @ v) ** 2
        row, col = linear_sum_assignment(-overlap)
        step_perm = np.empty(dim, dtype=int)
        step_perm[row] = col
        perm = step_perm[perm]
        values[i] = lam[perm]
        v_prev = v
    s_arr = np.asarray(s_nodes)
    jumps = np.abs(np.diff(values, axis=0))
    return EigenvalueTracks(
        s_grid=s_arr,
        t_grid=np.array([compactified_to_time(s) for s in s_arr]),
        values=values,
        min_overlap=min_overlap,
        max_jump=float(np.max(jumps)) if jumps.size else 0.0,
    )


@dataclass
class FlowPartition:
    """Segment breakpoints with one spectrum-avoiding threshold each."""

    breakpoint_indices: np.ndarray
    breakpoints_s: np.ndarray
    thresholds: np.ndarray
    gap_margins: np.ndarray

    @property
    def n_segments(self) -> int:
        return len(self.thresholds)


def _allowed_gaps(swept_intervals, cap, min_width):
    """Open gaps inside (0, cap) after removing the swept intervals."""
    events = sorted((max(lo, 0.0), min(hi, cap)) for lo, hi in swept_intervals
                    if hi > 0.0 and lo < cap)
    gaps = []
    cursor = 0.0
    for lo, hi in events:
        if lo - cursor >= min_width:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cap - cursor >= min_width:
        gaps.append((cursor, cap))
    return gaps


def make_flow_partition(
    tracks: EigenvalueTracks,
    gap_search_cap: float = 1.0,
    min_gap: Optional[float] = None,
) -> FlowPartition:
    """Greedy segmentation: extend each segment while a usable threshold gap
    inside (0, gap_search_cap) survives, then place the threshold at the
    midpoint of the widest surviving gap (ties to the lowest)."""
    scale = tracks.spectral_scale()
    if min_gap is None:
        min_gap = MIN_GAP_RTOL * scale
    n = len(tracks.s_grid)
    values = tracks.values

    def swept(i0, i1):
        lo = values[i0 : i1 + 1].min(axis=0)
        hi = values[i0 : i1 + 1].max(axis=0)
        return list(zip(lo, hi))

    breakpoints = [0]
    thresholds = []
    margins = []
    seg_start = 0
    i = 1
    while i < n:
        if not _allowed_gaps(swept(seg_start, i), gap_search_cap, min_gap):
            if i - 1 == seg_start:
                raise NoFlowPartition(
                    f"no threshold gap in (0, {gap_search_cap}) over the grid step "
                    f"ending at s={tracks.s_grid[i]}; refine the grid or truncation"
                )
            gaps = _allowed_gaps(swept(seg_start, i - 1), gap_search_cap, min_gap)
            best = max(gaps, key=lambda g: (round((g[1] - g[0]) / min_gap), -g[0]))
            thresholds.append(0.5 * (best[0] + best[1]))
            margins.append(0.5 * (best[1] - best[0]))
            breakpoints.append(i - 1)
            seg_start = i - 1
        else:
            i += 1
    gaps = _allowed_gaps(swept(seg_start, n - 1), gap_search_cap, min_gap)
    if not gaps:
        raise NoFlowPartition("no threshold gap on the final segment")
    best = max(gaps, key=lambda g: (round((g[1] - g[0]) / min_gap), -g[0]))
    thresholds.append(0.5 * (best[0] + best[1]))
    margins.append(0.5 * (best[1] - best[0]))
    breakpoints.append(n - 1)
    return FlowPartition(
        breakpoint_indices=np.asarray(breakpoints),
        breakpoints_s=tracks.s_grid[np.asarray(breakpoints)],
        thresholds=np.asarray(thresholds),
        gap_margins=np.asarray(margins),
    )


@dataclass
class SpectralFlowResult:
    value: int
    partition: FlowPartition
    tracks: EigenvalueTracks


def count_in_window(eigenvalues: np.ndarray, upper: float, zero_tol: float) -> int:
    """dim of the [0, upper) eigenspace; eigenvalues within zero_tol of zero
    count as zero and are included."""
    lam = np.asarray(eigenvalues)
    return int(np.count_nonzero((lam >= -zero_tol) & (lam < upper)))


def spectral_flow(
    family: HamiltonianFamily,
    interval: Tuple[float, float] = (-INF, INF),
    grid_density: int = 129,
    gap_search_cap: float = 1.0,
    tracks: Optional[EigenvalueTracks] = None,
) -> SpectralFlowResult:
    """Net signed count of eigenvalues of H0 crossing zero over the interval."""
    if tracks is None:
        tracks = build_tracks(family, interval, grid_density)
    partition = make_flow_partition(tracks, gap_search_cap=gap_search_cap)
    zero_tol = ZERO_RTOL * tracks.spectral_scale()
    total = 0
    for j in range(partition.n_segments):
        i_prev = partition.breakpoint_indices[j]
        i_next = partition.breakpoint_indices[j + 1]
        a_j = partition.thresholds[j]
        total += count_in_window(tracks.values[i_next], a_j, zero_tol)
        total -= count_in_window(tracks.values[i_prev], a_j, zero_tol)
    return SpectralFlowResult(value=int(total), partition=partition, tracks=tracks)


def crossing_count_oracle(lam_minus: np.ndarray, lam_plus: np.ndarray,
                          zero_tol: float = 1e-12) -> int:
    """Endpoint-count oracle: in finite dimension with continuous tracks the
    flow equals #{lam(+inf) >= 0} - #{lam(-inf) >= 0}."""
    plus = int(np.count_nonzero(np.asarray(lam_plus) >= -zero_tol))
    minus = int(np.count_nonzero(np.asarray(lam_minus) >= -zero_tol))
    return plus - minus
