"""Time-dependent Hamiltonian families similar to self-adjoint operators.

A family consists of a Hermitian core H0(t), an invertible similarity T(t)
and asymptotic endpoints, so that H(t) = T(t) H0(t) T(t)^{-1} has real
spectrum and converges to H(+-inf) at a short-range rate <t>^{-delta}.
An optional decaying perturbation V(t) without symmetry may be attached.

Snapshots, spectral projections and functions of H(t) are computed through
the eigendecomposition of H0(t); all downstream modules consume the
EigenSystem produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import GapTooSmall, InvariantViolation

INF = float("inf")

#: relative tolerance on Hermiticity / spectrum realness checks
HERMITICITY_RTOL = 1e-10
#: a cut threshold closer than GAP_RTOL * scale to an eigenvalue is an error
GAP_RTOL = 1e-9


def _as_matrix_fn(obj, dim):
    if obj is None:
        return None
    if callable(obj):
        return obj
    arr = np.asarray(obj, dtype=complex)
    if arr.shape != (dim, dim):
        raise ValueError(f"expected ({dim},{dim}) matrix, got {arr.shape}")
    return lambda t: arr


@dataclass(frozen=True)
class HamiltonianFamily:
    """Sampled map t -> (H0(t), T(t)) with endpoints and decay exponent.

    h0_at and t_at must accept +-inf and return the exact endpoint data.
    t_at None means T(t) = identity for all t.  v_at, when present, is a
    perturbation added to H(t) only; it must decay at the family's rate.
    """

    dim: int
    h0_at: Callable[[float], np.ndarray]
    h_plus: np.ndarray
    h_minus: np.ndarray
    delta: float = 2.0
    t_at: Optional[Callable[[float], np.ndarray]] = None
    v_at: Optional[Callable[[float], np.ndarray]] = None
    dh_base_at: Optional[Callable[[float], np.ndarray]] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "h_plus", np.asarray(self.h_plus, dtype=complex))
        object.__setattr__(self, "h_minus", np.asarray(self.h_minus, dtype=complex))
        if self.delta <= 1.0:
            raise ValueError(f"short-range exponent delta must exceed 1, got {self.delta}")

    # -- raw data access -------------------------------------------------

    def h0(self, t: float) -> np.ndarray:
        return np.asarray(self.h0_at(t), dtype=complex)

    def t_factor(self, t: float) -> Optional[np.ndarray]:
        if self.t_at is None:
            return None
        return np.asarray(self.t_at(t), dtype=complex)

    def h_base(self, t: float) -> np.ndarray:
        """H(t) without the optional perturbation."""
        if t == INF:
            return self.h_plus
        if t == -INF:
            return self.h_minus
        h0 = self.h0(t)
        T = self.t_factor(t)
        if T is None:
            return h0
        return T @ h0 @ np.linalg.inv(T)

    def h(self, t: float) -> np.ndarray:
        """Full generator H(t) (+ V(t) when present)."""
        out = self.h_base(t)
        if self.v_at is not None and np.isfinite(t):
            out = out + np.asarray(self.v_at(t), dtype=complex)
        return out

    def weight(self, t: float) -> Optional[np.ndarray]:
        """Gram matrix G(t) = (T^{-1})^* T^{-1} of the t-dependent pairing."""
        T = self.t_factor(t)
        if T is None:
            return None
        Tinv = np.linalg.inv(T)
        return Tinv.conj().T @ Tinv

    @property
    def has_unitary_dynamics(self) -> bool:
        return self.t_at is None and self.v_at is None

    def dh_base_dt(self, t: float, rel_step: float = 1e-4) -> np.ndarray:
        """dH/dt, analytic when the family carries it, else a centered
        difference with step rel_step * <t>."""
        if not np.isfinite(t):
            return np.zeros((self.dim, self.dim), dtype=complex)
        if self.dh_base_at is not None:
            return np.asarray(self.dh_base_at(t), dtype=complex)
        step = rel_step * np.hypot(1.0, t)
        return (self.h_base(t + step) - self.h_base(t - step)) / (2.0 * step)


def constant_family(h, delta: float = 2.0, label: str = "constant") -> HamiltonianFamily:
    """Time-independent Hermitian family, handy as a trivial test case."""
    h = np.asarray(h, dtype=complex)
    if np.linalg.norm(h - h.conj().T) > HERMITICITY_RTOL * max(np.linalg.norm(h), 1.0):
        raise InvariantViolation("constant_family requires a Hermitian matrix")
    return HamiltonianFamily(
        dim=h.shape[0], h0_at=lambda t: h, h_plus=h, h_minus=h, delta=delta, label=label
    )


# -- spectral cuts ------------------------------------------------------


@dataclass(frozen=True)
class SpectralCut:
    """Half-line spectral window: one of (-inf,a), (-inf,a], [a,inf), (a,inf)."""

    threshold: float = 0.0
    side: str = "below"
    include_threshold: bool = False

    def __post_init__(self):
        if self.side not in ("below", "above"):
            raise ValueError(f"side must be 'below' or 'above', got {self.side!r}")

    def selects(self, eigenvalues: np.ndarray) -> np.ndarray:
        lam = np.real(np.asarray(eigenvalues))
        a = self.threshold
        if self.side == "below":
            return lam <= a if self.include_threshold else lam < a
        return lam >= a if self.include_threshold else lam > a

    def complement(self) -> "SpectralCut":
        other_side = "above" if self.side == "below" else "below"
        return SpectralCut(self.threshold, other_side, not self.include_threshold)

    def describe(self) -> str:
        if self.side == "below":
            return f"(-inf,{self.threshold}{']' if self.include_threshold else ')'}"
        return f"{'[' if self.include_threshold else '('}{self.threshold},inf)"


def negative_cut(threshold: float = 0.0) -> SpectralCut:
    return SpectralCut(threshold, "below", False)


def nonpositive_cut(threshold: float = 0.0) -> SpectralCut:
    return SpectralCut(threshold, "below", True)


def nonnegative_cut(threshold: float = 0.0) -> SpectralCut:
    return SpectralCut(threshold, "above", True)


def positive_cut(threshold: float = 0.0) -> SpectralCut:
    return SpectralCut(threshold, "above", False)


# -- eigensystems --------------------------------------------------------


@dataclass
class EigenSystem:
    """Diagonalized snapshot of one family member.

    eigenvectors holds right eigenvectors as columns; vectors_inv is the
    matching left system so that matrix = eigenvectors @ diag @ vectors_inv
    for any function of the eigenvalues.  inner_product_weight is None for
    the plain L^2 pairing (T = identity).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    vectors_inv: np.ndarray
    inner_product_weight: Optional[np.ndarray] = None
    hermitian: bool = True
    t: float = field(default=np.nan)

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    def matrix(self) -> np.ndarray:
        return self.function_of(self.eigenvalues)

    def function_of(self, values) -> np.ndarray:
        """Assemble eigenvectors @ diag(values) @ vectors_inv."""
        values = np.asarray(values, dtype=complex)
        return (self.eigenvectors * values) @ self.vectors_inv

    def spectral_scale(self) -> float:
        return float(max(np.max(np.abs(self.eigenvalues)), 1.0))

    def reconstruction_error(self, h) -> float:
        h = np.asarray(h, dtype=complex)
        scale = max(np.linalg.norm(h), 1e-300)
        return float(np.linalg.norm(self.matrix() - h) / scale)


def _is_diagonal(mat: np.ndarray) -> bool:
    return not np.any(mat[~np.eye(mat.shape[0], dtype=bool)])


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Deterministic gauge: largest-modulus entry of each column real positive."""
    out = vectors.copy()
    idx = np.argmax(np.abs(out), axis=0)
    for j, i in enumerate(idx):
        pivot = out[i, j]
        mag = abs(pivot)
        if mag > 0.0:
            out[:, j] *= pivot.conjugate() / mag
    return out


def assemble_snapshot(family: HamiltonianFamily, t: float) -> EigenSystem:
    """Eigensystem of H(t), including t = +-inf through the endpoint data.

    Hermitian-similar members go through eigh of H0(t); with a perturbation
    attached the full H(t) is sent to the general eigensolver and the left
    system is obtained by inversion.
    """
    perturbed = family.v_at is not None and np.isfinite(t)
    h0 = family.h0(t)
    herm_defect = np.linalg.norm(h0 - h0.conj().T)
    if herm_defect > HERMITICITY_RTOL * max(np.linalg.norm(h0), 1.0):
        raise InvariantViolation(
            f"H0({t}) deviates from Hermitian by {herm_defect:.2e}"
        )
    T = family.t_factor(t)

    if not perturbed:
        if T is None and _is_diagonal(h0):
            # Fourier-diagonal families: sorting a diagonal is the whole job
            d = np.real(np.diag(h0))
            order = np.argsort(d, kind="stable")
            vecs = np.eye(h0.shape[0], dtype=complex)[:, order]
            return EigenSystem(d[order], vecs, vecs.conj().T, None, hermitian=True, t=t)
        lam, v0 = np.linalg.eigh(h0)
        if T is None:
            vecs = _fix_phases(v0)
            vinv = vecs.conj().T
            weight = None
        else:
            Tinv = np.linalg.inv(T)
            vecs = _fix_phases(T @ v0)
            # left system of H = T H0 T^{-1}: rows (T v0)^{-1} = v0^H T^{-1},
            # recomputed from the gauged columns for exact biorthogonality
            vinv = np.linalg.inv(vecs)
            weight = Tinv.conj().T @ Tinv
        return EigenSystem(lam, vecs, vinv, weight, hermitian=True, t=t)

    h_full = family.h(t)
    lam, vr = np.linalg.eig(h_full)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    vr = _fix_phases(vr[:, order])
    cond = np.linalg.cond(vr)
    if not np.isfinite(cond) or cond > 1e12:
        raise InvariantViolation(
            f"eigenvector matrix of perturbed H({t}) ill-conditioned (cond={cond:.2e})"
        )
    vinv = np.linalg.inv(vr)
    weight = family.weight(t)
    return EigenSystem(lam, vr, vinv, weight, hermitian=False, t=t)


def base_snapshot(family: HamiltonianFamily, t: float) -> EigenSystem:
    """Snapshot of H(t) with any perturbation stripped; comparison phases
    and the reference spectral data always live on the unperturbed part."""
    if family.v_at is None:
        return assemble_snapshot(family, t)
    stripped = HamiltonianFamily(
        dim=family.dim,
        h0_at=family.h0_at,
        t_at=family.t_at,
        h_plus=family.h_plus,
        h_minus=family.h_minus,
        delta=family.delta,
        dh_base_at=family.dh_base_at,
    )
    return assemble_snapshot(stripped, t)


def check_real_spectrum(es: EigenSystem, rtol: float = HERMITICITY_RTOL) -> float:
    """Max |Im eigenvalue|, raising when it exceeds rtol * spectral scale."""
    worst = float(np.max(np.abs(np.imag(es.eigenvalues)))) if es.dim else 0.0
    if worst > rtol * es.spectral_scale():
        raise InvariantViolation(f"non-real spectrum: max |Im lambda| = {worst:.2e}")
    return worst


def spectral_projection(es: EigenSystem, cut: SpectralCut, gap_tol: Optional[float] = None) -> np.ndarray:
    """Projection onto the eigenspaces selected by the cut.

    Eigenvalues are compared to the threshold exactly; a strictly-near miss
    (within gap_tol but not equal) is refused rather than silently resolved.
    """
    lam = np.real(es.eigenvalues)
    if gap_tol is None:
        gap_tol = GAP_RTOL * es.spectral_scale()
    near = np.abs(lam - cut.threshold) <= gap_tol
    exact = lam == cut.threshold
    offending = lam[near & ~exact]
    if offending.size:
        raise GapTooSmall(cut.threshold, float(offending[0]), gap_tol)
    mask = cut.selects(lam)
    return es.function_of(mask.astype(float))


def projection_rank(es: EigenSystem, cut: SpectralCut, gap_tol: Optional[float] = None) -> int:
    lam = np.real(es.eigenvalues)
    if gap_tol is None:
        gap_tol = GAP_RTOL * es.spectral_scale()
    near = np.abs(lam - cut.threshold) <= gap_tol
    exact = lam == cut.threshold
    offending = lam[near & ~exact]
    if offending.size:
        raise GapTooSmall(cut.threshold, float(offending[0]), gap_tol)
    return int(np.count_nonzero(cut.selects(lam)))


def apply_function(es: EigenSystem, f) -> np.ndarray:
    """f(H) by the spectral theorem; f acts on the eigenvalue vector."""
    lam = es.eigenvalues if not es.hermitian else np.real(es.eigenvalues)
    return es.function_of(np.asarray(f(lam), dtype=complex))


def reference_operator(es: EigenSystem) -> np.ndarray:
    """Lambda(t) = (1 + H(t)^2)^(1/2), the elliptic reference weight."""
    return apply_function(es, lambda x: np.sqrt(1.0 + x * x))


# -- decay verification ---------------------------------------------------


@dataclass
class DecayFitReport:
    """Tail fit of log ||H(t) - H(+-inf)|| against log <t>."""

    exponent_plus: float
    exponent_minus: float
    exact_plus: bool
    exact_minus: bool
    declared_delta: float
    slope_tol: float
    n_points_plus: int
    n_points_minus: int

    def _tail_ok(self, exponent, exact):
        if exact:
            return True
        return exponent <= -self.declared_delta + self.slope_tol

    @property
    def passed(self) -> bool:
        return self._tail_ok(self.exponent_plus, self.exact_plus) and self._tail_ok(
            self.exponent_minus, self.exact_minus
        )


def verify_decay_hypothesis(
    family: HamiltonianFamily,
    t_grid,
    slope_tol: float = 0.3,
    zero_floor: float = 1e-13,
) -> DecayFitReport:
    """Check ||H(t) - H(+-inf)|| <= C <t>^{-delta} by a log-log tail fit.

    Decay faster than declared passes (the hypothesis is an upper bound);
    slower decay fails.  Identically vanishing differences are reported as
    exact decay.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if not (np.any(t_grid > 0) and np.any(t_grid < 0)):
        raise ValueError("t_grid must contain samples on both tails")

    def fit_tail(ts, endpoint):
        scale = max(np.linalg.norm(endpoint), 1.0)
        pts = []
        for t in ts:
            d = np.linalg.norm(family.h_base(t) - endpoint, 2)
            if d > zero_floor * scale:
                pts.append((np.log(np.hypot(1.0, t)), np.log(d)))
        if len(pts) < 3:
            return 0.0, True, len(pts)
        x, y = np.array(pts).T
        slope = np.polyfit(x, y, 1)[0]
        return float(slope), False, len(pts)

    ep, exact_p, np_p = fit_tail(t_grid[t_grid > 0], family.h_plus)
    em, exact_m, np_m = fit_tail(t_grid[t_grid < 0], family.h_minus)
    return DecayFitReport(
        exponent_plus=ep,
        exponent_minus=em,
        exact_plus=exact_p,
        exact_minus=exact_m,
        declared_delta=family.delta,
        slope_tol=slope_tol,
        n_points_plus=np_p,
        n_points_minus=np_m,
    )
