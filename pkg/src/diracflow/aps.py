"""Asymptotic data, solution operators and the index report.

Everything here lives on a fixed compactified time grid.  The propagators
between neighboring nodes are computed once and chained from t = 0, the
wave-operator limits come from the scattering module, and the Duhamel
integrals use the grid's own trapezoid weights.  Keeping one quadrature
for limits, integrals and pairings makes the round trips
data -> solution -> data exact up to the propagator tolerance, which is
what the solver contracts promise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circle import ApsRhs, CircleGeometry, aps_rhs_circle
from .errors import NotASolution
from .families import (
    INF,
    HamiltonianFamily,
    SpectralCut,
    assemble_snapshot,
    negative_cut,
    nonnegative_cut,
    nonpositive_cut,
    spectral_projection,
)
from .propagator import evolve
from .scattering import (
    BlockIndexResult,
    ScatteringData,
    block_index,
    compute_scattering,
    reference_endpoint_snapshot,
    scattering_blocks,
)
from .spectral_flow import ZERO_RTOL, spectral_flow

DEFAULT_WEIGHT_EPSILON = 0.05


def _sigma(t: float) -> float:
    return t / (1.0 + abs(t))


def _t_of_sigma(s: float) -> float:
    return s / (1.0 - abs(s))


@dataclass
class TimeGrid:
    """Quadrature nodes over [-t_max, t_max], denser near t = 0.

    Nodes are uniform in sigma = t/(1+|t|) and always include t = 0;
    weights are the trapezoid weights of the (nonuniform) t nodes, shared
    by every integral and pairing in this module.
    """

    t: np.ndarray
    weights: np.ndarray
    t_max: float
    weight_epsilon: float = DEFAULT_WEIGHT_EPSILON

    @classmethod
    def build(cls, t_max: float = 64.0, n_nodes: int = 257,
              weight_epsilon: float = DEFAULT_WEIGHT_EPSILON) -> "TimeGrid":
        if n_nodes % 2 == 0:
            n_nodes += 1
        smax = _sigma(t_max)
        s = np.linspace(-smax, smax, n_nodes)
        t = np.array([_t_of_sigma(x) for x in s])
        t[n_nodes // 2] = 0.0
        w = np.zeros(n_nodes)
        w[1:] += 0.5 * np.diff(t)
        w[:-1] += 0.5 * np.diff(t)
        return cls(t=t, weights=w, t_max=t_max, weight_epsilon=weight_epsilon)

    @property
    def n_nodes(self) -> int:
        return len(self.t)

    @property
    def center_index(self) -> int:
        return int(np.argmin(np.abs(self.t)))

    def y_weight(self) -> np.ndarray:
        """<t>^{-1-2 epsilon} factors of the decaying-norm square."""
        return np.hypot(1.0, self.t) ** (-1.0 - 2.0 * self.weight_epsilon)


@dataclass
class TimeGridFunction:
    grid: TimeGrid
    values: np.ndarray  # (n_nodes, dim) complex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != self.grid.n_nodes:
            raise ValueError("values must have one row per grid node")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "TimeGridFunction":
        return TimeGridFunction(self.grid, self.values.copy())


def zero_function(grid: TimeGrid, dim: int) -> TimeGridFunction:
    return TimeGridFunction(grid, np.zeros((grid.n_nodes, dim), dtype=complex))


def gaussian_bump(grid: TimeGrid, dim: int, center: float, width: float,
                  direction_vector: np.ndarray) -> TimeGridFunction:
    envelope = np.exp(-0.5 * ((grid.t - center) / width) ** 2)
    return TimeGridFunction(grid, envelope[:, None] * np.asarray(direction_vector)[None, :])


def random_function(grid: TimeGrid, dim: int, seed: int, width: float = 8.0) -> TimeGridFunction:
    """Decaying random probe supported mostly inside the grid window."""
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(grid.n_nodes, dim)) + 1j * rng.normal(size=(grid.n_nodes, dim))
    envelope = np.exp(-0.5 * (grid.t / width) ** 2)
    return TimeGridFunction(grid, envelope[:, None] * vals)


class GridDynamics:
    """Node-to-node propagators U(t_i, 0), their LU solves and the
    wave-operator limits, computed once per (family, grid, tol)."""

    def __init__(self, family: HamiltonianFamily, grid: TimeGrid,
                 tol: float = 1e-8, scattering_tol: Optional[float] = None,
                 scheme: str = "magnus4"):
        from scipy.linalg import lu_factor, lu_solve

        self.family = family
        self.grid = grid
        self.tol = tol
        self._lu_solve = lu_solve
        n = grid.n_nodes
        c = grid.center_index
        dim = family.dim
        eye = np.eye(dim, dtype=complex)
        u_from_zero = [None] * n
        increments = [None] * n  # increments[i]: U(t_i, t_{i-1}) for i > c, U(t_i, t_{i+1}) for i < c
        u_from_zero[c] = eye
        span = max(_sigma(grid.t[-1]) - _sigma(grid.t[0]), 1e-300)
        for i in range(c + 1, n):
            share = abs(_sigma(grid.t[i]) - _sigma(grid.t[i - 1])) / span
            inc = evolve(family, grid.t[i - 1], grid.t[i], tol * max(share, 1e-3), scheme=scheme).u
            increments[i] = inc
            u_from_zero[i] = inc @ u_from_zero[i - 1]
        for i in range(c - 1, -1, -1):
            share = abs(_sigma(grid.t[i]) - _sigma(grid.t[i + 1])) / span
            inc = evolve(family, grid.t[i + 1], grid.t[i], tol * max(share, 1e-3), scheme=scheme).u
            increments[i] = inc
            u_from_zero[i] = inc @ u_from_zero[i + 1]
        self.u_from_zero = u_from_zero
        self.increments = increments
        # forward one-step maps U(t_{i+1}, t_i), used by the residual check
        self.step_forward = [
            increments[i + 1] if i + 1 > c else np.linalg.inv(increments[i])
            for i in range(n - 1)
        ]
        self._lu = [lu_factor(u) for u in u_from_zero]
        s_tol = scattering_tol if scattering_tol is not None else tol
        self.scattering: ScatteringData = compute_scattering(family, tol=s_tol)
        self._weights_cache = {}

    # -- basic maps ------------------------------------------------------

    def apply_u(self, i: int, vec: np.ndarray) -> np.ndarray:
        return self.u_from_zero[i] @ vec

    def apply_u_inverse(self, i: int, vec: np.ndarray) -> np.ndarray:
        return self._lu_solve(self._lu[i], vec)

    def moller(self, direction: str) -> np.ndarray:
        return self.scattering.w_plus if direction == "+" else self.scattering.w_minus

    def pairing_weight(self, i: int) -> Optional[np.ndarray]:
        if self.family.t_at is None:
            return None
        if i not in self._weights_cache:
            self._weights_cache[i] = self.family.weight(self.grid.t[i])
        return self._weights_cache[i]

    def node_inner(self, i: int, u: np.ndarray, v: np.ndarray) -> complex:
        g = self.pairing_weight(i)
        if g is None:
            return complex(np.vdot(u, v))
        return complex(u.conj() @ g @ v)

    def pairing(self, f: TimeGridFunction, g: TimeGridFunction) -> complex:
        """Time-integrated fixed-time pairing with the grid weights."""
        acc = 0.0 + 0.0j
        for i, w in enumerate(self.grid.weights):
            acc += w * self.node_inner(i, f.values[i], g.values[i])
        return acc

    def weighted_norm(self, f: TimeGridFunction) -> float:
        yw = self.grid.y_weight()
        acc = 0.0
        for i, w in enumerate(self.grid.weights):
            acc += w * yw[i] * abs(self.node_inner(i, f.values[i], f.values[i]))
        return float(np.sqrt(acc))

    # -- Duhamel machinery -------------------------------------------------

    def _integrand_from_zero(self, f: TimeGridFunction) -> np.ndarray:
        """g_i = U(0, t_i) f(t_i)."""
        return np.stack([self.apply_u_inverse(i, f.values[i]) for i in range(self.grid.n_nodes)])

    def _cumulative_from_left(self, g: np.ndarray) -> np.ndarray:
        """L_i = int_{t_0}^{t_i} g dt by the trapezoid rule."""
        n = self.grid.n_nodes
        out = np.zeros_like(g)
        dt = np.diff(self.grid.t)
        for i in range(1, n):
            out[i] = out[i - 1] + 0.5 * dt[i - 1] * (g[i] + g[i - 1])
        return out

    def solve_from_data(self, v: Optional[np.ndarray], f: Optional[TimeGridFunction],
                        direction: str) -> TimeGridFunction:
        """Solution with prescribed asymptotic datum v at the given end and
        source f: u(t) = U(t,0) [ W(0, d inf) v + int_{d inf}^t U(0,r) f dr ]."""
        n = self.grid.n_nodes
        dim = self.family.dim
        core = np.zeros((n, dim), dtype=complex)
        if v is not None:
            core += (self.moller(direction) @ np.asarray(v, dtype=complex))[None, :]
        if f is not None:
            g = self._integrand_from_zero(f)
            left = self._cumulative_from_left(g)
            if direction == "+":
                core += left - left[-1]
            else:
                core += left - left[0]
        out = np.stack([self.apply_u(i, core[i]) for i in range(n)])
        return TimeGridFunction(self.grid, out)

    def evolution_residual(self, u: TimeGridFunction, f: Optional[TimeGridFunction]) -> float:
        """One-step integral-form residual of (d/dt - iH) u = f, relative to
        the size of u; exact solutions produced by solve_from_data sit at the
        propagator tolerance."""
        n = self.grid.n_nodes
        dt = np.diff(self.grid.t)
        scale = max(float(np.max(np.abs(u.values))), 1e-300)
        worst = 0.0
        for i in range(n - 1):
            inc = self.step_forward[i]
            pred = inc @ u.values[i]
            if f is not None:
                pred = pred + 0.5 * dt[i] * (inc @ f.values[i] + f.values[i + 1])
            worst = max(worst, float(np.linalg.norm(u.values[i + 1] - pred)) / scale)
        return worst

    def asymptotic_data(self, u: TimeGridFunction, f: Optional[TimeGridFunction],
                        direction: str, residual_tol: float = 1e-6) -> np.ndarray:
        """Datum lim e^{-itH(t)} u(t) at the requested end, extracted through
        the wave-operator limit; refuses inputs that do not solve the
        evolution equation on the grid."""
        res = self.evolution_residual(u, f)
        if res > residual_tol:
            raise NotASolution(
                f"grid function has evolution residual {res:.2e} > {residual_tol:.2e}"
            )
        c = self.grid.center_index
        core = u.values[c].copy()
        if f is not None:
            g = self._integrand_from_zero(f)
            left = self._cumulative_from_left(g)
            if direction == "+":
                core += left[-1] - left[c]
            else:
                core += left[0] - left[c]
        return np.linalg.solve(self.moller(direction), core)

    def retarded_advanced_inverse(self, f: TimeGridFunction, sign: str) -> TimeGridFunction:
        """sign '+': support to the future of the source (datum 0 at -inf);
        sign '-': support to the past (datum 0 at +inf)."""
        direction = "-" if sign == "+" else "+"
        return self.solve_from_data(None, f, direction)


# -- quadratic form of the corrected inverse --------------------------------


@dataclass
class QFormResult:
    lhs: float
    rhs: float
    lhs_imag: float
    relative_gap: float

    def as_dict(self) -> dict:
        return {
            "pairing_value": self.lhs,
            "projected_norm_sq": self.rhs,
            "pairing_imag": self.lhs_imag,
            "relative_gap": self.relative_gap,
        }


def q_parametrix_form(dyn: GridDynamics, f: TimeGridFunction) -> QFormResult:
    """(f | (Q - advanced inverse) f) against the boundary-term square.

    Q = (1 - rho_-^{-1} P_{[0,inf)}(H(-inf)) rho_-) o (advanced inverse);
    the pairing value must reproduce || P_{[0,inf)}(H_-) rho_- u ||^2 >= 0
    with u the advanced solution.
    """
    g = dyn.retarded_advanced_inverse(f, "-")
    rho_minus = dyn.asymptotic_data(g, f, "-", residual_tol=np.inf)
    es_minus = assemble_snapshot(dyn.family, -INF)
    p_plus = spectral_projection(es_minus, nonnegative_cut())
    h = p_plus @ rho_minus
    g_minus = dyn.family.weight(-INF)
    if g_minus is None:
        rhs = float(np.real(np.vdot(h, h)))
    else:
        rhs = float(np.real(h.conj() @ g_minus @ h))
    w = dyn.solve_from_data(h, None, "-")
    val = -dyn.pairing(f, w)
    lhs = float(np.real(val))
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)
    return QFormResult(lhs=lhs, rhs=rhs, lhs_imag=float(np.imag(val)), relative_gap=gap)


# -- one-sided spectral support diagnostic ----------------------------------


@dataclass
class SupportDefectReport:
    t_samples: np.ndarray
    defect: np.ndarray
    weighted_defect: np.ndarray
    eps0: float
    max_defect: float
    input_norm: float


def one_sided_support_defect(
    dyn: GridDynamics,
    v: np.ndarray,
    eps0: Optional[float] = None,
    n_samples: int = 33,
) -> SupportDefectReport:
    """Positive-spectrum content along the solution grown from strictly
    negative future data; the continuum smoothing statement makes this decay
    under truncation refinement, which is measured, not assumed."""
    family = dyn.family
    es_plus = assemble_snapshot(family, INF)
    lam = np.real(es_plus.eigenvalues)
    nonzero = np.abs(lam) > ZERO_RTOL * max(1.0, np.max(np.abs(lam)))
    if eps0 is None:
        eps0 = 0.5 * float(np.min(np.abs(lam[nonzero]))) if np.any(nonzero) else 0.5
    p_neg = spectral_projection(es_plus, negative_cut())
    vv = np.asarray(v, dtype=complex)
    if np.linalg.norm(p_neg @ vv - vv) > 1e-8 * max(np.linalg.norm(vv), 1e-300):
        raise ValueError("datum v must lie in the strictly negative eigenspace at +inf")
    u = dyn.solve_from_data(vv, None, "+")
    idx = np.unique(np.linspace(0, dyn.grid.n_nodes - 1, n_samples).astype(int))
    ts, defects = [], []
    cut = SpectralCut(eps0, "above", True)
    for i in idx:
        es_t = assemble_snapshot(family, dyn.grid.t[i])
        p_hi = spectral_projection(es_t, cut, gap_tol=0.0)
        ts.append(dyn.grid.t[i])
        defects.append(float(np.linalg.norm(p_hi @ u.values[i])))
    defect = np.asarray(defects)
    weighted = defect * np.hypot(1.0, eps0)
    return SupportDefectReport(
        t_samples=np.asarray(ts),
        defect=defect,
        weighted_defect=weighted,
        eps0=eps0,
        max_defect=float(np.max(defect)),
        input_norm=float(np.linalg.norm(vv)),
    )


# -- the index report --------------------------------------------------------


@dataclass
class IndexReport:
    index_block: int
    sf: int
    ker_plus: int
    ker_minus: int
    eta_plus: Optional[float]
    eta_minus: Optional[float]
    rhs: Optional[float]
    agreement: bool
    caveats: list
    block: BlockIndexResult = field(repr=False, default=None)
    convention: str = "aps"

    def as_dict(self) -> dict:
        return {
            "index_block": self.index_block,
            "sf": self.sf,
            "ker_plus": self.ker_plus,
            "ker_minus": self.ker_minus,
            "eta_plus": self.eta_plus,
            "eta_minus": self.eta_minus,
            "rhs": self.rhs,
            "agreement": self.agreement,
            "caveats": list(self.caveats),
            "convention": self.convention,
            "block": self.block.as_dict() if self.block is not None else None,
        }


def endpoint_kernel_dim(family: HamiltonianFamily, t: float) -> int:
    es = reference_endpoint_snapshot(family, t)
    lam = np.real(es.eigenvalues)
    scale = max(float(np.max(np.abs(lam))), 1.0)
    return int(np.count_nonzero(np.abs(lam) <= ZERO_RTOL * scale))


def aps_index(
    family: HamiltonianFamily,
    rank_tol: float = 1e-8,
    tol: float = 1e-8,
    convention: str = "aps",
    geometry: Optional[CircleGeometry] = None,
    grid_density: int = 129,
    sd: Optional[ScatteringData] = None,
) -> IndexReport:
    """Index of the boundary-value problem through its scattering block,
    cross-filled with the spectral flow and, when the circle geometry is
    attached, with the boundary-data formula.

    convention 'aps' compresses onto (-inf, 0] at +inf and (-inf, 0) at
    -inf, matching the boundary conditions of the evolution problem;
    convention 'strict' uses strictly negative windows on both sides and
    reproduces the bare flow identity.
    """
    if convention not in ("aps", "strict"):
        raise ValueError(f"unknown convention {convention!r}")
    if sd is None:
        sd = compute_scattering(family, tol=tol)
    es_plus = reference_endpoint_snapshot(family, INF)
    es_minus = reference_endpoint_snapshot(family, -INF)
    cut_out = nonpositive_cut() if convention == "aps" else negative_cut()
    cut_in = negative_cut()
    blocks = scattering_blocks(sd, es_plus, es_minus, cut_out, cut_in)
    block = block_index(blocks.mm, rank_tol=rank_tol)

    flow = spectral_flow(family, grid_density=grid_density)
    ker_plus = endpoint_kernel_dim(family, INF)
    ker_minus = endpoint_kernel_dim(family, -INF)

    caveats = []
    if block.low_confidence:
        caveats.append("gray-zone singular values in the scattering block")
    eta_plus = eta_minus = rhs_value = None
    rhs_obj: Optional[ApsRhs] = None
    if geometry is not None:
        rhs_obj = aps_rhs_circle(geometry)
        eta_plus, eta_minus = rhs_obj.eta_plus, rhs_obj.eta_minus
        caveats.extend(rhs_obj.caveats)
        if not rhs_obj.caveats:
            rhs_value = rhs_obj.rhs_value

    if convention == "aps":
        expected = flow.value - ker_plus
    else:
        expected = flow.value
    agreement = block.index == expected
    if rhs_value is not None and convention == "aps":
        agreement = agreement and int(round(rhs_value)) == block.index
    return IndexReport(
        index_block=block.index,
        sf=flow.value,
        ker_plus=ker_plus,
        ker_minus=ker_minus,
        eta_plus=eta_plus,
        eta_minus=eta_minus,
        rhs=rhs_obj.rhs_value if rhs_obj is not None else None,
        agreement=agreement,
        caveats=caveats,
        block=block,
        convention=convention,
    )
