"""Brute-force finite-dimensional checks of the abstract index identities.

An instance consists of a surjective map P: X -> Y, boundary-data maps
rho_+-: X -> H_+- with rho_+- (+) P invertible, and complementary
projection pairs on H_+-.  The scattering map W = rho_+ o (rho_-|_ker P)^{-1}
then has a corner W^{--} whose index must equal the index of P restricted
to ker(pi_-^+ rho_-  (+)  pi_+^- rho_+), exactly, as integers.  The
parametrix formula Q = (1 - rho_-^{-1} pi_-^+ rho_-) P_-^{-1} is verified to
be a right inverse of P whose boundary defect is controlled by the W^{-+}
corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import DiracflowError

RANK_TOL = 1e-10
COND_CAP = 1e8


@dataclass
class AbstractInstance:
    p: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    pi_plus_pos: np.ndarray
    pi_plus_neg: np.ndarray
    pi_minus_pos: np.ndarray
    pi_minus_neg: np.ndarray
    seed: Optional[int] = None
    condition_numbers: dict = field(default_factory=dict)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.p.shape[1], self.rho_plus.shape[0], self.p.shape[0])

    def validate(self, tol: float = 1e-9) -> None:
        x, h, y = self.dims
        if x != h + y:
            raise DiracflowError(f"dimension mismatch: {x} != {h} + {y}")
        for name, pair in (("plus", (self.pi_plus_pos, self.pi_plus_neg)),
                           ("minus", (self.pi_minus_pos, self.pi_minus_neg))):
            pp, pn = pair
            if np.linalg.norm(pp @ pp - pp) > tol or np.linalg.norm(pn @ pn - pn) > tol:
                raise DiracflowError(f"pi_{name} pair not idempotent")
            if np.linalg.norm(pp + pn - np.eye(h)) > tol:
                raise DiracflowError(f"pi_{name} pair not complementary")
        for name, rho in (("plus", self.rho_plus), ("minus", self.rho_minus)):
            stacked = np.vstack([rho, self.p])
            cond = np.linalg.cond(stacked)
            self.condition_numbers[name] = float(cond)
            if not np.isfinite(cond) or cond > COND_CAP:
                raise DiracflowError(
                    f"rho_{name} (+) p has condition number {cond:.2e} > {COND_CAP:.0e}"
                )


def _random_projection_pair(rng, dim: int, rank: int, cond_cap: float = 100.0):
    for _ in range(64):
        s = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        if np.linalg.cond(s) <= cond_cap:
            break
    else:
        raise DiracflowError("could not draw a well-conditioned projector frame")
    mask = np.zeros(dim)
    mask[:rank] = 1.0
    pp = (s * mask) @ np.linalg.inv(s)
    return pp, np.eye(dim) - pp


def random_instance(dims: Tuple[int, int, int], seed: int,
                    max_resample: int = 50) -> AbstractInstance:
    """Gaussian instance at dims = (dim X, dim H+-, dim Y), resampled until
    the stacked maps are well conditioned; deterministic in the seed.

    The two projector ranks are drawn independently, so generic instances
    realize index (h - rank pi_-^+) - rank pi_+^- over a range of values,
    zero included.
    """
    x, h, y = dims
    if x != h + y:
        raise DiracflowError(f"need dim X = dim H + dim Y, got {x} != {h}+{y}")
    rng = np.random.default_rng(seed)
    rank_minus_pos = int(rng.integers(1, h))
    rank_plus_neg = int(rng.integers(1, h))
    for _ in range(max_resample):
        pi_mp, pi_mn = _random_projection_pair(rng, h, rank_minus_pos)
        pi_pn, pi_pp = _random_projection_pair(rng, h, rank_plus_neg)
        inst = AbstractInstance(
            p=rng.normal(size=(y, x)) + 1j * rng.normal(size=(y, x)),
            rho_plus=rng.normal(size=(h, x)) + 1j * rng.normal(size=(h, x)),
            rho_minus=rng.normal(size=(h, x)) + 1j * rng.normal(size=(h, x)),
            pi_plus_pos=pi_pp,
            pi_plus_neg=pi_pn,
            pi_minus_pos=pi_mp,
            pi_minus_neg=pi_mn,
            seed=seed,
        )
        try:
            inst.validate()
            return inst
        except DiracflowError:
            continue
    raise DiracflowError(f"resample budget exhausted for dims {dims} seed {seed}")


def _null_space(mat: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    u, s, vh = np.linalg.svd(mat)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rank_tol * smax)) if smax > 0 else 0
    return vh[rank:].conj().T


def _range_basis(mat: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    u, s, vh = np.linalg.svd(mat)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rank_tol * smax)) if smax > 0 else 0
    return u[:, :rank]


def _numeric_rank(mat: np.ndarray, rank_tol: float = RANK_TOL, scale: Optional[float] = None):
    """Rank against rank_tol * max(sigma_max, scale); the scale argument
    keeps pure-noise matrices (e.g. an exactly vanishing corner computed in
    floating point) from being read as full rank."""
    if min(mat.shape) == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(mat, compute_uv=False)
    ref = max(s[0], scale if scale is not None else 0.0)
    if ref == 0.0:
        return 0, s
    rank = int(np.count_nonzero(s > rank_tol * ref))
    gray = s[(s >= 0.1 * rank_tol * ref) & (s <= 10.0 * rank_tol * ref)]
    return rank, gray


@dataclass
class InstanceScattering:
    w: np.ndarray
    ker_p_basis: np.ndarray
    blocks: dict

    def block(self, out_sign: str, in_sign: str) -> np.ndarray:
        return self.blocks[out_sign + in_sign]


def scattering_from_instance(inst: AbstractInstance) -> InstanceScattering:
    """W = rho_+ o (rho_-|_{ker P})^{-1} with corners cut by the pi pairs."""
    k = _null_space(inst.p)
    h = inst.dims[1]
    if k.shape[1] != h:
        raise DiracflowError(
            f"ker P has dimension {k.shape[1]}, expected {h}; instance degenerate"
        )
    rho_minus_k = inst.rho_minus @ k
    w = inst.rho_plus @ k @ np.linalg.inv(rho_minus_k)
    bases = {
        "+out": _range_basis(inst.pi_plus_pos),
        "-out": _range_basis(inst.pi_plus_neg),
        "+in": _range_basis(inst.pi_minus_pos),
        "-in": _range_basis(inst.pi_minus_neg),
    }
    blocks = {}
    for o in "+-":
        pi_out = inst.pi_plus_pos if o == "+" else inst.pi_plus_neg
        for i in "+-":
            blocks[o + i] = bases[o + "out"].conj().T @ (pi_out @ w) @ bases[i + "in"]
    return InstanceScattering(w=w, ker_p_basis=k, blocks=blocks)


@dataclass
class EqualIndexReport:
    index_w_mm: int
    index_p_ker_rho: int
    equal: bool
    factorization_residual: float
    gray_zone: list
    resample_flag: bool

    def as_dict(self) -> dict:
        return {
            "index_w_mm": self.index_w_mm,
            "index_p_ker_rho": self.index_p_ker_rho,
            "equal": self.equal,
            "factorization_residual": self.factorization_residual,
            "gray_zone": [float(g) for g in self.gray_zone],
            "resample_flag": self.resample_flag,
        }


def restriction_factorization_residual(k_map: np.ndarray, l_map: np.ndarray,
                                       rank_tol: float = RANK_TOL) -> float:
    """Residual of the three-factor splitting of L (+) K along X = K_c (+) ker L.

    [[L, 0], [K|_{K_c}, K|_{ker L}]] must equal
    [[1,0],[K L^{-1},1]] [[1,0],[0,K|_{ker L}]] [[L|_{K_c},0],[0,1]]
    with L^{-1} the inverse of L restricted to the complement of its kernel.
    """
    ker = _null_space(l_map, rank_tol)
    comp = _null_space(ker.conj().T, rank_tol)  # orthogonal complement of ker L
    f_dim = l_map.shape[0]
    e_dim = k_map.shape[0]
    n_c = comp.shape[1]
    n_k = ker.shape[1]
    l_c = l_map @ comp      # F x n_c, invertible square when L surjective
    k_c = k_map @ comp
    k_k = k_map @ ker
    top = np.hstack([l_c, np.zeros((f_dim, n_k))])
    bottom = np.hstack([k_c, k_k])
    lhs = np.vstack([top, bottom])

    l_inv = np.linalg.inv(l_c)
    f1 = np.block([
        [np.eye(f_dim), np.zeros((f_dim, e_dim))],
        [k_c @ l_inv, np.eye(e_dim)],
    ])
    f2 = np.block([
        [np.eye(f_dim), np.zeros((f_dim, n_k))],
        [np.zeros((e_dim, f_dim)), k_k],
    ])
    f3 = np.block([
        [l_c, np.zeros((f_dim, n_k))],
        [np.zeros((n_k, n_c)), np.eye(n_k)],
    ])
    return float(np.linalg.norm(f1 @ f2 @ f3 - lhs))


def verify_equal_index(inst: AbstractInstance, rank_tol: float = RANK_TOL) -> EqualIndexReport:
    """ind(W^{--}) against ind(P|_{ker rho}), as exact integers."""
    sc = scattering_from_instance(inst)
    mm = sc.block("-", "-")
    rank_mm, gray_mm = _numeric_rank(mm, rank_tol)
    idx_w = (mm.shape[1] - rank_mm) - (mm.shape[0] - rank_mm)

    rho = np.vstack([inst.pi_minus_pos @ inst.rho_minus, inst.pi_plus_neg @ inst.rho_plus])
    ker_rho = _null_space(rho, rank_tol)
    p_restricted = inst.p @ ker_rho
    rank_p, gray_p = _numeric_rank(p_restricted, rank_tol)
    idx_p = (p_restricted.shape[1] - rank_p) - (inst.p.shape[0] - rank_p)

    fact_res = restriction_factorization_residual(rho, inst.p, rank_tol)
    gray = list(gray_mm) + list(gray_p)
    return EqualIndexReport(
        index_w_mm=int(idx_w),
        index_p_ker_rho=int(idx_p),
        equal=idx_w == idx_p,
        factorization_residual=fact_res,
        gray_zone=gray,
        resample_flag=bool(gray),
    )


@dataclass
class QFormulaReport:
    right_inverse_residual: float
    rho_q_rank: int
    w_mp_rank: int
    rank_bound_holds: bool
    fredholm_diff_rank: int
    fredholm_rank_bound: int
    sign_pairing_value: float
    sign_identity_gap: float

    def as_dict(self) -> dict:
        return {
            "right_inverse_residual": self.right_inverse_residual,
            "rho_q_rank": self.rho_q_rank,
            "w_mp_rank": self.w_mp_rank,
            "rank_bound_holds": self.rank_bound_holds,
            "fredholm_diff_rank": self.fredholm_diff_rank,
            "fredholm_rank_bound": self.fredholm_rank_bound,
            "sign_pairing_value": self.sign_pairing_value,
            "sign_identity_gap": self.sign_identity_gap,
        }


def verify_q_formula(inst: AbstractInstance, rank_tol: float = RANK_TOL,
                     probe_seed: int = 0) -> QFormulaReport:
    """Parametrix Q = (1 - rho_-^{-1} pi_-^+ rho_-) P_-^{-1}.

    Checks: P Q = 1 on Y; the boundary defect rho o Q has rank at most
    rank(W^{-+}); the distance of Q to a Fredholm inverse of P|_{ker rho}
    is a finite-rank correction bounded by the same corner; and the finite
    model of the boundary pairing (f | (Q - P_-^{-1}) f) reproduces
    -||pi_-^+ rho_- Pi_{ker P} P_-^{-1} f||^2 <= 0 when rho_- restricted to
    ker P is arranged to be isometric.
    """
    x, h, y = inst.dims
    rank_p, _ = _numeric_rank(inst.p, rank_tol)
    if rank_p != y:
        raise DiracflowError("P is not surjective; the parametrix formula needs Ran P = Y")
    sc = scattering_from_instance(inst)
    k = sc.ker_p_basis
    rho_minus_k = inst.rho_minus @ k
    rho_minus_inv = k @ np.linalg.inv(rho_minus_k)     # H_- -> ker P

    stacked = np.vstack([inst.rho_plus, inst.p])        # X x X, invertible
    p_minus_inv = np.linalg.solve(stacked, np.vstack([np.zeros((h, y)), np.eye(y)]))
    q = (np.eye(x) - rho_minus_inv @ inst.pi_minus_pos @ inst.rho_minus) @ p_minus_inv

    right_res = float(np.linalg.norm(inst.p @ q - np.eye(y)))

    rho = np.vstack([inst.pi_minus_pos @ inst.rho_minus, inst.pi_plus_neg @ inst.rho_plus])
    ambient = _scale(inst)
    rho_q_rank, _ = _numeric_rank(rho @ q, rank_tol, scale=ambient * np.linalg.norm(q))
    w_mp = sc.block("-", "+")
    w_mp_rank, _ = _numeric_rank(w_mp, rank_tol, scale=np.linalg.norm(sc.w))

    ker_rho = _null_space(rho, rank_tol)
    p_ker = inst.p @ ker_rho
    fredholm_inv = ker_rho @ np.linalg.pinv(p_ker)
    diff_rank, _ = _numeric_rank(
        q - fredholm_inv, rank_tol,
        scale=max(np.linalg.norm(q), np.linalg.norm(fredholm_inv)),
    )
    ker_joint = _null_space(np.vstack([rho, inst.p]), rank_tol)
    rank_p_ker, _ = _numeric_rank(p_ker, rank_tol)
    nk = p_ker.shape[1] - rank_p_ker
    nc = y - rank_p_ker
    # correction rank from the parametrix algebra, plus the slack between
    # an arbitrary Fredholm inverse and the canonical one
    bound = w_mp_rank + ker_joint.shape[1] + 2 * (nk + nc)

    # finite model of the sign identity: make rho_-|_{ker P} isometric so the
    # pairing collapses to a negative square
    rng = np.random.default_rng(probe_seed)
    q_frame, _ = np.linalg.qr(rng.normal(size=(h, h)) + 1j * rng.normal(size=(h, h)))
    rho_iso = q_frame @ k.conj().T
    pi_orth = _range_basis(inst.pi_minus_pos) @ _range_basis(inst.pi_minus_pos).conj().T
    rho_iso_inv = k @ q_frame.conj().T
    f = rng.normal(size=y) + 1j * rng.normal(size=y)
    u_vec = p_minus_inv @ f
    corr = -rho_iso_inv @ pi_orth @ rho_iso @ u_vec
    pairing = float(np.real(np.vdot(u_vec, corr)))
    proj_norm_sq = float(np.linalg.norm(pi_orth @ rho_iso @ (k @ k.conj().T) @ u_vec) ** 2)
    gap = abs(pairing + proj_norm_sq)

    return QFormulaReport(
        right_inverse_residual=right_res,
        rho_q_rank=rho_q_rank,
        w_mp_rank=w_mp_rank,
        rank_bound_holds=rho_q_rank <= w_mp_rank,
        fredholm_diff_rank=diff_rank,
        fredholm_rank_bound=bound,
        sign_pairing_value=pairing,
        sign_identity_gap=gap,
    )


def instance_with_scattering(dims: Tuple[int, int, int], w: np.ndarray, seed: int,
                             orthogonal_pis: bool = True,
                             rank_pos: Optional[int] = None) -> AbstractInstance:
    """Instance engineered to have the prescribed scattering matrix.

    With rho_- fixed on ker P and rho_+ = W rho_- + Z P, the constructed
    pair reproduces W exactly, letting tests prescribe corner structure
    (e.g. a vanishing W^{-+}).
    """
    x, h, y = dims
    if x != h + y:
        raise DiracflowError(f"need dim X = dim H + dim Y, got {x} != {h}+{y}")
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(y, x)) + 1j * rng.normal(size=(y, x))
    rho_minus = rng.normal(size=(h, x)) + 1j * rng.normal(size=(h, x))
    z = rng.normal(size=(h, y)) + 1j * rng.normal(size=(h, y))
    rho_plus = np.asarray(w, dtype=complex) @ rho_minus + z @ p
    if rank_pos is None:
        rank_pos = max(1, h // 2)
    if orthogonal_pis:
        mask = np.zeros(h)
        mask[:rank_pos] = 1.0
        pi_pos = np.diag(mask).astype(complex)
        pairs = (pi_pos, np.eye(h) - pi_pos, pi_pos.copy(), np.eye(h) - pi_pos)
    else:
        pairs = _random_projection_pair(rng, h, rank_pos) + _random_projection_pair(rng, h, rank_pos)
    inst = AbstractInstance(
        p=p, rho_plus=rho_plus, rho_minus=rho_minus,
        pi_plus_pos=pairs[0], pi_plus_neg=pairs[1],
        pi_minus_pos=pairs[2], pi_minus_neg=pairs[3],
        seed=seed,
    )
    inst.validate()
    return inst


@dataclass
class SweepSummary:
    n_instances: int
    failures: list
    max_factorization_residual: float
    max_right_inverse_residual: float

    def as_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "failures": list(self.failures),
            "max_factorization_residual": self.max_factorization_residual,
            "max_right_inverse_residual": self.max_right_inverse_residual,
        }


def sweep_random_instances(dims: Tuple[int, int, int], n_instances: int,
                           seed0: int = 0, rank_tol: float = RANK_TOL) -> SweepSummary:
    """Equal-index + parametrix checks over a seed range; failures by seed."""
    failures = []
    max_fact = 0.0
    max_right = 0.0
    for seed in range(seed0, seed0 + n_instances):
        inst = random_instance(dims, seed)
        rep = verify_equal_index(inst, rank_tol)
        qrep = verify_q_formula(inst, rank_tol)
        max_fact = max(max_fact, rep.factorization_residual)
        max_right = max(max_right, qrep.right_inverse_residual)
        ok = (rep.equal and rep.factorization_residual <= 1e-12 * _scale(inst)
              and qrep.right_inverse_residual <= 1e-10 * _scale(inst)
              and qrep.rank_bound_holds)
        if not ok:
            failures.append(seed)
    return SweepSummary(
        n_instances=n_instances,
        failures=failures,
        max_factorization_residual=max_fact,
        max_right_inverse_residual=max_right,
    )


def _scale(inst: AbstractInstance) -> float:
    return float(max(np.linalg.norm(inst.p), np.linalg.norm(inst.rho_plus),
                     np.linalg.norm(inst.rho_minus), 1.0))
