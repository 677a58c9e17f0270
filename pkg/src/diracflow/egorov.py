"""Defect of conjugating a smoothed spectral step through the evolution.

E(t) = U(t,0) chi(H(0)) U(0,t) - chi(H(t)) measures how far the propagator
is from intertwining the spectral splittings at different times.  The
continuum statement makes E(t) one order smoother than the step; at finite
truncation that is probed as boundedness of || E(t) Lambda(t) || uniformly
in t together with a controlled growth ratio under doubling of the mode
cutoff, plus second-order weighted proxies at the largest horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .families import HamiltonianFamily, apply_function, assemble_snapshot, reference_operator
from .propagator import evolve


@dataclass(frozen=True)
class SmoothStep:
    """chi(x) = (1 + tanh(x/width))/2: a softened version of 1_{[0,inf)}."""

    width: float = 0.5

    def __call__(self, x):
        return 0.5 * (1.0 + np.tanh(np.asarray(x, dtype=float) / self.width))


def heisenberg_defect(
    family: HamiltonianFamily,
    chi: Callable,
    t: float,
    tol: float = 1e-9,
    scheme: str = "magnus4",
) -> np.ndarray:
    """E(t) assembled from the propagator and the spectral calculus."""
    u = evolve(family, 0.0, t, tol=tol, scheme=scheme).u
    chi_0 = apply_function(assemble_snapshot(family, 0.0), chi)
    chi_t = apply_function(assemble_snapshot(family, t), chi)
    return u @ chi_0 @ np.linalg.inv(u) - chi_t


@dataclass
class DefectReport:
    chi_width: float
    t_samples: np.ndarray
    n_values: list
    raw_norms: dict
    weighted_norms: dict
    smoothing_proxies: dict
    growth_ratios: dict
    growth_cap: float
    uniform_bounds: dict

    @property
    def passed(self) -> bool:
        finite = all(np.all(np.isfinite(v)) for v in self.weighted_norms.values())
        return finite and all(r < self.growth_cap for r in self.growth_ratios.values())

    def csv_rows(self):
        for n in self.n_values:
            for i, t in enumerate(self.t_samples):
                yield (
                    n,
                    float(t),
                    float(self.raw_norms[n][i]),
                    float(self.weighted_norms[n][i]),
                    float(self.smoothing_proxies[n][1]),
                    float(self.smoothing_proxies[n][2]),
                )


def defect_study(
    family_builder: Callable[[int], HamiltonianFamily],
    chi: Callable,
    t_samples: Sequence[float],
    n_ladder: Sequence[int],
    tol: float = 1e-9,
    growth_cap: float = 1.5,
) -> DefectReport:
    """Defect norms across a truncation ladder built from one geometry.

    growth_ratios[n] compares sup_t ||E Lambda|| at n against the previous
    rung; values below growth_cap are the finite-truncation reading of the
    one-order-smoothing claim.
    """
    t_samples = np.asarray(sorted(t_samples), dtype=float)
    n_ladder = sorted(n_ladder)
    raw, weighted, proxies = {}, {}, {}
    for n in n_ladder:
        family = family_builder(n)
        raws, weights = [], []
        for t in t_samples:
            u = evolve(family, 0.0, t, tol=tol, scheme="magnus4").u
            u_inv = np.linalg.inv(u)
            es_t = assemble_snapshot(family, t)
            chi_0 = apply_function(assemble_snapshot(family, 0.0), chi)
            chi_t = apply_function(es_t, chi)
            defect = u @ chi_0 @ u_inv - chi_t
            raws.append(float(np.linalg.norm(defect, 2)))
            weights.append(float(np.linalg.norm(defect @ reference_operator(es_t), 2)))
        raw[n] = np.asarray(raws)
        weighted[n] = np.asarray(weights)

        t_far = float(t_samples[np.argmax(np.abs(t_samples))])
        u = evolve(family, 0.0, t_far, tol=tol, scheme="magnus4").u
        u_inv = np.linalg.inv(u)
        es_far = assemble_snapshot(family, t_far)
        chi_0 = apply_function(assemble_snapshot(family, 0.0), chi)
        defect_far = u @ chi_0 @ u_inv - apply_function(es_far, chi)
        pulled_back = u_inv @ defect_far @ u
        lam0 = reference_operator(assemble_snapshot(family, 0.0))
        proxies[n] = {
            k: float(np.linalg.norm(
                np.linalg.matrix_power(lam0, k) @ pulled_back @ np.linalg.matrix_power(lam0, k), 2))
            for k in (1, 2)
        }

    ratios = {}
    for prev, cur in zip(n_ladder[:-1], n_ladder[1:]):
        sup_prev = float(np.max(weighted[prev]))
        sup_cur = float(np.max(weighted[cur]))
        ratios[cur] = sup_cur / max(sup_prev, 1e-300)
    return DefectReport(
        chi_width=getattr(chi, "width", float("nan")),
        t_samples=t_samples,
        n_values=list(n_ladder),
        raw_norms=raw,
        weighted_norms=weighted,
        smoothing_proxies=proxies,
        growth_ratios=ratios,
        growth_cap=growth_cap,
        uniform_bounds={n: float(np.max(weighted[n])) for n in n_ladder},
    )
