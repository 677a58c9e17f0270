"""Numerical index theory for time-dependent Dirac-type Hamiltonian families.

The package builds finite spectral truncations of evolving Hamiltonians on
circle spacetimes, computes their propagators, wave operators, spectral
flow and eta data, and verifies that the index of the scattering block,
the spectral flow count and the boundary spectral-asymmetry formula all
produce the same integer.
"""

from .circle import (
    ApsRhs,
    CircleGeometry,
    aps_rhs_circle,
    build_circle_family,
    closed_form_spectrum,
    eta_invariant,
    metric_step_geometry,
    twisted_geometry,
)
from .families import (
    EigenSystem,
    HamiltonianFamily,
    SpectralCut,
    apply_function,
    assemble_snapshot,
    constant_family,
    negative_cut,
    nonnegative_cut,
    nonpositive_cut,
    positive_cut,
    spectral_projection,
    verify_decay_hypothesis,
)
from .propagator import Propagator, check_l2t_isometry, evolve, phase
from .scattering import (
    BlockIndexResult,
    ScatteringData,
    block_index,
    compactness_profile,
    compute_scattering,
    moller_limit,
    scattering_blocks,
)
from .spectral_flow import (
    EigenvalueTracks,
    FlowPartition,
    build_tracks,
    make_flow_partition,
    spectral_flow,
)
from .aps import (
    GridDynamics,
    IndexReport,
    TimeGrid,
    TimeGridFunction,
    aps_index,
    one_sided_support_defect,
    q_parametrix_form,
)
from .egorov import DefectReport, SmoothStep, defect_study, heisenberg_defect
from .fredholm import (
    AbstractInstance,
    random_instance,
    scattering_from_instance,
    sweep_random_instances,
    verify_equal_index,
    verify_q_formula,
)

__version__ = "0.1.0"
