"""Extremal mappings of finite distortion on the unit disk.

Mesh-based minimization of weighted mean-distortion energies, with
certificates: Ahlfors-Hopf holomorphy, lobe geometry of boundary
differences, Reich-Strebel inequalities, hair detection and automorphic
energy identities for Fuchsian groups.
"""

__version__ = "0.1.0"

from .boundary import BoundaryData, InfeasibleInputError, boundary_from_spec, poisson_extension
from .energy import (
    DistortionGauge,
    EnergyReport,
    WeightField,
    beltrami,
    classify_gauge,
    distortion,
    energy_f,
    energy_h,
    exponential_gauge,
    gauge_from_spec,
    power_gauge,
    weight_from_spec,
)
from .fuchsian import (
    FuchsianGroup,
    MobiusTransform,
    PoincareWeight,
    automorphic_phi_l1_growth,
    automorphy_error,
    octagon_group,
    poincare_weight,
    transfer_identity_check,
)
from .hairs import CollapseSpec, HairReport, collapse_map, detect_hairs, tip_measure
from .hopf import HopfField, TestFunction, hopf_field, inner_variation_residual, reich_strebel_check
from .lobes import BoundaryPair, LobeDecomposition, decompose_lobes, total_varg, winding_number
from .mesh import (
    DerivativeSample,
    OrientationError,
    PointLocationError,
    TriMesh,
    TriMeshMap,
    build_disk_mesh,
    dbar_residual,
    wirtinger,
)
from .solver import SolveOptions, SolveReport, harmonic_extension, minimize_energy, pseudo_inverse
from .experiments import ExperimentConfig, convergence_study, run_experiment
