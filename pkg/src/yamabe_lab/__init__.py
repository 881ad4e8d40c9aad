"""Numerical laboratory for constant-scalar-curvature metrics on
periodic grids: coordinate tensor calculus, the conformal split and the
normalized total scalar curvature functional, a CSC solver with a 1-D
cylinder reduction, and a convex-hull balance certificate for finite
metric ensembles.
"""

__version__ = "0.1.0"

from .charts import (FlatTorusModel, GridChart, ProductCylinder, RoundSphere,
                     sphere_volume)
from .fields import (DensityField, MetricField, ScalarField, TensorDensityField,
                     TensorField)
from .calculus import (christoffel, density_power, hessian, integrate,
                       laplacian, partial_derivative, ricci,
                       riemannian_volume, scalar_curvature, volume_density)
from .conformal import (ClassPath, ConformalSplit, apply_conformal_factor,
                        class_path, conformal_split, dQ_conformal_direction,
                        dQ_full, modulus_bound_rhs, pairing, path_velocity,
                        q_map, recombine, sphere_quotient_bound,
                        total_scalar_quotient, trace_free_project, trace_with)
from .solver import (SolverOptions, YamabeSolution, anderson_residual,
                     einstein_residual, minimize_in_class, multi_start)
from .cylinder import (BranchPoint, ScanResult, ShootingFailure,
                       bifurcation_scan, constant_branch, cylinder_csc_residual,
                       cylinder_shoot, first_bifurcation_length)
from .certificate import (CertificateResult, DualCheckReport, QEnsemble,
                          assemble, dual_sample_check, hull_feasibility,
                          min_norm_point, normalize_measure)
from .snapshot import read_field, write_field
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
