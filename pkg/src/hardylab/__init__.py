"""Numerical laboratory for heat semigroups, Hardy-space atoms, and
spectral multipliers on finite metric-measure spaces."""

__version__ = "0.1.0"

from .space import (Space, DoublingProfile, build_space, space_from_edges,
                    load_space, ball, volume, doubling_profile,
                    check_lower_volume, rescale_metric)
from .spectral import (Operator, SpectralDecomposition, FittedBound,
                       make_operator, spectral_decomposition, apply_function,
                       kernel_of_function, kernel_apply, heat_kernel,
                       check_gaussian_bounds, check_davies_gaffney,
                       weighted_kernel_norm)
from .hardy import (ConeQuadrature, Atom, Molecule, ValidationReport,
                    default_quadrature, square_function, h1_norm, make_atom,
                    validate_atom, validate_molecule, truncation_error_bound)
from .multiplier import (Multiplier, SobolevGrid, Partition, multiplier_from_spec,
                         sobolev_norm, hormander_constant, make_partition,
                         phi_kernel, verify_prop1, theta_kernel, verify_lemma3,
                         theorem1_experiment, theorem2_experiment)
from .wave import (EvenSpectralFunction, SpeedReport, cosine_propagator,
                   propagation_speed, even_transform_apply, verify_lemma_dd1)
from .models import (cycle_laplacian, path_laplacian, schrodinger_1d,
                     weighted_graph, build_model)
