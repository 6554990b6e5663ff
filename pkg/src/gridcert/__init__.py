"""Inner approximations of power-flow solvability regions.

Certify whole sets of injection vectors as solvable via a Brouwer
fixed-point certificate around a solved base point, then exploit the
certificates for fast injection screening, a solvability index, certified
loading gains and boundary traces.
"""

from .boundary import (BoundaryTrace, CoalescenceScan, Plane, ScalingResult,
                       TwoBusCase, coalescence_scan, homogeneous_direction,
                       homogeneous_plane, runtime_scaling, single_bus_plane,
                       trace_boundary_2d, twobus_certified, twobus_real)
from .cert import (BasePoint, CertificateReport, GainReport, base_point,
                   certificate_terms, certified_admissible_gain,
                   certified_gain_direction, certify, certify_r,
                   envelope_violations, eta, minimal_certified_radius, zeta)
from .feeders import (load_bundled, synthetic_radial_case, two_bus_case)
from .linalg import (JStarBlocks, SingularMatrixError, assemble_jstar,
                     inf_norm_mat, inf_norm_vec, invert_dense)
from .netmodel import (CaseError, NetworkModel, ParseError, RawCase,
                       build_network, load_case, parse_matpower,
                       raw_case_from_json, raw_case_to_json, to_matpower_text)
from .pf import (FixedPointState, NonConvergenceError, PFSolution,
                 SingularJacobianError, fixed_point_rhs, fixed_point_state,
                 loadability_limit, newton_pf, pf_residual)
from .screen import (InjectionCloud, SamplingSpec, ScreenResult, brute_screen,
                     fast_screen, sample_injections, solvability_index)

__version__ = "0.1.0"
