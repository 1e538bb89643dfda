"""Multi-objective level set topology optimization with adaptive simplex
refinement of the Pareto frontier."""

from .asd import (ASDConfig, ASDResult, SimplexComplex, SolutionRegister,
                  build_complex, dedup, mark_and_refine, mean_edge_length,
                  normalize_objectives, pareto_filter, run_asd)
from .elasticity import (FixedBoundary, LoadSpec, MaterialParams,
                         PointConstraint, SparseSystem, Spring, Traction,
                         assemble_state, dirac_const, ersatz_dtau, ersatz_tau,
                         heaviside, solve, stress_pnorm, von_mises)
from .errors import (ConfigError, DegenerateSensitivityError, InvalidArgument,
                     MoltoError, SingularSystemError, SolverFailure,
                     TagMatchError)
from .levelset import LevelSetState, WaveMatrices, assemble_wave, initialize
from .mesh import Mesh, build_lshape_mesh, build_rect_mesh, dump_mesh, tag_boundary
from .optimizer import RunConfig, SolutionCandidate, run_candidate, stationarity
from .problems import (ComplianceProblem, MechanismProblem, StressVolumeProblem,
                       SurrogateProblem, make_clamped_tri, make_girder,
                       make_gripper, make_lbracket)
from .sensitivity import (ConstraintSpec, ObjectiveSpec, PerturbationResult,
                          eval_constraint, eval_objective, helmholtz_filter,
                          normalize, perturbation_compliance,
                          perturbation_mechanism, perturbation_stress_volume,
                          update_multiplier)
from .weights import (WeightState, forcing, stick_jacobian, stick_to_weights,
                      weights_to_stick)

__version__ = "0.1.0"
