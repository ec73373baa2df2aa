"""Flock stability toolkit: swarm dynamics, stationary states, and the
spectral checks that certify a flock family as stable."""

from .dynamics import (MeanVelState, ModelParams, ParticleState,
                       aggregation_rhs, flock_state, from_meanvel,
                       integrate_aggregation, integrate_swarm,
                       interaction_energy, meanvel_rhs, rk4_integrate,
                       swarm_rhs, to_meanvel)
from .errors import (CoincidentParticlesError, ConfigError, DiagnosticError,
                     DivergenceError, DomainError, FlockstabError,
                     NonConvergenceError, SolverConvergenceError)
from .experiments import (SweepRecord, SweepStats, Table1Row,
                          find_stationary_state, monte_carlo_sweep,
                          polarization, run_perturbed_flock,
                          sample_perturbation, sweep_statistics,
                          table1_pipeline)
from .hypotheses import (HypothesisReport, check_H1, check_H2_H3, check_H4,
                         check_H5, evaluate_hypotheses, verify_lemma3,
                         verify_lemma4)
from .jacobians import (FlockFamilyMember, StationaryConfig, assemble_F,
                        assemble_FBB, assemble_G, basis_B, flock_member,
                        h_block, kernel_vectors_w, kernel_vectors_z,
                        project_P)
from .linalg import (Spectrum, general_eigenvalues, kernel_basis, kron,
                     numerical_rank, symmetric_eigen)
from .potentials import (Family, PotentialSpec, bessel_k0, bessel_k1,
                         generalized_morse, grad_W, hess_W, log_newtonian,
                         morse, potential_value, quasi_morse,
                         radial_derivatives)

__version__ = "0.1.0"
