"""Photon-number wave packets in the driven Jaynes-Cummings model.

Exact Fock-basis dynamics, the reduced coherent-state picture with its
two adiabatic branches, the A-D regime classification, step-protocol
synthesis and the analysis tools (Wigner function, packet detection,
spectra) used to compare the two.
"""
from .classifier import RegimeClass, classify, max_lambda2, min_lambda1
from .errors import (ConfigError, DegeneratePoint, GuardBand, InfeasibleGeometry, JCError,
                     LostTrack, NearDegeneracy, NoPeak, NormDriftError, NotAttained,
                     NumericalError, SynthesisError, UnderTruncationError)
from .model import (DriveProtocol, FockState, SystemParams, hamiltonian_matrix,
                    make_initial_state, truncation_for)
from .protocol import (BranchTree, apply_step, make_tree, replay, solve_step_time, suggest_nmax,
                       synthesize, validate_protocol)
from .solver import Trajectory, evolve
from .variational import (BranchState, evolve_branch, oscillation_frequency, overlap_S,
                          transition_probability, turning_point)

__version__ = "0.1.0"

__all__ = [
    "BranchState", "BranchTree", "ConfigError", "DegeneratePoint", "DriveProtocol", "FockState",
    "GuardBand", "InfeasibleGeometry", "JCError", "LostTrack", "NearDegeneracy", "NoPeak",
    "NormDriftError", "NotAttained", "NumericalError", "RegimeClass", "SynthesisError",
    "SystemParams", "Trajectory", "UnderTruncationError", "apply_step", "classify",
    "evolve", "evolve_branch", "hamiltonian_matrix", "make_initial_state", "make_tree",
    "max_lambda2", "min_lambda1", "oscillation_frequency", "overlap_S", "replay",
    "solve_step_time", "suggest_nmax", "synthesize", "transition_probability",
    "truncation_for", "turning_point", "validate_protocol",
]
