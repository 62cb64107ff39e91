"""Exception types shared across the package."""


class JCError(Exception):
    """Base class for all errors raised by jcpackets."""


class ConfigError(JCError, ValueError):
    """Invalid parameters or configuration values."""


class NumericalError(JCError):
    """Integration failed a runtime health check."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class UnderTruncationError(NumericalError):
    """Occupation near the photon-number cutoff exceeded the threshold."""


class NormDriftError(NumericalError):
    """State norm drifted beyond the configured tolerance."""


class DegeneratePoint(JCError, ArithmeticError):
    """Eigenfrequencies of the TLS Hamiltonian cross (z close to f/g)."""


class NearDegeneracy(NumericalError):
    """A branch trajectory entered the degeneracy disk around f/g."""


class SynthesisError(JCError):
    """Base class for protocol synthesis failures."""


class NotAttained(SynthesisError):
    """The target overlap is never reached inside the search window."""


class GuardBand(SynthesisError):
    """Only solutions inside the turning-point guard band exist."""


class InfeasibleGeometry(SynthesisError):
    """The leaf trajectory does not enclose the new degeneracy point."""


class LostTrack(JCError):
    """No local Wigner maximum found within the search radius."""


class NoPeak(JCError):
    """No spectral peak near an expected frequency."""
