"""Exception types shared across the package.

Every hard failure mode of the pipeline gets its own class so callers (and the
CLI) can report *which* contract was violated without string-matching.
"""


class BeamblocksError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamblocksError):
    """Bad configuration: unknown key, type mismatch, or invariant violation."""


class CertificationError(BeamblocksError):
    """A partition/operator certificate could not be established."""


class SymmetryError(BeamblocksError):
    """A coefficient write or field state breaks Hermitian symmetry."""


class BandError(BeamblocksError):
    """Band bookkeeping failed (e.g. inverting on a mode with tiny multiplier)."""


class NonContractionError(BeamblocksError):
    """The finite-band fixed-point map stopped contracting."""


class HomologicalDivisorError(BeamblocksError):
    """A kept cross-group coupling has a (near-)zero spatial divisor."""


class CutoffResolutionError(BeamblocksError):
    """Resonance-interval location failed (grid too coarse / non-monotone branch)."""


class CutoffInconsistencyError(BeamblocksError):
    """A stage tried to invert a block that the screen flags as resonant."""


class ExcludedFrequencyError(BeamblocksError):
    """The requested frequency sits inside an excluded resonance interval."""

    def __init__(self, omega: float, shell: int, interval: tuple):
        self.omega = omega
        self.shell = shell
        self.interval = interval
        super().__init__(
            f"omega={omega!r} lies in an excluded resonance interval "
            f"{interval} of dyadic shell {shell}; no solution is certified there"
        )


class StagnationError(BeamblocksError):
    """The staged iteration stopped making progress before reaching tolerance."""


class OracleError(BeamblocksError):
    """The reference Newton solver failed (singular Jacobian or divergence)."""
