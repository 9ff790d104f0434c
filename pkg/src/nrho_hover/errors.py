"""Exception types raised by the toolkit."""


class HoverError(Exception):
    """Base class for numerical failures (mapped to exit status 1 by the CLI)."""


class SingularityError(HoverError):
    """A state came within the guard radius of one of the primaries."""


class PropagationError(HoverError):
    """The integrator failed (step-size underflow or similar)."""


class ConvergenceError(HoverError):
    """An iterative corrector did not converge."""


class SingularJacobianError(HoverError):
    """A Newton Jacobian was too ill-conditioned to trust."""


class SpectrumError(HoverError):
    """Eigen-decomposition failed or lacked the expected structure."""
