"""Exception types shared across the library."""


class LavdmError(Exception):
    """Base class for all library errors."""


class BadBandwidth(LavdmError):
    """Kernel bandwidth must be strictly positive."""


class DimensionMismatch(LavdmError):
    """Point sets live in different ambient dimensions."""


class IsolatedPoint(LavdmError):
    """A data point has zero affinity to every neighbor (bandwidth too small)."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"point {index} has zero degree; increase the bandwidth")


class IsolatedLandmark(LavdmError):
    """A landmark has zero affinity to every data point."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"landmark {index} has zero degree; increase the bandwidth")


class UnsupportedDensity(LavdmError):
    """Requested sampling density is not defined for this chart."""


class DegenerateJacobian(LavdmError):
    """Chart Jacobian is rank deficient at the requested point."""


class ChartExit(LavdmError):
    """A curve left the spherical coordinate chart (hit the polar margin)."""


class TooFewNeighbors(LavdmError):
    """Local PCA needs at least d+1 neighbors."""

    def __init__(self, index, found, needed):
        self.index = index
        self.found = found
        self.needed = needed
        super().__init__(
            f"point {index}: found {found} neighbors, need at least {needed}"
        )


class RankDeficient(LavdmError):
    """Local PCA neighborhood does not span the requested dimension."""


class AsymmetricInput(LavdmError):
    """A square affinity/connection input was expected to be symmetric."""


class MissingConnection(LavdmError):
    """An affinity edge has no connection attached."""

    def __init__(self, i, k):
        self.edge = (i, k)
        super().__init__(f"edge ({i}, {k}) has affinity but no connection")


class SolverFailure(LavdmError):
    """Iterative eigen/SVD solver did not converge."""


class SizeGuard(LavdmError):
    """Dense oracle requested above its size limit."""


class FractionalPowerOfNegative(LavdmError):
    """Eigenvalue product is negative and the diffusion time is not an integer."""


class NoCommonLandmark(LavdmError):
    """No landmark is within kernel range of both endpoints."""


class ZeroReferenceEigenvalue(LavdmError):
    """Reference eigenvalue is zero; the difference ratio is undefined."""


class AllMasked(LavdmError):
    """Every entry of a masked vector is masked."""


class ConfigError(LavdmError):
    """Experiment configuration failed validation."""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class SchemaMismatch(LavdmError):
    """CSV input is missing required columns."""
