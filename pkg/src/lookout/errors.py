"""Exception hierarchy shared across the package."""


class LookoutError(Exception):
    """Base class for all package-specific errors."""


# geometry
class DegenerateRotation(LookoutError):
    """6D rotation input collapses under Gram-Schmidt (near-zero or parallel columns)."""


class InvalidRotation(LookoutError):
    """Matrix fails the orthonormality / determinant check."""


class GimbalDegenerate(LookoutError):
    """Head forward axis too close to the gravity axis to define a heading."""


class FrameMismatch(LookoutError):
    """Trajectory is already in (or not in) the frame the operation expects."""


# tensors / training
class ShapeMismatch(LookoutError):
    pass


class NonFiniteValue(LookoutError):
    """An op produced NaN or Inf."""


class NonFiniteGradient(LookoutError):
    pass


class NonFiniteLoss(LookoutError):
    pass


class StepOutOfRange(LookoutError):
    pass


class GridMismatch(LookoutError):
    """Feature volumes defined on different voxel grids."""


# data generation / windowing
class ConfigInvalid(LookoutError):
    pass


class NoFreePath(LookoutError):
    """Ego planner could not reach the sampled goal."""


class SequenceTooShort(LookoutError):
    pass


# baselines / planning
class TooFewSteps(LookoutError):
    pass


class StartBlocked(LookoutError):
    pass


class EmptyGrid(LookoutError):
    pass


# metrics
class EmptyCloud(LookoutError):
    pass


class MissingDynamicData(LookoutError):
    pass


class LengthMismatch(LookoutError):
    pass


class InconsistentClipSets(LookoutError):
    pass
