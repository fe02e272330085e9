"""Exception hierarchy shared across the simulator."""


class RetNavError(Exception):
    """Base class for all package errors."""


class InvalidState(RetNavError):
    """Tool state or control contains non-finite components."""


class CenterSingularity(RetNavError):
    """Tool tip coincides with the sphere center; collision direction undefined."""


class NonFiniteCost(RetNavError):
    """A rollout produced non-finite states or cost."""


class RegularizationCeiling(RetNavError):
    """Backward pass could not be stabilized at the maximum regularization."""


class RankDeficient(RetNavError):
    """Sphere fit system is rank deficient (coplanar or too few points)."""


class NegativeRadiusSquared(RetNavError):
    """Sphere fit produced an inconsistent (negative) squared radius."""


class NoConsensus(RetNavError):
    """RANSAC failed to find a consensus set of at least four inliers."""


class NoIntersection(RetNavError):
    """Ray does not intersect the sphere."""


class GoalOffRetina(RetNavError):
    """Goal pixel does not raycast onto the retinal surface."""


class OutOfRange(RetNavError):
    """Value falls outside the discretization range."""


class MaxIterExceeded(RetNavError):
    """Closed-loop navigation exceeded the replan budget."""


class PathOffRetina(RetNavError):
    """A vessel path pixel does not raycast onto the fitted sphere."""


class BadMode(RetNavError):
    """Command not permitted in the session's current mode."""


class BadPayload(RetNavError):
    """Command payload is malformed or violates an invariant."""
