"""Exception types shared across the package."""


class WidthplanError(Exception):
    """Base class for all package errors."""


class BudgetExhausted(WidthplanError):
    """A fresh simulator interaction was requested with no budget left."""


class InvalidAction(WidthplanError):
    """Action index outside the environment's action set."""


class ConfigMismatch(WidthplanError):
    """Feature extractor configuration does not fit the observation."""


class NoChildren(WidthplanError):
    """Root action selection requested on an unexpanded root."""


class MissingChild(WidthplanError):
    """Root advance requested along an action with no child node."""


class DepthOverflow(WidthplanError):
    """Node admission would exceed the lookahead horizon."""


class AllChildrenSolved(WidthplanError):
    """Rollout signal: every applicable action leads to a solved child."""


class EmptyDataset(WidthplanError):
    """A training batch was requested from zero transitions."""


class NonFiniteLoss(WidthplanError):
    """A fit step produced a non-finite loss; the candidate is unusable."""


class DegenerateSamples(WidthplanError):
    """Welch's t-test cannot discriminate the given samples."""


class UnknownEnv(WidthplanError):
    """Environment name not present in the registry."""


class IncompleteMatrix(WidthplanError):
    """Report requested over an incomplete variant x env x trial matrix."""


class ConfigError(WidthplanError):
    """Malformed or inconsistent harness configuration."""
