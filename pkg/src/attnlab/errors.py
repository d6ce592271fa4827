"""Exception types shared across the package."""


class AttnlabError(Exception):
    pass


class DimensionError(AttnlabError, ValueError):
    pass


class ParameterError(AttnlabError, ValueError):
    pass


class DomainError(AttnlabError, ValueError):
    pass


class DegenerateInputError(AttnlabError, ValueError):
    """A division by a zero row/column/total sum, or a degenerate configuration."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PreconditionError(AttnlabError, ValueError):
    pass


class ConvergenceError(AttnlabError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FormatError(AttnlabError, ValueError):
    pass


class TrainingDiverged(AttnlabError, RuntimeError):
    def __init__(self, epoch, param_norms):
        norms = ", ".join(f"{k}={v:.3g}" for k, v in param_norms.items())
        super().__init__(f"non-finite loss at epoch {epoch}; parameter norms: {norms}")
        self.epoch = epoch
        self.param_norms = param_norms
