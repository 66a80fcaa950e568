"""
Exception hierarchy shared by all toolkit modules
"""


class MeraError(Exception):
    """Base class for all toolkit errors"""


class ValidationError(MeraError):
    """Input failed a structural or numerical precondition"""


class ContractionError(ValidationError):
    """Tensor legs paired for contraction do not match"""


class NumericError(MeraError):
    """Non-finite values or a singular quantity where none is allowed"""


class GeometryError(MeraError):
    """Site count, block or support incompatible with the circuit geometry"""


class RankDeficiencyError(MeraError):
    """Selected operators do not span the target operator space"""

    def __init__(self, message, rank):
        super().__init__(message)
        self.rank = rank


class EstimationError(MeraError):
    """A density-matrix estimate cannot be produced"""
