# Exception hierarchy shared by every noisyperm module


class NoisyPermError(Exception):
    pass


# Inputs violate the contract: shape, range or unknown parameters
class InputValidationError(NoisyPermError, ValueError):
    pass


# p(y) > 0 where q(y) = 0, so a log-likelihood ratio is undefined
class SupportError(InputValidationError):
    pass


# A quantile or approximation was asked for outside its domain
class DomainError(NoisyPermError, ValueError):
    pass


# The channel matrix is not square or numerically singular
class SingularMatrixError(NoisyPermError):
    pass


# A marginal distribution lies outside the channel image
class MembershipError(NoisyPermError):
    pass


# An enumeration would exceed its configured cap
class ResourceLimitError(NoisyPermError):
    pass


# No grid point survived the channel-image filter
class EmptyMessageSetError(NoisyPermError):
    pass


# The packing radius is too coarse to give a grid step
class DegenerateMessageSetError(NoisyPermError):
    pass


# The requested error target cannot be met by the formula
class InfeasibleTargetError(NoisyPermError):
    pass
