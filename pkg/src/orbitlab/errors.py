"""Exception types shared across orbitlab."""


class OrbitLabError(Exception):
    """Base class for all orbitlab errors."""


class IndeterminatePrecision(OrbitLabError):
    """A certified comparison could not be decided within the precision budget."""


class PrecisionFailure(IndeterminatePrecision):
    """Root or determinant enclosures were too wide to certify a sign."""


class RankDeficient(OrbitLabError):
    pass


class NotAUnit(OrbitLabError):
    pass


class PreconditionViolated(OrbitLabError):
    pass


class MembershipFailure(OrbitLabError):
    """Raised when a matrix expected in SU(n, Z[2^(1/4)], sigma) is not a member."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConfigError(OrbitLabError):
    pass
