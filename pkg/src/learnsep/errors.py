"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrityError(RuntimeError):
    """Internal consistency check failed (bad factorization, dishonest oracle, ...)."""


class NotInSubgroup(ValueError):
    """Discrete-log target is not generated by the base."""


class InconsistentCongruences(ValueError):
    """Two congruences in a CRT system cannot hold simultaneously."""

    def __init__(self, first, second, pair):
        self.first = first
        self.second = second
        self.pair = pair
        super().__init__(
            f"congruences #{pair[0]} {first} and #{pair[1]} {second} are inconsistent"
        )


class ResourceExhausted(RuntimeError):
    """An iteration or candidate budget ran out."""


class Degenerate(ValueError):
    """The sample configuration does not determine a unique answer; resample."""


class ContractError(TypeError):
    """A collaborator returned something that violates its declared contract."""
