"""Exception types shared across the package."""


class IBNLSError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(IBNLSError, ValueError):
    """A grid, model or run configuration violates its invariants.

    ``violations`` lists every problem found, not only the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class OrderUnsupported(IBNLSError, ValueError):
    pass


class RegionEmpty(IBNLSError, ValueError):
    pass


class ZeroField(IBNLSError, ValueError):
    pass


class NonFiniteField(IBNLSError, FloatingPointError):
    pass


class DtFloorReached(IBNLSError):
    """Adaptive step fell below the floor; signals a suspected finite-time blow-up."""

    def __init__(self, dt, dt_floor):
        self.dt = dt
        self.dt_floor = dt_floor
        super().__init__(f"dt={dt:.3e} below floor {dt_floor:.3e}")


class KTooSmall(IBNLSError, ValueError):
    pass


class BridgeMonotonicityFailed(IBNLSError, ValueError):
    pass


class PropertyViolated(IBNLSError, AssertionError):
    def __init__(self, prop, radius, value):
        self.prop = prop
        self.radius = radius
        self.value = value
        super().__init__(f"{prop} violated at r={radius!r} (value {value!r})")


class DominanceFailed(IBNLSError, AssertionError):
    def __init__(self, radius, detail=""):
        self.radius = radius
        super().__init__(f"comparison failed at r={radius!r} {detail}".strip())


class CaseDimensionMismatch(IBNLSError, ValueError):
    pass


class NonPositiveInput(IBNLSError, ValueError):
    pass


class InsufficientData(IBNLSError, ValueError):
    pass
