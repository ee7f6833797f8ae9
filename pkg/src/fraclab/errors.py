"""Exception types shared across the package."""


class FraclabError(Exception):
    """Base class; ``kind`` is used in machine-readable CLI errors."""

    kind = "error"

    def to_dict(self) -> dict:
        out = {"error": self.kind, "message": str(self)}
        out.update(getattr(self, "details", None) or {})
        return out


class InputError(FraclabError, ValueError):
    kind = "argument"


class ResolutionError(FraclabError):
    """A requested scale lies below the discretization floor."""

    kind = "resolution"


class CapacityError(FraclabError):
    """A cube has too few qualifying children for the requested exponent."""

    kind = "capacity"

    def __init__(self, message, cube=None, available=None, needed=None):
        super().__init__(message)
        self.details = {"cube": cube, "available": available, "needed": needed}


class BudgetError(FraclabError):
    kind = "budget"


class DegenerateInputError(FraclabError, ValueError):
    kind = "degenerate"


class PreconditionError(FraclabError):
    """A theorem hypothesis does not hold for the supplied system."""

    kind = "precondition"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.details = {"report": report} if report is not None else {}
