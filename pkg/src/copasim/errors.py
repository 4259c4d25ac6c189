"""Exception types shared across the package."""


class CopaError(Exception):
    """Base class for all copasim errors."""


class ContractError(CopaError):
    """An operation was called outside its documented preconditions."""


class ValidationError(CopaError):
    """A configuration document or design violates its schema or invariants."""


class PresetError(CopaError):
    """Unknown preset name; carries the list of valid names."""

    def __init__(self, name, valid):
        self.name = name
        self.valid = list(valid)
        super().__init__(
            f"no such preset: {name!r} (valid: {', '.join(self.valid)})"
        )
