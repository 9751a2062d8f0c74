"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Physically or structurally invalid configuration."""


class IngestionError(ValueError):
    """Absorption data file could not be parsed or validated."""


class AlphabetError(ConfigError):
    """Event alphabet violates the non-overlapping half-power band rule."""


class ContractError(ValueError):
    """Input violates a numerical precondition (e.g. non-Hermitian matrix)."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. an all-zero spectrum)."""
