"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DivergenceError -> 4. Everything else is a plain ValueError/implementation
bug and surfaces as an ordinary traceback.
"""


class ConfigError(Exception):
    """Invalid or inconsistent pipeline configuration."""


class DataError(Exception):
    """Unreadable, malformed, or missing input data."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
