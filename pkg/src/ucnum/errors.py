"""Exception taxonomy shared across the package.

The command-line harness maps these onto exit codes: configuration
problems exit 3, runtime invariant violations exit 2.
"""


class ConfigError(ValueError):
    """Invalid configuration or malformed input file."""


class InvariantViolation(RuntimeError):
    """A runtime check that the theory guarantees has failed."""
