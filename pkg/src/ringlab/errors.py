"""Shared exception types."""


class ConfigurationError(ValueError):
    """A scenario, support, or plan configuration is invalid."""


class CrashSignal(RuntimeError):
    """A car-following query was made for a non-positive gap."""


class CrashedWorldError(RuntimeError):
    """A crashed world was stepped with halt_on_crash enabled."""


class CheckpointError(IOError):
    """A network checkpoint is corrupt or dimensionally incompatible."""


class DivergenceError(RuntimeError):
    """Training produced non-finite losses or gradients."""


class InfeasibleTriggerError(RuntimeError):
    """Trigger synthesis cannot satisfy its constraints."""
