"""Exception types raised across the package."""


class InvalidConfiguration(ValueError):
    """Market, signal or Monte Carlo settings that cannot be used."""


class InvalidInput(ValueError):
    """Arguments outside an operation's domain."""


class InvalidRegime(ValueError):
    """Strategy formula requested outside the market regime it covers."""


class UnsupportedConfiguration(ValueError):
    pass


class MissingTable(LookupError):
    """No running-maximum table is available for the requested horizon."""


class InconsistentOutcome(ValueError):
    """The realized signal value is impossible given the observed path."""


class WealthRuin(ArithmeticError):
    """A jump fired while 1 + pi*theta <= 0, sending log-wealth to -inf."""
