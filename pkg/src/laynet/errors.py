"""Exception types shared across the simulator."""


class LaynetError(Exception):
    pass


class ConfigError(LaynetError):
    """Invalid or degenerate configuration.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ChannelError(LaynetError):
    pass


class AtomicityFailure(LaynetError):
    """A multi-hop payment could not be executed; the graph is unchanged."""

    def __init__(self, message, hop_index=None):
        super().__init__(message)
        self.hop_index = hop_index


class RoutingError(LaynetError):
    pass


class Disconnected(RoutingError):
    pass


class OracleLimitExceeded(LaynetError):
    pass


class NotEstimable(LaynetError):
    pass


class ConfigParseError(ConfigError):
    """Config text that cannot be read: bad syntax or a value of the wrong type."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message, key)
        self.line = line
