"""Exception types raised by the bridge."""


class BridgeError(RuntimeError):
    """Base class for everything the bridge raises on purpose."""


class BridgeFormatError(BridgeError):
    """An interchange file is malformed or an item violates its contract."""


class EngineInvocationError(BridgeError):
    """The ranking engine CLI exited nonzero or could not be launched."""
