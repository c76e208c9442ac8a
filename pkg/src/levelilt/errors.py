"""Exception types shared across the package."""


class NoInterfaceError(ValueError):
    """Raised when a signed distance is requested for a field with no 0/1 interface.

    A uniform mask (all inside or all outside) has no boundary, so the signed
    distance is undefined. Callers that can receive uniform masks must handle
    this case explicitly.
    """


class FieldFormatError(ValueError):
    """Raised when a serialized field or kernel file fails to parse."""
