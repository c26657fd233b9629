class TieError(ValueError):
    """Tied observations; ranks would not be distribution-free."""


class CalibrationMismatch(ValueError):
    """A calibration does not describe the requested test."""
