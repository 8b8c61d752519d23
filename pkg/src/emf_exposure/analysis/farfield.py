from __future__ import annotations

from ..units import SPEED_OF_LIGHT, Frequency


def far_field_distance(f: Frequency | float, antenna_length: float) -> float:
    """Minimum UE-to-probe distance (m) for plane-wave conditions.

    max(wavelength, L, 2 L^2 / wavelength); `f` is a Frequency or Hz.
    """
    hz = f.hertz if isinstance(f, Frequency) else float(f)
    if hz <= 0:
        raise ValueError("frequency must be positive")
    if antenna_length < 0:
        raise ValueError("antenna length must be >= 0")
    lam = SPEED_OF_LIGHT / hz
    return max(lam, antenna_length, 2.0 * antenna_length**2 / lam)
