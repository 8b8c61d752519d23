"""Unit-safe scalar quantities and the conversions between them.

Field strength (V/m), linear power density (W/m^2) and logarithmic power
density (dBm/m^2) are related through the plane-wave relation S = E^2 / Z0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import total_ordering

from .errors import DomainError

FREE_SPACE_IMPEDANCE = 376.73  # ohm
SPEED_OF_LIGHT = 299_792_458.0  # m/s


class Unit(str, enum.Enum):
    VPM = "VPM"  # V/m
    WPM2 = "WPM2"  # W/m^2
    DBM_M2 = "DBM_M2"  # dBm/m^2

    @property
    def symbol(self) -> str:
        return {"VPM": "V/m", "WPM2": "W/m^2", "DBM_M2": "dBm/m^2"}[self.value]


@total_ordering
@dataclass(frozen=True)
class Frequency:
    """A strictly positive frequency held as an integer number of hertz."""

    hertz: int

    def __post_init__(self):
        if isinstance(self.hertz, bool) or not isinstance(self.hertz, int):
            raise TypeError(f"Frequency needs integer hertz, got {self.hertz!r}")
        if self.hertz <= 0:
            raise DomainError(f"frequency must be positive, got {self.hertz} Hz")

    @classmethod
    def from_mhz(cls, mhz: float) -> Frequency:
        return cls(int(round(mhz * 1_000_000)))

    @property
    def mhz(self) -> float:
        return self.hertz / 1e6

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.hertz

    def __lt__(self, other: Frequency) -> bool:
        if not isinstance(other, Frequency):
            return NotImplemented
        return self.hertz < other.hertz

    def __str__(self) -> str:
        return f"{self.mhz:g} MHz"


@dataclass(frozen=True)
class FieldStrength:
    volts_per_meter: float

    def __post_init__(self):
        if not math.isfinite(self.volts_per_meter) or self.volts_per_meter < 0:
            raise DomainError(f"field strength must be finite and >= 0, got {self.volts_per_meter}")

    def to_density(self) -> PowerDensityLog:
        return PowerDensityLog(convert(self.volts_per_meter, Unit.VPM, Unit.DBM_M2))

    @property
    def watts_per_m2(self) -> float:
        return convert(self.volts_per_meter, Unit.VPM, Unit.WPM2)


@dataclass(frozen=True)
class PowerDensityLog:
    dbm_per_m2: float

    def __post_init__(self):
        if not math.isfinite(self.dbm_per_m2):
            raise DomainError(f"power density must be finite, got {self.dbm_per_m2}")

    def to_field(self) -> FieldStrength:
        return FieldStrength(convert(self.dbm_per_m2, Unit.DBM_M2, Unit.VPM))

    @property
    def watts_per_m2(self) -> float:
        return dbm_m2_to_w_m2(self.dbm_per_m2)


def require_field(value) -> FieldStrength:
    """Reject anything that is not a FieldStrength (notably PowerDensityLog)."""
    if not isinstance(value, FieldStrength):
        raise TypeError(f"expected FieldStrength, got {type(value).__name__}")
    return value


def require_density(value) -> PowerDensityLog:
    if not isinstance(value, PowerDensityLog):
        raise TypeError(f"expected PowerDensityLog, got {type(value).__name__}")
    return value


def dbm_m2_to_w_m2(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


def w_m2_to_dbm_m2(s: float) -> float:
    if s <= 0:
        raise DomainError(f"cannot take the log of a non-positive density {s}")
    return 10.0 * math.log10(s) + 30.0


def _to_watts(value: float, unit: Unit) -> float:
    if unit is Unit.WPM2:
        if value < 0:
            raise DomainError(f"negative power density {value}")
        return value
    if unit is Unit.VPM:
        if value < 0:
            raise DomainError(f"negative field strength {value}")
        return value * value / FREE_SPACE_IMPEDANCE
    return dbm_m2_to_w_m2(value)


def _from_watts(s: float, unit: Unit) -> float:
    if unit is Unit.WPM2:
        return s
    if unit is Unit.VPM:
        return math.sqrt(s * FREE_SPACE_IMPEDANCE)
    return w_m2_to_dbm_m2(s)


def convert(value: float, from_unit: Unit | str, to_unit: Unit | str) -> float:
    """Convert a scalar between V/m, W/m^2 and dBm/m^2.

    Raises DomainError for negative fields or densities, and for a zero
    density requested in dBm/m^2.
    """
    src, dst = Unit(from_unit), Unit(to_unit)
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value}")
    if src is dst:
        if src is not Unit.DBM_M2 and value < 0:
            raise DomainError(f"negative {src.symbol} value {value}")
        return value
    return _from_watts(_to_watts(value, src), dst)
