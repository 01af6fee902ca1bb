"""Parsing of unit-suffixed quantities such as ``"130 um"`` or ``"17 MHz"`` into SI."""

import re
from decimal import Decimal

from .constants import AMU

_PREFIX = {"T": 1e12, "G": 1e9, "M": 1e6, "k": 1e3, "": 1.0, "c": 1e-2, "m": 1e-3,
           "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "n": 1e-9, "p": 1e-12}

UNITS = {
    "length": {p + "m": f for p, f in _PREFIX.items() if p not in ("T", "G", "M")},
    "time": {p + "s": f for p, f in _PREFIX.items() if f <= 1},
    "frequency": {p + "Hz": f for p, f in _PREFIX.items() if f >= 1},
    "power": {p + "W": f for p, f in _PREFIX.items() if p in ("k", "", "m", "u", "µ")},
    "velocity": {"m/s": 1.0, "mm/s": 1e-3, "km/s": 1e3},
    "density": {"kg/m3": 1.0, "kg/m^3": 1.0, "g/cm3": 1e3, "g/cm^3": 1e3},
    "mass": {"kg": 1.0, "g": 1e-3, "amu": AMU, "u": AMU, "Da": AMU},
    # bare numbers in amu
    "mass_amu": {"amu": 1.0, "u": 1.0, "Da": 1.0, "kg": 1 / AMU, "g": 1e-3 / AMU},
    "dimensionless": {},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(value, dimension: str) -> float:
    """Convert a number or unit-suffixed string to SI.

    Bare numbers are taken as already in the base unit (SI, or amu for
    ``"mass_amu"``).

    >>> parse_quantity("130 um", "length")
    0.00013
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a {dimension} quantity, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a {dimension} quantity, got {value!r}")
    match = _QUANTITY.match(value)
    if not match:
        raise ValueError(f"cannot parse {value!r} as a {dimension} quantity")
    number, unit = match.groups()
    if not unit:
        return float(number)
    table = UNITS[dimension]
    if unit not in table:
        known = ", ".join(sorted(table)) or "none"
        raise ValueError(f"unknown {dimension} unit {unit!r} (known: {known})")
    return float(Decimal(number) * Decimal(repr(table[unit])))
