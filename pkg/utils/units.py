"""
Unit handling for scenario files and command-line overrides.

User-facing frequencies are /2pi quantities (Hz, kHz, ...) and are stored as
angular frequencies (rad/s). Conversion happens once, here.
"""

import math
from typing import Dict, Optional, Tuple

import numpy as np

from services.constants import TWO_PI

# Multiplier from the unit to the stored SI value, per quantity kind.
UNIT_TABLES: Dict[str, Dict[str, float]] = {
    'frequency': {
        'Hz': TWO_PI,
        'kHz': TWO_PI * 1e3,
        'MHz': TWO_PI * 1e6,
        'GHz': TWO_PI * 1e9,
        'rad/s': 1.0,
    },
    'temperature': {'K': 1.0, 'mK': 1e-3, 'uK': 1e-6},
    'time': {'s': 1.0, 'ms': 1e-3, 'us': 1e-6, 'ns': 1e-9, 'ps': 1e-12},
    'field': {'T': 1.0, 'mT': 1e-3, 'uT': 1e-6, 'nT': 1e-9},
    'length': {'m': 1.0, 'mm': 1e-3, 'um': 1e-6, 'nm': 1e-9},
    'phase': {'rad': 1.0, 'deg': math.pi / 180.0},
    'dimensionless': {'': 1.0},
}

# Unit used when writing values back out.
PREFERRED_UNITS = {
    'frequency': 'MHz',
    'temperature': 'mK',
    'time': 'ns',
    'field': 'T',
    'length': 'um',
    'phase': 'rad',
    'dimensionless': '',
}

# Units that may be omitted on input.
IMPLICIT_UNITS = {'phase': 'rad', 'dimensionless': ''}

SI_LABELS = {
    'frequency': 'rad/s',
    'temperature': 'K',
    'time': 's',
    'field': 'T',
    'length': 'm',
    'phase': 'rad',
    'dimensionless': '1',
}


class UnitConversionError(ValueError):
    pass


def split_value(text: str) -> Tuple[str, str]:
    """Split '3.2 MHz' into ('3.2', 'MHz'); a bare number has unit ''"""
    parts = text.strip().split()
    if len(parts) == 1:
        return parts[0], ''
    if len(parts) == 2:
        return parts[0], parts[1]
    raise UnitConversionError(f"Expected 'value unit', got {text!r}")


def to_si(value: float, unit: str, kind: str) -> float:
    table = UNIT_TABLES[kind]
    if unit == '' and kind in IMPLICIT_UNITS:
        unit = IMPLICIT_UNITS[kind]
    if unit not in table:
        allowed = ', '.join(u for u in table if u) or 'none'
        raise UnitConversionError(f"Unit {unit!r} not valid for a {kind} (allowed: {allowed})")
    return value * table[unit]


def parse_quantity(text: str, kind: str) -> float:
    number, unit = split_value(text)
    try:
        value = float(number)
    except ValueError:
        raise UnitConversionError(f"Not a number: {number!r}")
    if not math.isfinite(value):
        raise UnitConversionError(f"Value must be finite: {number!r}")
    return to_si(value, unit, kind)


def format_quantity(si_value: float, kind: str, unit: Optional[str] = None) -> str:
    """
    Render an SI value in a user unit so that parse_quantity restores it bit for bit.

    Neighbouring floats of the naive quotient are tried first; if none
    round-trips, the SI unit itself is used (always exact).
    """
    unit = PREFERRED_UNITS[kind] if unit is None else unit
    factor = UNIT_TABLES[kind][unit]
    if factor == 1.0 or si_value == 0.0:
        return _join(repr(float(si_value)), unit)

    guess = si_value / factor
    candidates = [guess, np.nextafter(guess, np.inf), np.nextafter(guess, -np.inf)]
    for candidate in candidates:
        if float(candidate) * factor == si_value:
            return _join(repr(float(candidate)), unit)

    si_unit = next(u for u, f in UNIT_TABLES[kind].items() if f == 1.0)
    return _join(repr(float(si_value)), si_unit)


def _join(number: str, unit: str) -> str:
    return f"{number} {unit}" if unit else number
