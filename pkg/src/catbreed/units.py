"""Quadrature unit handling.

Internally every quadrature length is expressed in units where the vacuum
x-variance is 1/2, so the vacuum Wigner function reads ``exp(-(x**2+p**2))/pi``.
Homodyne data are usually quoted with a vacuum variance of 1; those lengths are
larger by a factor ``sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import DomainError

Units = Literal["homodyne", "internal"]


@dataclass(frozen=True)
class QuadratureConvention:
    vacuum_x_variance: float = 0.5
    homodyne_unit_scale: float = math.sqrt(2.0)

    def to_internal(self, length, units: Units = "homodyne"):
        check_units(units)
        if units == "internal":
            return length
        return length / self.homodyne_unit_scale

    def from_internal(self, length, units: Units = "homodyne"):
        check_units(units)
        if units == "internal":
            return length
        return length * self.homodyne_unit_scale


CONVENTION = QuadratureConvention()


def check_units(units: str) -> None:
    if units not in ("homodyne", "internal"):
        raise DomainError(f"unknown units {units!r}; expected 'homodyne' or 'internal'")


def to_internal(length, units: Units = "homodyne"):
    """Convert a quadrature length given in ``units`` to internal units."""
    return CONVENTION.to_internal(length, units)


def from_internal(length, units: Units = "homodyne"):
    return CONVENTION.from_internal(length, units)
