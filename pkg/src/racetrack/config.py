"""Global numeric tolerances.

The geometry is evaluated in floating point, so "on the boundary" means
"within ``eps_geom`` of it".  Everything that needs a tolerance reads it from
:data:`TOL` unless a caller passes an explicit value.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Tolerances:
    eps_geom: float = 1e-9
    jitter: float = 1e-7
    probe_factor: float = 1e3

    @property
    def eps_probe(self) -> float:
        return self.probe_factor * self.eps_geom


TOL = Tolerances()


def eps_or_default(eps: float | None) -> float:
    return TOL.eps_geom if eps is None else float(eps)
