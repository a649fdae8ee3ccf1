"""Numerical tolerances, kept in one place so reports can echo them."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    group: float = 1e-10  # defining-equation residual of a group element
    branch: float = 1e-6  # angular distance of an eigenvalue from -1 (radians)
    rel: float = 1e-8  # relation residual for on-variety tuples
    align: float = 1e-6  # gauge alignment success threshold
    align_polish: float = 1e-8  # residual an alignment is refined to before success is declared
    sigma: float = 1e-8  # singular-value cutoff for stabilizer kernels
    center: float = 1e-4  # snap radius for central elements

    def as_dict(self) -> dict:
        return asdict(self)

    def override(self, **changes: float) -> "Tolerances":
        return replace(self, **changes)


DEFAULT = Tolerances()
