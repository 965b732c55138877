from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..design import Design


@dataclass
class DesignReport:
    """What a solver hands back: the design on both scales plus its credentials.

    ``certificate["type"]`` is ``"GET"`` (equivalence-theorem bound),
    ``"STAGNATION"`` (G_I iterations stopped improving), ``"ELFVING"``
    (c-optimal boundary construction) or ``"NONE"``.
    """

    model: str
    theta: tuple[float, ...]
    criterion: str
    value: float
    design_response: Design
    design_dose: Design
    certificate: dict[str, Any]
    converged: bool = True
    iterations: int | None = None
    ratio: float | None = None
    efficiencies: dict[str, float] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)
