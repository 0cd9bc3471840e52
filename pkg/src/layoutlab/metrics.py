"""Quality metrics for layout variants: the parasitic degradation score
and the component-area figure, plus the per-variant QoS record."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .acsim import SimulationTrace
from .geometry import ComponentTile, InternalRepresentation


def pscore(pre: SimulationTrace, post: SimulationTrace) -> float:
    """Root-mean-square error (volts) between the pre- and post-layout
    magnitude traces; both must share one frequency grid."""
    if pre.k != post.k or pre.freqs != post.freqs:
        raise ValueError("traces sampled on different frequency grids")
    total = 0.0
    for a, b in zip(pre.mags, post.mags):
        total += (a - b) ** 2
    return math.sqrt(total / pre.k)


def area_um2(tiles: list[ComponentTile] | tuple[ComponentTile, ...]) -> float:
    """Sum of component bounding-rectangle areas (um^2). Depends only on
    tile dimensions, so shifts never change it; finger changes do."""
    if not tiles:
        raise ValueError("area needs at least one tile")
    return sum(t.area_nm2 for t in tiles) / 1e6


def die_area_um2(ir: InternalRepresentation) -> float:
    """Bounding-box area over the current tile positions (um^2); unlike
    the component sum, shifts move this."""
    x0, y0, x1, y1 = ir.tiles_box()
    return (x1 - x0) * (y1 - y0) / 1e6


@dataclass(frozen=True)
class QoS:
    """Report for one layout variant; flags must both hold for the
    variant to enter a dataset."""

    pscore: float
    area: float                  # component-sum area, um^2
    die_area: float              # tile bounding-box area, um^2
    drc_clean: bool
    lvs_pass: bool
    netlist_index: int
    variant_index: int
    moves: tuple = ()

    def __post_init__(self):
        if self.pscore < 0:
            raise ValueError("pscore must be >= 0")
        if self.area <= 0:
            raise ValueError("area must be > 0")

    @property
    def admissible(self) -> bool:
        return self.drc_clean and self.lvs_pass
