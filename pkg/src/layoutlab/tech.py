"""Simplified process technology description.

All geometric quantities are integer nanometers on a fixed manufacturing
lattice, so shifts and coordinate comparisons stay exact. Electrical
coefficients use SI units with the per-area/per-length reference unit
noted on each field.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

# Lattice every shape coordinate must sit on (nm). Tile dimensions are
# additionally snapped to 2x this so edge-midpoint pins stay on lattice.
GRID_NM = 100

# Wiring layer ids used throughout (metal1 routes preferred-horizontal,
# metal2 preferred-vertical); other ids are annotation layers in GDS.
LAYER_M1 = 1
LAYER_M2 = 2


@dataclass(frozen=True)
class TechnologyCard:
    """Process constants for layout generation and device modelling."""

    # geometry (nm)
    min_gate_width: int = 150
    min_spacing: int = 50
    wire_pitch: int = 100
    l_diff: int = 200           # diffusion extension / region width
    contact_margin: int = 200   # tile padding above/below the channel
    halo_margin: int = 200      # free-shift slack per tile side
    grid_quantum: int = 5       # manufacturing grid for DRC on-grid check

    # wiring parasitics
    sheet_resistance: dict[int, float] = field(
        default_factory=lambda: {LAYER_M1: 0.1, LAYER_M2: 0.08})  # ohm/square
    cap_area: dict[int, float] = field(
        default_factory=lambda: {LAYER_M1: 0.2e-15, LAYER_M2: 0.15e-15})  # F/um^2
    cap_fringe: dict[int, float] = field(
        default_factory=lambda: {LAYER_M1: 0.05e-15, LAYER_M2: 0.04e-15})  # F/um
    cap_coupling: float = 0.1e-15   # F/um of parallel run at min spacing

    # MOS small-signal model constants
    k_prime: float = 100e-6     # A/V^2
    lambda_: float = 0.1        # 1/V channel-length modulation
    v_ov: float = 0.2           # V overdrive used for linearization
    c_ox: float = 8e-15         # F/um^2 gate capacitance
    c_j: float = 3e-15          # F/um^2 junction bottom-plate capacitance
    c_jsw: float = 0.3e-15      # F/um junction sidewall capacitance

    # passive device synthesis
    res_sheet: float = 10_000.0  # ohm/square of the resistor body layer
    res_width: int = 400         # nm resistor strip width
    cap_density: float = 2e-15   # F/um^2 of the capacitor plate stack

    def __post_init__(self):
        for name in ("min_gate_width", "min_spacing", "wire_pitch", "l_diff",
                     "contact_margin", "halo_margin", "grid_quantum",
                     "res_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"technology field {name} must be > 0")
        for layer, rho in self.sheet_resistance.items():
            if rho <= 0:
                raise ValueError(f"sheet_resistance[{layer}] must be > 0")
        for table in (self.cap_area, self.cap_fringe):
            for layer, c in table.items():
                if c < 0:
                    raise ValueError("capacitance coefficients must be >= 0")
        if self.cap_coupling < 0 or self.c_ox < 0 or self.c_j < 0 or self.c_jsw < 0:
            raise ValueError("capacitance coefficients must be >= 0")
        if self.res_sheet <= 0:
            raise ValueError("res_sheet must be > 0")

    @property
    def wire_width(self) -> int:
        """Drawn wire width (nm); tracks at wire_pitch then sit exactly
        min_spacing apart."""
        return self.wire_pitch - self.min_spacing

    def zero_parasitics(self) -> "TechnologyCard":
        """Copy with every layout-parasitic coefficient nulled: wiring RC,
        coupling, and the junction capacitances that extraction attaches
        to diffusion regions.

        Sheet resistances keep a tiny positive value to satisfy the
        positivity invariant; extraction treats segment resistance below
        1e-12 ohm as a collapsed branch.
        """
        eps = {k: 1e-30 for k in self.sheet_resistance}
        return replace(
            self,
            sheet_resistance=eps,
            cap_area={k: 0.0 for k in self.cap_area},
            cap_fringe={k: 0.0 for k in self.cap_fringe},
            cap_coupling=0.0,
            c_j=0.0,
            c_jsw=0.0,
        )


_INT_FIELDS = {"min_gate_width", "min_spacing", "wire_pitch", "l_diff",
               "contact_margin", "halo_margin", "grid_quantum", "res_width"}
_FLOAT_FIELDS = {"cap_coupling", "k_prime", "lambda_", "v_ov", "c_ox", "c_j",
                 "c_jsw", "res_sheet", "cap_density"}
_LAYER_FIELDS = {"sheet_resistance", "cap_area", "cap_fringe"}


def parse_config(text: str) -> dict[str, str]:
    """Parse the key-value config format: one `key = value` per line,
    `#` comments, blank lines ignored."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key = value): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def tech_from_config(pairs: dict[str, str],
                     base: TechnologyCard | None = None) -> TechnologyCard:
    """Build a TechnologyCard from `tech.<field>` config keys.

    Layer tables use keys like `tech.sheet_resistance.1 = 0.1`.
    Unrecognized tech keys raise; non-tech keys are ignored.
    """
    card = base or TechnologyCard()
    updates: dict[str, object] = {}
    layer_updates: dict[str, dict[int, float]] = {
        name: dict(getattr(card, name)) for name in _LAYER_FIELDS}
    known = {f.name for f in fields(TechnologyCard)}
    for key, value in pairs.items():
        if not key.startswith("tech."):
            continue
        name = key[len("tech."):]
        if "." in name:
            table, layer = name.split(".", 1)
            if table not in _LAYER_FIELDS:
                raise ValueError(f"unknown technology table {table!r}")
            layer_updates[table][int(layer)] = float(value)
        elif name in _INT_FIELDS:
            updates[name] = int(value)
        elif name in _FLOAT_FIELDS:
            updates[name] = float(value)
        elif name in known:
            updates[name] = float(value)
        else:
            raise ValueError(f"unknown technology field {name!r}")
    for name, table in layer_updates.items():
        if table != getattr(card, name):
            updates[name] = table
    return replace(card, **updates) if updates else card


CONFIG_ENV_VAR = "LAYOUTLAB_CONFIG"


def load_config(path: str | None = None) -> dict[str, str]:
    """Read config pairs from `path`, the env var, or return {}."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
