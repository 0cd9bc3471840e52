"""Physical layout model: finger-aware component tiles, halos, and the
mutable-by-copy internal representation that exploration perturbs.

Coordinates are integer nanometers. Tiles are built at the origin and
translated into place by the placer; every tile dimension is snapped to
the routing lattice so pins always land on routing-grid nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .netlist import ConcreteNetlist
from .tech import GRID_NM, LAYER_M1, TechnologyCard

DIRECTIONS = ("up", "down", "left", "right")
_DELTA = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}


class ShiftError(ValueError):
    """A perturbation produced an illegal tile position."""


class HaloViolation(ShiftError):
    pass


class OverlapViolation(ShiftError):
    pass


def snap_up(value: float, quantum: int = GRID_NM) -> int:
    return int(math.ceil(value / quantum)) * quantum


def snap(value: float, quantum: int = GRID_NM) -> int:
    return int(round(value / quantum)) * quantum


Rect = tuple[int, int, int, int]  # llx, lly, urx, ury


def rects_intersect(a: Rect, b: Rect) -> bool:
    """Closed-rectangle intersection (shared edges/corners count)."""
    return (a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3])


def rect_contains(outer: Rect, inner: Rect) -> bool:
    return (outer[0] <= inner[0] and outer[1] <= inner[1]
            and inner[2] <= outer[2] and inner[3] <= outer[3])


@dataclass(frozen=True)
class ComponentTile:
    """Placed footprint of one device plus its terminal pin locations."""

    name: str
    kind: str
    ll: tuple[int, int]
    ur: tuple[int, int]
    pins: dict[str, tuple[int, int, int]]  # role -> (x, y, layer)
    nf: int | None = None

    def __post_init__(self):
        if self.ur[0] <= self.ll[0] or self.ur[1] <= self.ll[1]:
            raise ValueError(f"{self.name}: degenerate tile box")
        for role, (x, y, _layer) in self.pins.items():
            if not (self.ll[0] <= x <= self.ur[0]
                    and self.ll[1] <= y <= self.ur[1]):
                raise ValueError(f"{self.name}: pin {role} outside tile")

    @property
    def box(self) -> Rect:
        return (self.ll[0], self.ll[1], self.ur[0], self.ur[1])

    @property
    def width(self) -> int:
        return self.ur[0] - self.ll[0]

    @property
    def height(self) -> int:
        return self.ur[1] - self.ll[1]

    @property
    def area_nm2(self) -> int:
        return self.width * self.height

    @property
    def diffusion_regions(self) -> int:
        return self.nf + 1 if self.nf is not None else 0

    def translated(self, dx: int, dy: int) -> "ComponentTile":
        return replace(
            self,
            ll=(self.ll[0] + dx, self.ll[1] + dy),
            ur=(self.ur[0] + dx, self.ur[1] + dy),
            pins={r: (x + dx, y + dy, layer)
                  for r, (x, y, layer) in self.pins.items()})


@dataclass(frozen=True)
class Halo:
    """Fixed region a tile may move within; anchored at the baseline
    placement and never moved by shifts."""

    owner: str
    box: Rect
    margin: int

    def baseline_tile_box(self) -> Rect:
        m = self.margin
        return (self.box[0] + m, self.box[1] + m,
                self.box[2] - m, self.box[3] - m)


Move = tuple[str, str, int]  # component, direction, amount (nm)


@dataclass(frozen=True)
class InternalRepresentation:
    """Tile coordinates and types for one netlist at one iteration, plus
    the accumulated moves that produced them from the baseline."""

    tiles: tuple[ComponentTile, ...]
    halos: tuple[Halo, ...]
    netlist_index: int = 0
    iteration: int = 0
    moves: tuple[Move, ...] = ()

    def tile(self, name: str) -> ComponentTile:
        for t in self.tiles:
            if t.name == name:
                return t
        raise KeyError(name)

    def halo(self, name: str) -> Halo:
        for h in self.halos:
            if h.owner == name:
                return h
        raise KeyError(name)

    def tiles_box(self) -> Rect:
        xs0 = min(t.ll[0] for t in self.tiles)
        ys0 = min(t.ll[1] for t in self.tiles)
        xs1 = max(t.ur[0] for t in self.tiles)
        ys1 = max(t.ur[1] for t in self.tiles)
        return (xs0, ys0, xs1, ys1)

    def halos_box(self) -> Rect:
        xs0 = min(h.box[0] for h in self.halos)
        ys0 = min(h.box[1] for h in self.halos)
        xs1 = max(h.box[2] for h in self.halos)
        ys1 = max(h.box[3] for h in self.halos)
        return (xs0, ys0, xs1, ys1)

    def check(self) -> None:
        """Raise if a tile escapes its halo or two tiles intersect."""
        for t in self.tiles:
            if not rect_contains(self.halo(t.name).box, t.box):
                raise HaloViolation(f"{t.name} outside its halo")
        for i, a in enumerate(self.tiles):
            for b in self.tiles[i + 1:]:
                if rects_intersect(a.box, b.box):
                    raise OverlapViolation(f"{a.name} intersects {b.name}")


@dataclass(frozen=True)
class WireSegment:
    net: str
    layer: int
    rect: Rect


@dataclass(frozen=True)
class Via:
    """Connection between the two wiring layers at a point."""

    net: str
    x: int
    y: int


@dataclass(frozen=True)
class Layout:
    """Routed geometry: the IR snapshot plus wires and vias, all inside
    the die box."""

    ir: InternalRepresentation
    wires: tuple[WireSegment, ...]
    vias: tuple[Via, ...]
    die: Rect

    def geometric_signature(self):
        """Order-independent geometry for equality checks."""
        return (
            tuple(sorted((t.kind, t.box) for t in self.ir.tiles)),
            tuple(sorted((w.layer, w.rect) for w in self.wires)),
            tuple(sorted((v.x, v.y) for v in self.vias)),
            self.die,
        )


# ---------------------------------------------------------------------------
# tile construction


def _mos_tile(name: str, kind: str, w_nm: int, l_nm: int, nf: int,
              tech: TechnologyCard) -> ComponentTile:
    pitch = l_nm + tech.l_diff
    width = snap_up(nf * pitch + 2 * tech.l_diff, 2 * GRID_NM)
    channel = snap_up(w_nm / nf)
    height = channel + 2 * tech.contact_margin
    inner = nf * l_nm + (nf + 1) * tech.l_diff
    pad = (width - inner) / 2

    def region_center_x(k: int) -> int:
        return snap(pad + tech.l_diff / 2 + k * pitch)

    pins = {
        "g": (width // 2, height, LAYER_M1),
        "s": (region_center_x(0), 0, LAYER_M1),
        "d": (region_center_x(1), 0, LAYER_M1),
        "b": (width, 0, LAYER_M1),
    }
    return ComponentTile(name, kind, (0, 0), (width, height), pins, nf=nf)


def _resistor_tile(name: str, value_ohm: float,
                   tech: TechnologyCard) -> ComponentTile:
    squares = value_ohm / tech.res_sheet
    length = snap_up(max(squares * tech.res_width, GRID_NM))
    height = snap_up(tech.res_width, 2 * GRID_NM)
    pins = {
        "p": (0, height // 2, LAYER_M1),
        "n": (length, height // 2, LAYER_M1),
    }
    return ComponentTile(name, "resistor", (0, 0), (length, height), pins)


def _capacitor_tile(name: str, value_f: float,
                    tech: TechnologyCard) -> ComponentTile:
    area_um2 = value_f / tech.cap_density
    side = snap_up(max(math.sqrt(area_um2) * 1000, 2 * GRID_NM), 2 * GRID_NM)
    pins = {
        "p": (0, side // 2, LAYER_M1),
        "n": (side, side // 2, LAYER_M1),
    }
    return ComponentTile(name, "capacitor", (0, 0), (side, side), pins)


def build_tiles(netlist: ConcreteNetlist,
                tech: TechnologyCard) -> list[ComponentTile]:
    """One origin-anchored tile per device, in netlist order."""
    tiles = []
    for dev in netlist.devices():
        if dev.is_mos:
            tiles.append(_mos_tile(dev.name, dev.kind, dev.w_nm, dev.l_nm,
                                   dev.nf, tech))
        elif dev.kind == "resistor":
            tiles.append(_resistor_tile(dev.name, dev.value, tech))
        else:
            tiles.append(_capacitor_tile(dev.name, dev.value, tech))
    return tiles


def make_ir(placed_tiles: list[ComponentTile], tech: TechnologyCard,
            netlist_index: int = 0) -> InternalRepresentation:
    """Wrap placed tiles into a baseline IR, deriving each halo from the
    tile's baseline position."""
    m = tech.halo_margin
    halos = tuple(
        Halo(t.name, (t.ll[0] - m, t.ll[1] - m, t.ur[0] + m, t.ur[1] + m), m)
        for t in placed_tiles)
    ir = InternalRepresentation(tuple(placed_tiles), halos, netlist_index)
    ir.check()
    return ir


# ---------------------------------------------------------------------------
# perturbation


def shift_component(ir: InternalRepresentation, name: str, direction: str,
                    amount: int = 100) -> InternalRepresentation:
    """Translate one tile by `amount` nm in a cardinal direction.

    Returns a new IR with the move appended to the log. Raises
    HaloViolation if the tile would leave its halo, OverlapViolation if
    it would intersect another tile (shared edges count, so boundary
    pins of distinct components can never coincide).
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    if amount <= 0:
        raise ValueError("shift amount must be positive")
    ux, uy = _DELTA[direction]
    moved = ir.tile(name).translated(ux * amount, uy * amount)
    if not rect_contains(ir.halo(name).box, moved.box):
        raise HaloViolation(f"{name} would leave its halo moving {direction}")
    for other in ir.tiles:
        if other.name != name and rects_intersect(moved.box, other.box):
            raise OverlapViolation(f"{name} would intersect {other.name}")
    tiles = tuple(moved if t.name == name else t for t in ir.tiles)
    return replace(ir, tiles=tiles, iteration=ir.iteration + 1,
                   moves=ir.moves + ((name, direction, amount),))


def replay_moves(ir: InternalRepresentation) -> InternalRepresentation:
    """Rebuild the current IR by replaying the moves log from the
    baseline positions recorded in the halos."""
    tiles = []
    for t in ir.tiles:
        base = ir.halo(t.name).baseline_tile_box()
        tiles.append(t.translated(base[0] - t.ll[0], base[1] - t.ll[1]))
    state = replace(ir, tiles=tuple(tiles), iteration=0, moves=())
    for name, direction, amount in ir.moves:
        state = shift_component(state, name, direction, amount)
    return replace(state, iteration=ir.iteration)


# ---------------------------------------------------------------------------
# serialization


def ir_to_json(ir: InternalRepresentation) -> str:
    doc = {
        "netlist_index": ir.netlist_index,
        "iteration": ir.iteration,
        "tiles": [
            {
                "name": t.name,
                "kind": t.kind,
                "ll": list(t.ll),
                "ur": list(t.ur),
                "nf": t.nf,
                "pins": {r: list(p) for r, p in sorted(t.pins.items())},
                "halo": list(ir.halo(t.name).box),
                "halo_margin": ir.halo(t.name).margin,
            }
            for t in ir.tiles
        ],
        "moves": [list(m) for m in ir.moves],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def ir_from_json(text: str) -> InternalRepresentation:
    doc = json.loads(text)
    tiles = []
    halos = []
    for entry in doc["tiles"]:
        tiles.append(ComponentTile(
            entry["name"], entry["kind"], tuple(entry["ll"]),
            tuple(entry["ur"]),
            {r: tuple(p) for r, p in entry["pins"].items()},
            nf=entry["nf"]))
        halos.append(Halo(entry["name"], tuple(entry["halo"]),
                          entry["halo_margin"]))
    return InternalRepresentation(
        tuple(tiles), tuple(halos), doc["netlist_index"], doc["iteration"],
        tuple((m[0], m[1], m[2]) for m in doc["moves"]))
