"""Geometric design-rule checking and layout-versus-schematic comparison.

Connectivity is derived purely from geometry: same-layer shapes that
touch belong to one electrical net, and vias bridge the two wiring
layers. LVS then asks for a label-aware isomorphism between the
extracted device/net incidence and the reference netlist, so renaming
symmetric devices never causes a false mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

from .gds import MARK_HALF
from .geometry import Layout, Rect
from .netlist import ConcreteNetlist
from .tech import TechnologyCard


@dataclass(frozen=True)
class Violation:
    rule: str           # spacing | width | grid
    layer: int
    where: Rect
    detail: str = ""

    def render(self) -> str:
        coords = ",".join(str(c) for c in self.where)
        text = f"{self.rule} layer={self.layer} at=({coords})"
        return text + (f" {self.detail}" if self.detail else "")


def render_report(violations: list[Violation]) -> str:
    return "\n".join(v.render() for v in violations) + ("\n" if violations else "")


@dataclass(frozen=True)
class _Shape:
    layer: int
    rect: Rect
    kind: str                # wire | via | pin
    pin: tuple[str, str] | None = None   # (device, role) for pins
    via_id: int | None = None            # joins the two copies of a via


def _touch(a: Rect, b: Rect) -> bool:
    return (a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3])


def _gap(a: Rect, b: Rect) -> tuple[int, int]:
    dx = max(a[0] - b[2], b[0] - a[2], 0)
    dy = max(a[1] - b[3], b[1] - a[3], 0)
    return dx, dy


def _mark(x: int, y: int) -> Rect:
    return (x - MARK_HALF, y - MARK_HALF, x + MARK_HALF, y + MARK_HALF)


def _collect_shapes(layout: Layout) -> list[_Shape]:
    shapes: list[_Shape] = []
    for wire in layout.wires:
        shapes.append(_Shape(wire.layer, wire.rect, "wire"))
    for vid, via in enumerate(layout.vias):
        rect = _mark(via.x, via.y)
        shapes.append(_Shape(1, rect, "via", via_id=vid))
        shapes.append(_Shape(2, rect, "via", via_id=vid))
    for tile in layout.ir.tiles:
        for role, (x, y, layer) in sorted(tile.pins.items()):
            shapes.append(_Shape(layer, _mark(x, y), "pin", (tile.name, role)))
    return shapes


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _connected_groups(shapes: list[_Shape]) -> list[int]:
    """Group id per shape: same-layer touching shapes united, and the
    two layer copies of each via united (they share kind 'via' and rect)."""
    uf = _UnionFind(len(shapes))
    by_layer: dict[int, list[int]] = {}
    for i, s in enumerate(shapes):
        by_layer.setdefault(s.layer, []).append(i)
    for indices in by_layer.values():
        for ai, a in enumerate(indices):
            for b in indices[ai + 1:]:
                if _touch(shapes[a].rect, shapes[b].rect):
                    uf.union(a, b)
    by_via: dict[int, list[int]] = {}
    for i, s in enumerate(shapes):
        if s.via_id is not None:
            by_via.setdefault(s.via_id, []).append(i)
    for indices in by_via.values():
        for a, b in zip(indices, indices[1:]):
            uf.union(a, b)
    return [uf.find(i) for i in range(len(shapes))]


@dataclass(frozen=True)
class ExtractedNetlist:
    """Device/terminal incidence on anonymous extracted nets."""

    devices: tuple[tuple[str, str, dict[str, int]], ...]  # name, kind, role->net
    net_count: int


def extract_connectivity(layout: Layout) -> ExtractedNetlist:
    shapes = _collect_shapes(layout)
    groups = _connected_groups(shapes)
    renumber: dict[int, int] = {}
    devices: dict[str, tuple[str, dict[str, int]]] = {}
    for tile in layout.ir.tiles:
        devices[tile.name] = (tile.kind, {})
    for shape, group in zip(shapes, groups):
        if shape.kind != "pin":
            continue
        net = renumber.setdefault(group, len(renumber))
        device, role = shape.pin
        devices[device][1][role] = net
    # isolated groups without pins are stray metal; count them anyway
    total = len(renumber) + sum(1 for g in set(groups) if g not in renumber)
    return ExtractedNetlist(
        tuple((name, kind, roles) for name, (kind, roles)
              in sorted(devices.items())),
        total)


# ---------------------------------------------------------------------------
# DRC


def drc(layout: Layout, tech: TechnologyCard) -> list[Violation]:
    """Spacing, width, and on-grid checks over the wiring layers.

    Spacing applies between shapes of different connectivity groups;
    short circuits therefore show up in LVS rather than here.
    """
    violations: list[Violation] = []
    shapes = _collect_shapes(layout)
    groups = _connected_groups(shapes)

    for wire in layout.wires:
        w = min(wire.rect[2] - wire.rect[0], wire.rect[3] - wire.rect[1])
        if w < tech.wire_width:
            violations.append(Violation("width", wire.layer, wire.rect,
                                        f"drawn={w} min={tech.wire_width}"))
    q = tech.grid_quantum
    for shape in shapes:
        if shape.kind == "pin":
            continue
        if any(c % q for c in shape.rect):
            violations.append(Violation("grid", shape.layer, shape.rect,
                                        f"quantum={q}"))
    by_layer: dict[int, list[int]] = {}
    for i, s in enumerate(shapes):
        by_layer.setdefault(s.layer, []).append(i)
    for layer in sorted(by_layer):
        indices = by_layer[layer]
        for ai, a in enumerate(indices):
            for b in indices[ai + 1:]:
                if groups[a] == groups[b]:
                    continue
                dx, dy = _gap(shapes[a].rect, shapes[b].rect)
                if dx < tech.min_spacing and dy < tech.min_spacing:
                    violations.append(Violation(
                        "spacing", layer, shapes[a].rect,
                        f"gap=({dx},{dy}) min={tech.min_spacing}"))
    return violations


# ---------------------------------------------------------------------------
# LVS


@dataclass(frozen=True)
class LvsReport:
    passed: bool
    diff: tuple[str, ...] = ()

    def render(self) -> str:
        head = "LVS pass" if self.passed else "LVS FAIL"
        return "\n".join([head, *self.diff]) + "\n"


def _reference_incidence(netlist: ConcreteNetlist
                         ) -> list[tuple[str, str, dict[str, str]]]:
    out = []
    for dev in netlist.devices():
        roles = dict(zip(dev.terminal_roles, dev.terminals))
        out.append((dev.name, dev.kind, roles))
    return out


def _orientations(kind: str, roles: dict) -> list[dict]:
    """Terminal permutations electrically equivalent for matching
    purposes: resistor/capacitor terminals are interchangeable."""
    if kind in ("resistor", "capacitor"):
        return [roles, {"p": roles["n"], "n": roles["p"]}]
    return [roles]


def _isomorphic(ref: list[tuple[str, str, dict[str, str]]],
                ext: list[tuple[str, str, dict[str, int]]]) -> bool:
    """Backtracking search for a device bijection inducing a consistent
    net bijection; devices are labelled by kind, terminals by role."""
    if len(ref) != len(ext):
        return False
    if sorted(k for _n, k, _r in ref) != sorted(k for _n, k, _r in ext):
        return False
    order = sorted(range(len(ref)), key=lambda i: (ref[i][1], ref[i][0]))

    def backtrack(pos: int, used: set[int],
                  net_map: dict[str, int], rev: dict[int, str]) -> bool:
        if pos == len(order):
            return True
        _name, kind, roles = ref[order[pos]]
        for j, (_ename, ekind, eroles) in enumerate(ext):
            if j in used or ekind != kind or set(eroles) != set(roles):
                continue
            for oriented in _orientations(kind, eroles):
                trial_map = dict(net_map)
                trial_rev = dict(rev)
                ok = True
                for role, net in roles.items():
                    enet = oriented[role]
                    if trial_map.get(net, enet) != enet \
                            or trial_rev.get(enet, net) != net:
                        ok = False
                        break
                    trial_map[net] = enet
                    trial_rev[enet] = net
                if ok and backtrack(pos + 1, used | {j}, trial_map, trial_rev):
                    return True
        return False

    return backtrack(0, set(), {}, {})


def _name_based_diff(ref: list[tuple[str, str, dict[str, str]]],
                     ext: list[tuple[str, str, dict[str, int]]]) -> list[str]:
    """Split/merged/missing net report using device-name correspondence;
    available when tiles carry real device names."""
    ext_by_name = {name: roles for name, _k, roles in ext}
    if set(ext_by_name) != {name for name, _k, _r in ref}:
        return ["device sets differ; no name-based diff available"]
    net_to_groups: dict[str, set[int]] = {}
    group_to_nets: dict[int, set[str]] = {}
    diff = []
    for name, _kind, roles in ref:
        for role, net in roles.items():
            if role not in ext_by_name[name]:
                diff.append(f"missing terminal {name}.{role} (net {net})")
                continue
            g = ext_by_name[name][role]
            net_to_groups.setdefault(net, set()).add(g)
            group_to_nets.setdefault(g, set()).add(net)
    for net in sorted(net_to_groups):
        if len(net_to_groups[net]) > 1:
            diff.append(f"split net {net}: {len(net_to_groups[net])} pieces")
    for g in sorted(group_to_nets):
        if len(group_to_nets[g]) > 1:
            merged = ",".join(sorted(group_to_nets[g]))
            diff.append(f"merged nets: {merged}")
    return diff


def lvs(extracted: ExtractedNetlist, netlist: ConcreteNetlist) -> LvsReport:
    """Pass iff the extracted incidence is isomorphic to the netlist."""
    ref = _reference_incidence(netlist)
    ext = [(name, kind, dict(roles)) for name, kind, roles
           in extracted.devices]
    for name, kind, roles in ext:
        expected = 4 if kind in ("nmos", "pmos") else 2
        if len(roles) < expected:
            return LvsReport(False, tuple(
                [f"dangling terminals on {name}"]
                + _name_based_diff(ref, ext)))
    if _isomorphic(ref, ext):
        return LvsReport(True)
    return LvsReport(False, tuple(_name_based_diff(ref, ext)))
