"""Geometric parasitic extraction.

Each net's wiring is cut into electrical sub-segments at pins, vias, and
junctions. A sub-segment contributes a series resistance (sheet
resistance times squares) and a ground capacitance (area plus fringe)
split half onto each end node. Facing parallel same-layer runs of
different nets within twice the minimum spacing contribute a coupling
capacitance that falls off linearly with spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .acsim import Capacitor, Circuit, Element, Mos, Resistor, small_signal
from .geometry import Layout
from .netlist import ConcreteNetlist
from .tech import TechnologyCard

# below this, a segment resistance is treated as an ideal connection
R_COLLAPSE_OHM = 1e-12
# annotation treats these as ideal/absent: keeps the MNA well scaled
# when parasitic values are driven toward zero
R_MERGE_OHM = 1e-6
C_DROP_F = 1e-22

Point = tuple[int, int]
NodeKey = tuple[int, int, int]  # layer, x, y


@dataclass(frozen=True)
class _SubSegment:
    layer: int
    axis: str          # "h" or "v"
    fixed: int         # y for horizontal, x for vertical (centerline, nm)
    a0: int
    a1: int            # centerline span along the axis, a0 < a1
    width: int

    @property
    def length(self) -> int:
        return self.a1 - self.a0


@dataclass
class NetParasitics:
    """RC network of one net, nodes named canonically: the node holding
    the first device terminal keeps the net's name."""

    nodes: list[str] = field(default_factory=list)
    terminal_node: dict[tuple[str, str], str] = field(default_factory=dict)
    resistors: list[tuple[str, str, float]] = field(default_factory=list)
    caps: list[tuple[str, float]] = field(default_factory=list)


@dataclass
class ParasiticNetwork:
    nets: dict[str, NetParasitics] = field(default_factory=dict)
    # (net_a, node_a, net_b, node_b, farad)
    coupling: list[tuple[str, str, str, str, float]] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return (not self.coupling
                and all(not p.resistors and not p.caps
                        for p in self.nets.values()))

    @staticmethod
    def empty() -> "ParasiticNetwork":
        return ParasiticNetwork()


def _centerline(rect, width: int) -> tuple[str, int, int, int]:
    llx, lly, urx, ury = rect
    half = width // 2
    if urx - llx >= ury - lly:
        return "h", (lly + ury) // 2, llx + half, urx - half
    return "v", (llx + urx) // 2, lly + half, ury - half


class _UF:
    def __init__(self):
        self.parent: dict[NodeKey, NodeKey] = {}

    def add(self, k: NodeKey) -> None:
        self.parent.setdefault(k, k)

    def find(self, k: NodeKey) -> NodeKey:
        self.add(k)
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a: NodeKey, b: NodeKey) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def extract_parasitics(layout: Layout, netlist: ConcreteNetlist,
                       tech: TechnologyCard) -> ParasiticNetwork:
    """Derive the RC network of every routed net. Deterministic."""
    width = tech.wire_width
    net_terminals = netlist.net_terminals()

    wires_by_net: dict[str, list] = {}
    for w in layout.wires:
        wires_by_net.setdefault(w.net, []).append(w)
    vias_by_net: dict[str, list[Point]] = {}
    for v in layout.vias:
        vias_by_net.setdefault(v.net, []).append((v.x, v.y))

    network = ParasiticNetwork()
    # per net: (sub-segment, end node name, end node name)
    sub_segments: dict[str, list[tuple[_SubSegment, str, str]]] = {}

    for net in sorted(net_terminals):
        terms = sorted(net_terminals[net])
        pins: dict[tuple[str, str], Point] = {}
        for device, role in terms:
            x, y, _layer = layout.ir.tile(device).pins[role]
            pins[(device, role)] = (x, y)
        wires = wires_by_net.get(net, [])
        vias = vias_by_net.get(net, [])

        # split points available per layer: segment ends, vias, pins (M1)
        points_by_layer: dict[int, set[Point]] = {1: set(), 2: set()}
        lines = []
        for w in wires:
            axis, fixed, a0, a1 = _centerline(w.rect, width)
            lines.append((w.layer, axis, fixed, a0, a1))
            ends = ((a0, fixed), (a1, fixed)) if axis == "h" \
                else ((fixed, a0), (fixed, a1))
            points_by_layer[w.layer].update(ends)
        for p in vias:
            points_by_layer[1].add(p)
            points_by_layer[2].add(p)
        points_by_layer[1].update(pins.values())

        uf = _UF()
        for p in vias:
            uf.union((1, *p), (2, *p))

        subs: list[tuple[_SubSegment, NodeKey, NodeKey]] = []
        for layer, axis, fixed, a0, a1 in sorted(lines):
            cuts = {a0, a1}
            for px, py in points_by_layer[layer]:
                if axis == "h" and py == fixed and a0 <= px <= a1:
                    cuts.add(px)
                elif axis == "v" and px == fixed and a0 <= py <= a1:
                    cuts.add(py)
            cut_list = sorted(cuts)
            for c0, c1 in zip(cut_list, cut_list[1:]):
                if c1 <= c0:
                    continue
                p0 = (c0, fixed) if axis == "h" else (fixed, c0)
                p1 = (c1, fixed) if axis == "h" else (fixed, c1)
                k0, k1 = (layer, *p0), (layer, *p1)
                uf.add(k0)
                uf.add(k1)
                subs.append((_SubSegment(layer, axis, fixed, c0, c1, width),
                             k0, k1))
        # ideal connections collapse nodes before R emission
        kept: list[tuple[_SubSegment, NodeKey, NodeKey]] = []
        for sub, k0, k1 in subs:
            squares = sub.length / sub.width
            if squares * tech.sheet_resistance[sub.layer] < R_COLLAPSE_OHM:
                uf.union(k0, k1)
            else:
                kept.append((sub, k0, k1))

        # canonical node names
        roots: list[NodeKey] = sorted(
            {uf.find(k) for k in list(uf.parent)}
            | {uf.find((1, *p)) for p in pins.values()})
        names: dict[NodeKey, str] = {}
        if terms:
            first_pin_root = uf.find((1, *pins[terms[0]]))
            names[first_pin_root] = net
        counter = 1
        for root in roots:
            if root not in names:
                names[root] = f"{net}#{counter}"
                counter += 1

        parasitics = NetParasitics(nodes=sorted(set(names.values())))
        for (device, role), p in pins.items():
            parasitics.terminal_node[(device, role)] = names[uf.find((1, *p))]
        named_subs: list[tuple[_SubSegment, str, str]] = []
        for sub, k0, k1 in kept:
            n0, n1 = names[uf.find(k0)], names[uf.find(k1)]
            named_subs.append((sub, n0, n1))
            length_um = sub.length / 1000.0
            width_um = sub.width / 1000.0
            r = tech.sheet_resistance[sub.layer] * (length_um / width_um)
            cg = (tech.cap_area[sub.layer] * length_um * width_um
                  + tech.cap_fringe[sub.layer] * 2 * (length_um + width_um))
            if n0 != n1 and r >= R_COLLAPSE_OHM:
                parasitics.resistors.append((n0, n1, r))
            if cg > 0:
                parasitics.caps.append((n0, cg / 2))
                parasitics.caps.append((n1, cg / 2))
        network.nets[net] = parasitics
        sub_segments[net] = named_subs

    _add_junction_caps(network, netlist, tech)
    _add_coupling(network, sub_segments, tech)
    return network


def _add_junction_caps(network: ParasiticNetwork, netlist: ConcreteNetlist,
                       tech: TechnologyCard) -> None:
    """Drain/source junction capacitance of the diffusion regions,
    attached at the terminal's extracted node.

    The bulk terminal is treated as AC ground, which holds whenever bulk
    ties to a supply or ground net. More fingers share more diffusion,
    so these caps shrink as nf grows."""
    for dev in netlist.devices():
        if not dev.is_mos:
            continue
        model = small_signal(dev, tech)
        for role, cap in (("d", model.cdb), ("s", model.csb)):
            if cap <= 0:
                continue
            net = dev.terminals[dev.terminal_roles.index(role)]
            parasitics = network.nets[net]
            node = parasitics.terminal_node.get((dev.name, role), net)
            parasitics.caps.append((node, cap))


def _add_coupling(network: ParasiticNetwork,
                  sub_segments: dict[str, list[tuple[_SubSegment, str, str]]],
                  tech: TechnologyCard) -> None:
    """Coupling caps between facing parallel same-layer runs of distinct
    nets: C = c_coupling * overlap * (min_spacing / spacing), included
    while spacing <= 2 * min_spacing. The cap attaches to the end node
    of each run nearer the overlap midpoint."""
    if tech.cap_coupling <= 0:
        return
    nets = sorted(sub_segments)
    for ai, net_a in enumerate(nets):
        for net_b in nets[ai + 1:]:
            for sub_a, an0, an1 in sub_segments[net_a]:
                for sub_b, bn0, bn1 in sub_segments[net_b]:
                    if (sub_a.layer != sub_b.layer
                            or sub_a.axis != sub_b.axis):
                        continue
                    overlap = (min(sub_a.a1, sub_b.a1)
                               - max(sub_a.a0, sub_b.a0))
                    if overlap <= 0:
                        continue
                    spacing = abs(sub_a.fixed - sub_b.fixed) \
                        - (sub_a.width + sub_b.width) // 2
                    if spacing <= 0 or spacing > 2 * tech.min_spacing:
                        continue
                    c = (tech.cap_coupling * (overlap / 1000.0)
                         * (tech.min_spacing / spacing))
                    mid = (max(sub_a.a0, sub_b.a0)
                           + min(sub_a.a1, sub_b.a1)) / 2
                    node_a = an0 if abs(sub_a.a0 - mid) <= abs(sub_a.a1 - mid) \
                        else an1
                    node_b = bn0 if abs(sub_b.a0 - mid) <= abs(sub_b.a1 - mid) \
                        else bn1
                    network.coupling.append((net_a, node_a, net_b, node_b, c))


# ---------------------------------------------------------------------------
# annotation


def annotate(netlist: ConcreteNetlist, pn: ParasiticNetwork) -> Circuit:
    """Post-layout circuit: device terminals land on their extracted
    nodes and the RC network joins the element list. With an empty
    network the result equals the plain pre-layout circuit.

    Near-ideal parasitics collapse: resistances below R_MERGE_OHM merge
    their nodes (preferring the plain net name) and capacitances below
    C_DROP_F vanish, so scaling the network toward zero converges to
    the pre-layout circuit without wrecking the solve's conditioning."""
    alias: dict[str, str] = {}

    def resolve(node: str) -> str:
        seen = []
        while node in alias:
            seen.append(node)
            node = alias[node]
        for s in seen:
            alias[s] = node
        return node

    def merge(a: str, b: str) -> None:
        ra, rb = resolve(a), resolve(b)
        if ra == rb:
            return
        # prefer the un-suffixed net name as the survivor
        keep, drop = sorted((ra, rb), key=lambda n: ("#" in n, n))
        alias[drop] = keep

    for net in sorted(pn.nets):
        for n0, n1, ohm in pn.nets[net].resistors:
            if ohm < R_MERGE_OHM:
                merge(n0, n1)

    def node_for(device: str, role: str, net: str) -> str:
        parasitics = pn.nets.get(net)
        if parasitics is None:
            return net
        return resolve(parasitics.terminal_node.get((device, role), net))

    elements: list[Element] = []
    for dev in netlist.devices():
        mapped = tuple(node_for(dev.name, role, net)
                       for role, net in zip(dev.terminal_roles, dev.terminals))
        if dev.is_mos:
            elements.append(Mos(dev.name, dev.kind, *mapped,
                                dev.w_nm, dev.l_nm, dev.nf))
        elif dev.kind == "resistor":
            elements.append(Resistor(dev.name, *mapped, dev.value))
        else:
            elements.append(Capacitor(dev.name, *mapped, dev.value))

    r_i = c_i = x_i = 0
    for net in sorted(pn.nets):
        parasitics = pn.nets[net]
        for n0, n1, ohm in parasitics.resistors:
            a, b = resolve(n0), resolve(n1)
            if ohm >= R_MERGE_OHM and a != b:
                elements.append(Resistor(f"RPX{r_i}", a, b, ohm))
                r_i += 1
        for node, farad in parasitics.caps:
            if farad >= C_DROP_F:
                elements.append(Capacitor(f"CPX{c_i}", resolve(node), "0",
                                          farad))
                c_i += 1
    for _net_a, node_a, _net_b, node_b, farad in pn.coupling:
        a, b = resolve(node_a), resolve(node_b)
        if farad >= C_DROP_F and a != b:
            elements.append(Capacitor(f"CCX{x_i}", a, b, farad))
            x_i += 1
    return Circuit(tuple(elements))
