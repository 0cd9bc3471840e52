import math
from dataclasses import replace

import pytest

from layoutlab.acsim import Circuit, ac_sweep, small_signal
from layoutlab.geometry import (ComponentTile, Halo, InternalRepresentation,
                                Layout, WireSegment, build_tiles, make_ir)
from layoutlab.netlist import apply_fingers, parse_template
from layoutlab.pex import ParasiticNetwork, annotate, extract_parasitics
from layoutlab.tech import TechnologyCard

# wire width = pitch - spacing = 300 nm, matching the worked example
WIDE = TechnologyCard(wire_pitch=400, min_spacing=100)


def _two_terminal_layout(wires, die=(0, 0, 40000, 40000)):
    """Netlist R1 a b plus a hand-built tile whose p pin sits at (0, 200)
    and n pin at (-800, 200); wires arrive as given."""
    netlist = apply_fingers(parse_template("R1 a b 10k"), {})
    tile = ComponentTile("R1", "resistor", (-800, 0), (0, 400),
                         {"p": (0, 200, 1), "n": (-800, 200, 1)})
    ir = InternalRepresentation((tile,), (Halo("R1", (-800, 0, 0, 400), 0),))
    return netlist, Layout(ir, tuple(wires), (), die)


def _h_wire(net, y, x0, x1, width=300):
    half = width // 2
    return WireSegment(net, 1, (x0 - half, y - half, x1 + half, y + half))


def test_segment_resistance_formula():
    netlist, layout = _two_terminal_layout([_h_wire("a", 200, 0, 10000)])
    pn = extract_parasitics(layout, netlist, WIDE)
    rs = pn.nets["a"].resistors
    assert len(rs) == 1
    n0, n1, r = rs[0]
    assert r == pytest.approx(0.1 * (10.0 / 0.3), rel=1e-12)
    assert "a" in (n0, n1)


def test_segment_ground_capacitance_formula():
    netlist, layout = _two_terminal_layout([_h_wire("a", 200, 0, 10000)])
    pn = extract_parasitics(layout, netlist, WIDE)
    caps = pn.nets["a"].caps
    assert len(caps) == 2  # lumped pi: half at each end
    area = 10.0 * 0.3
    perimeter = 2 * (10.0 + 0.3)
    total = WIDE.cap_area[1] * area + WIDE.cap_fringe[1] * perimeter
    assert sum(c for _n, c in caps) == pytest.approx(total, rel=1e-12)
    assert caps[0][1] == pytest.approx(caps[1][1], rel=1e-12)


def test_coincident_pins_produce_nothing():
    netlist, layout = _two_terminal_layout([])
    pn = extract_parasitics(layout, netlist, WIDE)
    assert pn.nets["a"].resistors == [] and pn.nets["a"].caps == []
    assert pn.nets["a"].terminal_node[("R1", "p")] == "a"


def _parallel_layout(gap_nm):
    netlist = apply_fingers(
        parse_template("R1 a b 10k\nR2 c d 10k"), {})
    t1 = ComponentTile("R1", "resistor", (-800, 0), (0, 400),
                       {"p": (0, 200, 1), "n": (-800, 200, 1)})
    y2 = 200 + 300 + gap_nm
    t2 = ComponentTile("R2", "resistor", (-800, y2 - 200), (0, y2 + 200),
                       {"p": (0, y2, 1), "n": (-800, y2, 1)})
    ir = InternalRepresentation(
        (t1, t2), (Halo("R1", t1.box, 0), Halo("R2", t2.box, 0)))
    wires = (_h_wire("a", 200, 0, 10000), _h_wire("c", y2, 0, 10000))
    return netlist, Layout(ir, wires, (), (0, 0, 40000, 40000))


def test_coupling_formula_and_monotonicity():
    values = []
    for gap in (100, 150, 200):
        netlist, layout = _parallel_layout(gap)
        pn = extract_parasitics(layout, netlist, WIDE)
        assert len(pn.coupling) == 1
        _na, _a, _nb, _b, c = pn.coupling[0]
        expected = WIDE.cap_coupling * 10.0 * (WIDE.min_spacing / gap)
        assert c == pytest.approx(expected, rel=1e-12)
        values.append(c)
    assert values[0] > values[1] > values[2]


def test_coupling_cut_off_beyond_twice_spacing():
    netlist, layout = _parallel_layout(201)
    pn = extract_parasitics(layout, netlist, WIDE)
    assert pn.coupling == []


def test_coupling_symmetric_in_the_two_segments():
    netlist, layout = _parallel_layout(100)
    pn = extract_parasitics(layout, netlist, WIDE)
    c_ab = pn.coupling[0][4]
    # mirror the construction: swap which net runs on which track
    netlist2, layout2 = _parallel_layout(100)
    swapped = tuple(
        WireSegment({"a": "c", "c": "a"}[w.net], w.layer, w.rect)
        for w in layout2.wires)
    pn2 = extract_parasitics(
        Layout(layout2.ir, swapped, (), layout2.die), netlist2, WIDE)
    assert pn2.coupling[0][4] == pytest.approx(c_ab, rel=1e-12)


def test_scaling_length_scales_resistance():
    netlist, layout1 = _two_terminal_layout([_h_wire("a", 200, 0, 10000)])
    _nl, layout3 = _two_terminal_layout([_h_wire("a", 200, 0, 30000)])
    r1 = extract_parasitics(layout1, netlist, WIDE).nets["a"].resistors[0][2]
    r3 = extract_parasitics(layout3, netlist, WIDE).nets["a"].resistors[0][2]
    assert r3 == pytest.approx(3 * r1, rel=1e-12)


def test_annotate_empty_network_is_identity(ota_netlist):
    assert annotate(ota_netlist, ParasiticNetwork.empty()) == \
        Circuit.from_netlist(ota_netlist)


def test_annotate_one_segment_structure():
    netlist, layout = _two_terminal_layout([_h_wire("a", 200, 0, 10000)])
    pn = extract_parasitics(layout, netlist, WIDE)
    circuit = annotate(netlist, pn)
    names = [el.name for el in circuit.elements]
    assert names == ["R1", "RPX0", "CPX0", "CPX1"]
    # node count grew by one: the far wire end
    assert "a#1" in Circuit.nodes(circuit)


def test_junction_caps_attach_at_terminals(tech):
    netlist = apply_fingers(parse_template("M1 out in 0 0 W=2u L=0.2u"),
                            {"M1": 4})
    tiles = build_tiles(netlist, tech)
    ir = make_ir([t.translated(1000, 1000) for t in tiles], tech)
    layout = Layout(ir, (), (), (0, 0, 20000, 20000))
    pn = extract_parasitics(layout, netlist, tech)
    model = small_signal(netlist.devices()[0], tech)
    assert pn.nets["out"].caps == [("out", model.cdb)]
    # the source junction lands on whatever node holds the s pin
    s_node = pn.nets["0"].terminal_node[("M1", "s")]
    assert pn.nets["0"].caps == [(s_node, model.csb)]


def test_zero_parasitics_network_is_empty(cs_baseline, cs_netlist):
    zp = TechnologyCard().zero_parasitics()
    pn = extract_parasitics(cs_baseline.record.layout, cs_netlist, zp)
    assert pn.is_empty
    assert annotate(cs_netlist, pn) == Circuit.from_netlist(cs_netlist)


def _scaled(pn: ParasiticNetwork, s: float) -> ParasiticNetwork:
    out = ParasiticNetwork()
    for net, p in pn.nets.items():
        q = replace_net(p, s)
        out.nets[net] = q
    out.coupling = [(na, a, nb, b, c * s) for na, a, nb, b, c in pn.coupling]
    return out


def replace_net(p, s):
    from layoutlab.pex import NetParasitics
    return NetParasitics(
        nodes=list(p.nodes),
        terminal_node=dict(p.terminal_node),
        resistors=[(a, b, r * s) for a, b, r in p.resistors],
        caps=[(n, c * s) for n, c in p.caps])


def test_post_trace_converges_to_pre(cs_baseline, cs_netlist,
                                     common_source, tech):
    # the deliberately exaggerated desk parasitics put the baseline
    # divergence near 0.2 V, so continuity is checked as near-linear
    # decay plus the sub-1e-6 bound at a deep scaling
    pre = cs_baseline.record.pre_trace
    pn = extract_parasitics(cs_baseline.record.layout, cs_netlist, tech)
    div = {}
    for s in (1.0, 1e-3, 1e-9):
        post = ac_sweep(annotate(cs_netlist, _scaled(pn, s)),
                        common_source.testbench, tech)
        div[s] = max(abs(a - b) for a, b in zip(pre.mags, post.mags))
    assert div[1e-3] < 2e-3 * div[1.0]
    assert div[1e-9] < 1e-6


def test_annotated_netlist_simulates_finite(ota_baseline, ota_netlist,
                                            ota, tech):
    pn = extract_parasitics(ota_baseline.record.layout, ota_netlist, tech)
    trace = ac_sweep(annotate(ota_netlist, pn), ota.testbench, tech)
    assert all(math.isfinite(m) for m in trace.mags)
