import pytest

from layoutlab.geometry import (InternalRepresentation, Layout, WireSegment)
from layoutlab.netlist import parse_concrete
from layoutlab.verify import (drc, extract_connectivity, lvs, render_report)


def _wire_layout(wires, die=(0, 0, 10000, 10000)):
    ir = InternalRepresentation((), ())
    return Layout(ir, tuple(wires), (), die)


def test_same_net_abutting_segments_clean(tech):
    a = WireSegment("n", 1, (75, 175, 1025, 225))
    b = WireSegment("n", 1, (975, 175, 1025, 1225))
    assert drc(_wire_layout([a, b]), tech) == []


def test_different_nets_too_close_flagged(tech):
    a = WireSegment("a", 1, (0, 0, 1000, 50))
    b = WireSegment("b", 1, (0, 80, 1000, 130))  # 30 nm gap < 50
    report = drc(_wire_layout([a, b]), tech)
    assert len(report) == 1
    v = report[0]
    assert v.rule == "spacing" and v.layer == 1
    assert v.where == (0, 0, 1000, 50)
    assert "30" in v.detail


def test_min_spacing_exactly_met_is_clean(tech):
    a = WireSegment("a", 1, (0, 0, 1000, 50))
    b = WireSegment("b", 1, (0, 100, 1000, 150))  # exactly 50 nm
    assert drc(_wire_layout([a, b]), tech) == []


def test_different_layers_do_not_interact(tech):
    a = WireSegment("a", 1, (0, 0, 1000, 50))
    b = WireSegment("b", 2, (0, 60, 1000, 110))
    assert drc(_wire_layout([a, b]), tech) == []


def test_width_violation(tech):
    skinny = WireSegment("a", 1, (0, 0, 1000, 40))
    report = drc(_wire_layout([skinny]), tech)
    assert [v.rule for v in report] == ["width"]


def test_off_grid_violation(tech):
    crooked = WireSegment("a", 1, (3, 0, 1003, 50))
    report = drc(_wire_layout([crooked]), tech)
    assert any(v.rule == "grid" for v in report)


def test_report_rendering(tech):
    a = WireSegment("a", 1, (0, 0, 1000, 50))
    b = WireSegment("b", 1, (0, 80, 1000, 130))
    text = render_report(drc(_wire_layout([a, b]), tech))
    assert text.startswith("spacing layer=1 at=(0,0,1000,50)")


def test_baseline_layout_passes_lvs(ota_baseline, ota_netlist):
    extracted = extract_connectivity(ota_baseline.record.layout)
    report = lvs(extracted, ota_netlist)
    assert report.passed, report.diff


def test_deleting_any_segment_fails_lvs(ota_baseline, ota_netlist):
    layout = ota_baseline.record.layout
    for k in range(len(layout.wires)):
        mutated = Layout(layout.ir,
                         layout.wires[:k] + layout.wires[k + 1:],
                         layout.vias, layout.die)
        report = lvs(extract_connectivity(mutated), ota_netlist)
        assert not report.passed, f"segment {k} removal went unnoticed"


def test_single_deletion_reports_one_split_net(ota_baseline, ota_netlist):
    layout = ota_baseline.record.layout
    mutated = Layout(layout.ir, layout.wires[1:], layout.vias, layout.die)
    report = lvs(extract_connectivity(mutated), ota_netlist)
    assert not report.passed
    splits = [line for line in report.diff if line.startswith("split net")]
    assert len(splits) == 1


def test_lvs_tolerates_symmetric_relabeling(ota_baseline, ota_netlist):
    # swap the differential-pair device names in the reference netlist:
    # the layout still matches by isomorphism
    from layoutlab.netlist import write_netlist

    text = write_netlist(ota_netlist)
    swapped = (text.replace("M1 ", "Mx ").replace("M2 ", "M1 ")
               .replace("Mx ", "M2 "))
    reference = parse_concrete(swapped)
    extracted = extract_connectivity(ota_baseline.record.layout)
    assert lvs(extracted, reference).passed


def test_lvs_fails_on_wrong_reference(ota_baseline, ota_netlist):
    from layoutlab.netlist import write_netlist

    # rewire the tail: M5 drain moved from "tail" to "out"
    text = write_netlist(ota_netlist).replace("M5 tail", "M5 out")
    reference = parse_concrete(text)
    extracted = extract_connectivity(ota_baseline.record.layout)
    assert not lvs(extracted, reference).passed


def test_resistor_orientation_is_interchangeable(tech, lpf):
    from layoutlab.explore import ExplorationConfig, baseline_pnr
    from layoutlab.netlist import apply_fingers, write_netlist

    netlist = apply_fingers(lpf.template, {})
    base = baseline_pnr(netlist, lpf.testbench, tech,
                        ExplorationConfig(seed=5))
    flipped = parse_concrete(
        write_netlist(netlist).replace("R1 in mid", "R1 mid in"))
    extracted = extract_connectivity(base.record.layout)
    assert lvs(extracted, flipped).passed
