import itertools

import pytest

from layoutlab.netlist import (DEFAULT_FINGERS, MatchingPairs, ParseError,
                               Sweep, apply_fingers,
                               enumerate_finger_permutations, parse_concrete,
                               parse_pairs, parse_spice_number, parse_template,
                               parse_testbench, validate_assignment,
                               write_netlist, write_template)
from layoutlab.tech import TechnologyCard


def test_parse_single_mos_defaults_to_nmos():
    t = parse_template("M1 d g s b W=1u L=0.15u")
    assert len(t.devices) == 1
    dev = t.devices[0]
    assert dev.kind == "nmos"
    assert dev.w_nm == 1000 and dev.l_nm == 150
    assert set(t.nets) == {"d", "g", "s", "b"}


def test_parse_ota_fixture_counts(ota):
    kinds = [d.kind for d in ota.template.devices]
    assert len(kinds) == 5
    assert kinds.count("nmos") == 3
    assert kinds.count("pmos") == 2


def test_parse_port_on_unknown_net_reports_line():
    text = "M1 d g s b W=1u L=0.2u\n.port out vout\n"
    with pytest.raises(ParseError) as err:
        parse_template(text)
    assert err.value.line == 2
    assert "vout" in str(err.value)


def test_parse_duplicate_device_name():
    text = "R1 a b 1k\nR1 b c 2k\n"
    with pytest.raises(ParseError, match="duplicate"):
        parse_template(text)


def test_parse_syntax_error_position():
    with pytest.raises(ParseError) as err:
        parse_template("R1 a b\n")
    assert err.value.line == 1


def test_parse_stops_at_end_directive():
    t = parse_template("R1 a b 1k\n.end\nR2 c d 2k\n")
    assert len(t.devices) == 1


@pytest.mark.parametrize("token,value", [
    ("1u", 1e-6), ("0.15u", 0.15e-6), ("159.155n", 159.155e-9),
    ("2meg", 2e6), ("1k", 1e3), ("1g", 1e9), ("50", 50.0),
    ("1.5e-7", 1.5e-7), ("20f", 20e-15),
])
def test_spice_numbers(token, value):
    assert parse_spice_number(token) == pytest.approx(value, rel=1e-12)


def test_spice_number_rejects_garbage():
    with pytest.raises(ValueError):
        parse_spice_number("1uF2")


def test_single_free_mos_all_eight_values(tech):
    t = parse_template("M1 d g s b W=3.2u L=0.2u")
    out = enumerate_finger_permutations(t, MatchingPairs(()), tech)
    assert [a["M1"] for a in out] == list(DEFAULT_FINGERS)


def test_matched_plus_free_brute_force(tech):
    # each device admits exactly {2, 4}: W/4 >= 150 > W/6
    text = ("M1 a b c d W=0.6u L=0.2u\n"
            "M2 e f g h W=0.6u L=0.2u\n"
            "M3 i j k l W=0.6u L=0.2u\n")
    t = parse_template(text)
    pairs = parse_pairs("M1 M2\n", t)
    out = enumerate_finger_permutations(t, pairs, tech)
    brute = [
        {"M1": a, "M2": b, "M3": c}
        for a, b, c in itertools.product((2, 4), repeat=3)
        if a == b
    ]
    assert len(out) == 4
    assert sorted(map(sorted, (a.items() for a in out))) == \
        sorted(map(sorted, (a.items() for a in brute)))


def test_min_gate_width_restricts_to_two_fingers(tech):
    t = parse_template("M1 d g s b W=0.3u L=0.2u")
    out = enumerate_finger_permutations(t, MatchingPairs(()), tech)
    assert [a["M1"] for a in out] == [2]


def test_enumeration_matches_brute_force_on_ota(ota, tech):
    out = enumerate_finger_permutations(ota.template, ota.pairs, tech,
                                        max_count=None)
    devices = sorted(d.name for d in ota.template.mos_devices())
    brute = []
    for combo in itertools.product(DEFAULT_FINGERS, repeat=len(devices)):
        assignment = dict(zip(devices, combo))
        if not validate_assignment(ota.template, ota.pairs, assignment, tech):
            brute.append(assignment)
    key = lambda a: tuple(a[n] for n in devices)
    assert sorted(map(key, out)) == sorted(map(key, brute))
    assert [key(a) for a in out] == sorted(key(a) for a in out)


def test_matched_devices_share_nf_everywhere(ota, tech):
    for a in enumerate_finger_permutations(ota.template, ota.pairs, tech):
        for x, y in ota.pairs.pairs:
            assert a[x] == a[y]


def test_enumeration_cap_truncates_deterministically(ota, tech):
    full = enumerate_finger_permutations(ota.template, ota.pairs, tech,
                                         max_count=None)
    capped = enumerate_finger_permutations(ota.template, ota.pairs, tech,
                                           max_count=10)
    assert capped == full[:10]


def test_over_constrained_sizing_yields_empty(tech):
    t = parse_template("M1 d g s b W=0.2u L=0.2u")  # 0.2u / 2 < 150 nm
    assert enumerate_finger_permutations(t, MatchingPairs(()), tech) == []


def test_template_round_trip(ota):
    assert parse_template(write_template(ota.template)) == ota.template


def test_concrete_round_trip(ota, tech):
    a = enumerate_finger_permutations(ota.template, ota.pairs, tech)[3]
    netlist = apply_fingers(ota.template, a, 3)
    text = write_netlist(netlist)
    again = parse_concrete(text, 3)
    assert again == netlist


def test_write_contains_nf_annotation():
    t = parse_template("M1 d g s b W=1u L=0.2u")
    netlist = apply_fingers(t, {"M1": 4})
    assert "nf=4" in write_netlist(netlist)


def test_apply_fingers_missing_device_errors():
    t = parse_template("M1 d g s b W=1u L=0.2u\nM2 e f g h W=1u L=0.2u")
    with pytest.raises(ValueError, match="missing MOS"):
        apply_fingers(t, {"M1": 2})
    with pytest.raises(ValueError, match="unknown"):
        apply_fingers(t, {"M1": 2, "M2": 2, "M9": 2})


def test_pairs_validation():
    t = parse_template("M1 a b c d W=1u L=0.2u\n"
                       "M2 e f g h W=2u L=0.2u\n"
                       "R1 x y 1k\n")
    with pytest.raises(ValueError, match="unknown device"):
        parse_pairs("M1 M9\n", t)
    with pytest.raises(ValueError, match="W/L"):
        parse_pairs("M1 M2\n", t)
    with pytest.raises(ValueError, match="MOS"):
        parse_pairs("M1 R1\n", t)


def test_pairs_groups_chain():
    t = parse_template("M1 a b c d W=1u L=0.2u\n"
                       "M2 e f g h W=1u L=0.2u\n"
                       "M3 i j k l W=1u L=0.2u\n")
    pairs = parse_pairs("M1 M2\nM2 M3\n", t)
    assert pairs.groups(t) == [("M1", "M2", "M3")]


def test_testbench_parse(ota):
    tb = ota.testbench
    assert tb.source_net == "inp"
    assert tb.output_net == "out"
    assert tb.dc_bias["vdd"] == pytest.approx(1.8)
    assert tb.sweep.f_start == 1e3 and tb.sweep.f_stop == 1e9
    assert tb.sweep.points_per_decade == 50


def test_testbench_requires_in_and_out():
    with pytest.raises(ParseError, match=r"\.in"):
        parse_testbench(".out x\n")
    with pytest.raises(ParseError, match=r"\.out"):
        parse_testbench(".in x\n")


def test_sweep_validation():
    with pytest.raises(ValueError):
        Sweep(f_start=1e9, f_stop=1e3)
    with pytest.raises(ValueError):
        Sweep(points_per_decade=0)


def test_rc_only_template_enumerates_single_netlist(lpf, tech):
    out = enumerate_finger_permutations(lpf.template, lpf.pairs, tech)
    assert out == [{}]
