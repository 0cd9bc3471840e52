import hashlib
import json
from pathlib import Path

import pytest

from layoutlab.cli import main
from layoutlab.gds import read_gds, write_gds
from layoutlab.geometry import Layout


@pytest.fixture()
def ota_files(tmp_path, ota):
    t = tmp_path / "template.sp"
    t.write_text(ota.template_text)
    p = tmp_path / "pairs.txt"
    p.write_text(ota.pairs_text)
    b = tmp_path / "testbench.tb"
    b.write_text(ota.testbench_text)
    return t, p, b


def _tree_hash(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def test_permute_lists_assignments(ota_files, capsys):
    t, p, _b = ota_files
    assert main(["permute", "--template", str(t), "--pairs", str(p)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 108
    assert out[0].split()[1:] == ["M1=2", "M2=2", "M3=2", "M4=2", "M5=2"]


def test_permute_over_constrained_exits_one(tmp_path, capsys):
    t = tmp_path / "t.sp"
    t.write_text("M1 d g s b W=0.2u L=0.2u\n")
    p = tmp_path / "p.txt"
    p.write_text("")
    assert main(["permute", "--template", str(t), "--pairs", str(p)]) == 1


def test_usage_error_exits_two(capsys):
    assert main(["explore", "--strategy", "bogus", "--out", "x"]) == 2
    assert main([]) == 2


def test_explore_twice_identical_trees(tmp_path, capsys):
    args = ["explore", "--strategy", "random", "--circuit",
            "five_transistor_ota", "--n", "3", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert _tree_hash(tmp_path / "a") == _tree_hash(tmp_path / "b")


def test_report_human_and_json(tmp_path, capsys):
    assert main(["explore", "--strategy", "random", "--circuit",
                 "five_transistor_ota", "--n", "2", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["report", "--dataset", str(tmp_path)]) == 0
    human = capsys.readouterr().out
    assert "five_transistor_ota" in human
    assert main(["report", "--dataset", str(tmp_path), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["total_variants"] == 3  # baseline + 2


def test_report_empty_dataset_exits_one(tmp_path, capsys):
    assert main(["report", "--dataset", str(tmp_path / "void")]) == 1


def test_simulate_prints_trace(ota_files, tmp_path, ota, capsys):
    t, p, b = ota_files
    netlist = tmp_path / "netlist.sp"
    from layoutlab.netlist import (apply_fingers, write_netlist,
                                   enumerate_finger_permutations)
    from layoutlab.tech import TechnologyCard
    tech = TechnologyCard()
    a = enumerate_finger_permutations(ota.template, ota.pairs, tech)[0]
    netlist.write_text(write_netlist(apply_fingers(ota.template, a)))
    assert main(["simulate", "--netlist", str(netlist), "--tb", str(b)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 301
    f0, m0 = lines[0].split()
    assert float(f0) == 1000.0 and float(m0) > 0


def test_baseline_writes_artifacts(ota_files, tmp_path, capsys, ota, tech):
    t, p, b = ota_files
    from layoutlab.netlist import (apply_fingers, write_netlist,
                                   enumerate_finger_permutations)
    a = enumerate_finger_permutations(ota.template, ota.pairs, tech)[0]
    netlist = tmp_path / "netlist.sp"
    netlist.write_text(write_netlist(apply_fingers(ota.template, a)))
    out = tmp_path / "base"
    assert main(["baseline", "--netlist", str(netlist), "--tb", str(b),
                 "--seed", "4", "--out", str(out)]) == 0
    assert (out / "baseline.gds").exists()
    assert "pscore=" in capsys.readouterr().out


def test_verify_passes_then_fails_on_mutation(tmp_path, capsys):
    assert main(["explore", "--strategy", "random", "--circuit",
                 "five_transistor_ota", "--n", "1", "--seed", "5",
                 "--out", str(tmp_path)]) == 0
    gds = (tmp_path / "data" / "five_transistor_ota" / "layouts"
           / "netlist_000_variant_001.gds")
    netlist = tmp_path / "netlists" / "five_transistor_ota" / "netlist_000.sp"
    capsys.readouterr()
    assert main(["verify", "--gds", str(gds), "--netlist",
                 str(netlist)]) == 0
    assert "LVS pass" in capsys.readouterr().out

    layout = read_gds(gds.read_bytes())
    mutated = Layout(layout.ir, layout.wires[1:], layout.vias, layout.die)
    broken = tmp_path / "broken.gds"
    broken.write_bytes(write_gds(mutated))
    assert main(["verify", "--gds", str(broken), "--netlist",
                 str(netlist)]) == 1
    assert "LVS FAIL" in capsys.readouterr().out


def test_config_file_overrides_tech(tmp_path, ota_files, capsys):
    t, p, _b = ota_files
    cfg = tmp_path / "site.cfg"
    cfg.write_text("tech.min_gate_width = 400\n")
    assert main(["--config", str(cfg), "permute", "--template", str(t),
                 "--pairs", str(p)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    # W=2u admits nf in {2,4} and W=1u only nf=2 under the 400 nm floor
    assert len(out) == 4
