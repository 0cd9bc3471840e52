"""Command-line surface.

Subcommands: permute, baseline, explore, simulate, verify, report.
Exit codes: 0 success, 1 validation/pipeline failure, 2 usage error.

A key-value config file (see tech.parse_config) supplies technology and
reward/annealing settings; `--config` or the LAYOUTLAB_CONFIG env var
points at it, and command-line flags win over file values."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import dataset as ds
from .acsim import Circuit, ac_sweep
from .circuits import CIRCUIT_NAMES, load_circuit
from .explore import (BaselineError, ExplorationConfig, RetriesExhausted,
                      baseline_pnr, derive_seed, random_explore)
from .gds import read_gds, write_gds
from .geometry import ir_to_json
from .netlist import (enumerate_finger_permutations, apply_fingers,
                      parse_concrete, parse_pairs, parse_template,
                      parse_testbench, ParseError)
from .placer import AnnealSchedule
from .rl import RewardConfig, RlConfig, rl_explore
from .tech import TechnologyCard, load_config, tech_from_config
from .verify import drc, extract_connectivity, lvs, render_report

log = logging.getLogger("layoutlab")


def _reward_from_config(pairs: dict[str, str]) -> RewardConfig:
    kwargs = {}
    if "reward.alpha" in pairs:
        kwargs["alpha"] = float(pairs["reward.alpha"])
    if "reward.beta" in pairs:
        kwargs["beta"] = float(pairs["reward.beta"])
    if "reward.improvement_sign" in pairs:
        kwargs["improvement_sign"] = pairs["reward.improvement_sign"] == "true"
    if "reward.relative" in pairs:
        kwargs["relative"] = pairs["reward.relative"] == "true"
    return RewardConfig(**kwargs)


def _anneal_from_config(pairs: dict[str, str]) -> AnnealSchedule:
    kwargs = {"patience": 20}
    if "anneal.t0" in pairs:
        kwargs["t0"] = float(pairs["anneal.t0"])
    if "anneal.cooling" in pairs:
        kwargs["cooling"] = float(pairs["anneal.cooling"])
    if "anneal.moves_per_temp" in pairs:
        kwargs["moves_per_temp"] = int(pairs["anneal.moves_per_temp"])
    if "anneal.patience" in pairs:
        raw = pairs["anneal.patience"]
        kwargs["patience"] = None if raw == "none" else int(raw)
    return AnnealSchedule(**kwargs)


def _load_inputs(args) -> tuple:
    """(template, pairs, testbench, texts) from --circuit or file flags."""
    if getattr(args, "circuit", None):
        bundle = load_circuit(args.circuit)
        return (bundle.template, bundle.pairs, bundle.testbench,
                (bundle.template_text, bundle.testbench_text,
                 bundle.pairs_text))
    if not (args.template and args.pairs and args.tb):
        raise SystemExit2("need --circuit or all of --template/--pairs/--tb")
    template_text = Path(args.template).read_text()
    pairs_text = Path(args.pairs).read_text()
    tb_text = Path(args.tb).read_text()
    template = parse_template(template_text)
    return (template, parse_pairs(pairs_text, template),
            parse_testbench(tb_text), (template_text, tb_text, pairs_text))


class SystemExit2(Exception):
    """Usage error surfaced with exit code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutlab",
        description="Analog layout generation and design-space exploration")
    parser.add_argument("--config", help="key-value config file "
                                         "(or env LAYOUTLAB_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("permute", help="list valid finger assignments")
    p.add_argument("--template", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--max", type=int, default=256)

    p = sub.add_parser("baseline", help="run baseline place-and-route")
    p.add_argument("--netlist", required=True,
                   help="concrete netlist (nf annotations set)")
    p.add_argument("--tb", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write GDS/IR/QoS files here")

    p = sub.add_parser("explore", help="run a dataset-generation campaign")
    p.add_argument("--strategy", choices=("random", "rl"), required=True)
    p.add_argument("--circuit", choices=CIRCUIT_NAMES,
                   help="bundled circuit name")
    p.add_argument("--template")
    p.add_argument("--pairs")
    p.add_argument("--tb")
    p.add_argument("--name", help="circuit folder name in the dataset")
    p.add_argument("--n", type=int, default=100,
                   help="variants per netlist (random) / evaluation "
                        "budget factor (rl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--max-netlists", type=int, default=1)
    p.add_argument("--steps", type=int, default=16,
                   help="rl inner steps per episode")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="print an AC trace")
    p.add_argument("--netlist", required=True)
    p.add_argument("--tb", required=True)

    p = sub.add_parser("verify", help="DRC + LVS a GDS against a netlist")
    p.add_argument("--gds", required=True)
    p.add_argument("--netlist", required=True)

    p = sub.add_parser("report", help="summarize a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--json", action="store_true")
    return parser


def _cmd_permute(args, tech) -> int:
    template = parse_template(Path(args.template).read_text())
    pairs = parse_pairs(Path(args.pairs).read_text(), template)
    assignments = enumerate_finger_permutations(template, pairs, tech,
                                                max_count=args.max)
    if not assignments:
        print("no valid finger assignment (over-constrained sizing)",
              file=sys.stderr)
        return 1
    for i, a in enumerate(assignments):
        body = " ".join(f"{k}={a[k]}" for k in sorted(a))
        print(f"{i:4d} {body}")
    return 0


def _cmd_baseline(args, tech, cfg_pairs) -> int:
    netlist = parse_concrete(Path(args.netlist).read_text())
    tb = parse_testbench(Path(args.tb).read_text())
    cfg = ExplorationConfig(seed=args.seed,
                            anneal=_anneal_from_config(cfg_pairs))
    try:
        result = baseline_pnr(netlist, tb, tech, cfg)
    except BaselineError as exc:
        print(f"baseline failed: {exc}", file=sys.stderr)
        return 1
    q = result.record.qos
    print(f"pscore={q.pscore!r} area={q.area!r} die_area={q.die_area!r} "
          f"drc_clean={q.drc_clean} lvs_pass={q.lvs_pass}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "baseline.gds").write_bytes(write_gds(result.record.layout))
        (out / "baseline.tiles").write_text(ir_to_json(result.record.ir))
        (out / "baseline.pre").write_text(result.record.pre_trace.to_text())
        (out / "baseline.post").write_text(result.record.post_trace.to_text())
    return 0


def _explore_one_netlist(netlist, tb, tech, cfg):
    """Worker body: baseline plus random exploration for one netlist."""
    try:
        baseline = baseline_pnr(netlist, tb, tech, cfg)
    except BaselineError as exc:
        return netlist.index, None, [], f"baseline failed: {exc}"
    try:
        variants = random_explore(baseline, netlist, tb, tech, cfg)
        note = ""
    except RetriesExhausted as exc:
        variants = exc.records
        note = f"retries exhausted at iteration {exc.iteration}"
    return netlist.index, baseline.record, variants, note


def _cmd_explore(args, tech, cfg_pairs) -> int:
    template, pairs, tb, texts = _load_inputs(args)
    template_text, tb_text, pairs_text = texts
    circuit = args.name or args.circuit or "circuit"
    out = Path(args.out)
    assignments = enumerate_finger_permutations(template, pairs, tech)
    if not assignments:
        print("no valid finger assignment", file=sys.stderr)
        return 1
    reward = _reward_from_config(cfg_pairs)
    anneal_schedule = _anneal_from_config(cfg_pairs)

    records = []
    if args.strategy == "random":
        netlists = [apply_fingers(template, a, i) for i, a in
                    enumerate(assignments[:max(1, args.max_netlists)])]
        cfg = ExplorationConfig(n_variants=args.n, seed=args.seed,
                                workers=args.workers,
                                anneal=anneal_schedule)
        if args.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(args.workers) as ex:
                results = list(ex.map(_explore_one_netlist, netlists,
                                      [tb] * len(netlists),
                                      [tech] * len(netlists),
                                      [cfg] * len(netlists)))
        else:
            results = [_explore_one_netlist(nl, tb, tech, cfg)
                       for nl in netlists]
        failures = 0
        for index, base_record, variants, note in results:
            if base_record is None:
                print(f"netlist {index}: {note}", file=sys.stderr)
                failures += 1
                continue
            if note:
                print(f"netlist {index}: {note}", file=sys.stderr)
            records.append(base_record)
            records.extend(variants)
        if failures == len(results):
            return 1
    else:
        rl_cfg = RlConfig(
            seed=args.seed,
            total_evaluations=args.n * max(1, args.max_netlists),
            steps_per_episode=args.steps,
            reward=reward,
            pipeline=ExplorationConfig(seed=args.seed,
                                       anneal=anneal_schedule))
        result = rl_explore(template, pairs, tb, tech, rl_cfg)
        records = result.records
        for entry in result.logs:
            print(entry.to_json(), file=sys.stderr)

    if not records:
        print("campaign produced no variants", file=sys.stderr)
        return 1
    for record in records:
        ds.emit_variant(out, circuit, record, template_text=template_text,
                        testbench_text=tb_text, pairs_text=pairs_text)
    print(f"emitted {len(records)} records to {out}")
    return 0


def _cmd_simulate(args, tech) -> int:
    netlist = parse_concrete(Path(args.netlist).read_text())
    tb = parse_testbench(Path(args.tb).read_text())
    trace = ac_sweep(Circuit.from_netlist(netlist), tb, tech)
    sys.stdout.write(trace.to_text())
    return 0


def _cmd_verify(args, tech) -> int:
    layout = read_gds(Path(args.gds).read_bytes())
    netlist = parse_concrete(Path(args.netlist).read_text())
    violations = drc(layout, tech)
    report = lvs(extract_connectivity(layout), netlist)
    if violations:
        sys.stdout.write(render_report(violations))
    sys.stdout.write(report.render())
    return 0 if (not violations and report.passed) else 1


def _cmd_report(args) -> int:
    try:
        stats = ds.summarize(Path(args.dataset))
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps([s.as_dict() for s in stats], indent=1,
                         sort_keys=True))
    else:
        sys.stdout.write(ds.render_stats(stats))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    try:
        cfg_pairs = load_config(args.config)
        tech = tech_from_config(cfg_pairs)
        if args.command == "permute":
            return _cmd_permute(args, tech)
        if args.command == "baseline":
            return _cmd_baseline(args, tech, cfg_pairs)
        if args.command == "explore":
            return _cmd_explore(args, tech, cfg_pairs)
        if args.command == "simulate":
            return _cmd_simulate(args, tech)
        if args.command == "verify":
            return _cmd_verify(args, tech)
        if args.command == "report":
            return _cmd_report(args)
        raise SystemExit2(f"unknown command {args.command!r}")
    except SystemExit2 as exc:
        print(str(exc), file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (ParseError, FileNotFoundError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
