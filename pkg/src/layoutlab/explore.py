"""Pipeline orchestration: baseline place-and-route plus the random
exploration loop (shift, re-route, validate, revert on failure)."""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field, replace

from .acsim import Circuit, SimulationTrace, SingularMatrix, ac_sweep
from .geometry import (DIRECTIONS, InternalRepresentation, Layout, Rect,
                       ShiftError, build_tiles, make_ir, shift_component)
from .metrics import QoS, area_um2, die_area_um2, pscore
from .netlist import ConcreteNetlist, Testbench
from .pex import ParasiticNetwork, annotate, extract_parasitics
from .placer import AnnealSchedule, anneal, nets_from_terminals
from .router import Unroutable, route_all
from .tech import TechnologyCard
from .verify import drc, extract_connectivity, lvs

log = logging.getLogger("layoutlab.explore")


def derive_seed(master: int, *tags) -> int:
    """Stable 63-bit sub-seed from a master seed and context tags."""
    digest = hashlib.sha256(
        ("/".join(str(t) for t in (master, *tags))).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class ExplorationConfig:
    n_variants: int = 100
    max_retries: int = 32
    seed: int = 0
    shift_nm: int = 100
    routing_margin_tracks: int = 4
    max_netlists: int | None = 1
    max_evaluations: int | None = None    # routed-validation budget
    workers: int = 1
    anneal: AnnealSchedule = field(
        default_factory=lambda: AnnealSchedule(patience=20))

    def __post_init__(self):
        if self.n_variants < 1 or self.max_retries < 1:
            raise ValueError("need n_variants >= 1 and max_retries >= 1")


class PipelineError(RuntimeError):
    """A validation stage rejected a layout."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        self.detail = detail
        super().__init__(f"{stage}: {detail}")


class BaselineError(PipelineError):
    """The baseline flow failed; the netlist cannot be explored."""


class RetriesExhausted(RuntimeError):
    def __init__(self, iteration: int, records: list):
        self.iteration = iteration
        self.records = records
        super().__init__(f"no valid perturbation found at iteration {iteration}")


@dataclass(frozen=True)
class VariantRecord:
    """Everything the dataset stores for one validated variant."""

    netlist: ConcreteNetlist
    ir: InternalRepresentation
    layout: Layout
    qos: QoS
    pre_trace: SimulationTrace
    post_trace: SimulationTrace


@dataclass(frozen=True)
class BaselineResult:
    record: VariantRecord
    die: Rect


def validate_layout(ir: InternalRepresentation, netlist: ConcreteNetlist,
                    tb: Testbench, tech: TechnologyCard, die: Rect,
                    pre_trace: SimulationTrace, variant_index: int
                    ) -> VariantRecord:
    """Route and run the full validation chain (DRC, LVS, PEX, AC sim);
    raises PipelineError naming the failing stage."""
    try:
        layout = route_all(ir, netlist.net_terminals(), tech, die)
    except Unroutable as exc:
        raise PipelineError("route", str(exc))
    violations = drc(layout, tech)
    if violations:
        raise PipelineError("drc", f"{len(violations)} violations; first: "
                                   f"{violations[0].render()}")
    report = lvs(extract_connectivity(layout), netlist)
    if not report.passed:
        raise PipelineError("lvs", "; ".join(report.diff) or "no isomorphism")
    pn = extract_parasitics(layout, netlist, tech)
    try:
        post = ac_sweep(annotate(netlist, pn), tb, tech)
    except (SingularMatrix, ValueError) as exc:
        raise PipelineError("simulate", str(exc))
    qos = QoS(
        pscore=pscore(pre_trace, post),
        area=area_um2(ir.tiles),
        die_area=die_area_um2(ir),
        drc_clean=True,
        lvs_pass=True,
        netlist_index=netlist.index,
        variant_index=variant_index,
        moves=ir.moves,
    )
    return VariantRecord(netlist, ir, layout, qos, pre_trace, post)


def baseline_pnr(netlist: ConcreteNetlist, tb: Testbench,
                 tech: TechnologyCard,
                 cfg: ExplorationConfig = ExplorationConfig()
                 ) -> BaselineResult:
    """Full place-and-route flow for one netlist: tiles, annealed
    placement, routing, validation, and pre/post traces."""
    tiles = build_tiles(netlist, tech)
    placer_nets = nets_from_terminals(tiles, netlist.net_terminals())
    placer_nets = [n for n in placer_nets if len(n) > 1]
    schedule = replace(cfg.anneal,
                       seed=derive_seed(cfg.seed, netlist.index, "anneal"))
    try:
        _sp, placed = anneal(tiles, placer_nets, schedule,
                             margin=tech.halo_margin)
    except ValueError as exc:
        raise BaselineError("place", str(exc))

    margin = cfg.routing_margin_tracks * tech.wire_pitch
    xs0 = min(t.ll[0] for t in placed) - tech.halo_margin
    ys0 = min(t.ll[1] for t in placed) - tech.halo_margin
    placed = [t.translated(margin - xs0, margin - ys0) for t in placed]
    xs1 = max(t.ur[0] for t in placed) + tech.halo_margin
    ys1 = max(t.ur[1] for t in placed) + tech.halo_margin
    die: Rect = (0, 0, xs1 + margin, ys1 + margin)

    ir = make_ir(placed, tech, netlist.index)
    try:
        pre = ac_sweep(Circuit.from_netlist(netlist), tb, tech)
    except (SingularMatrix, ValueError) as exc:
        raise BaselineError("simulate-pre", str(exc))
    try:
        record = validate_layout(ir, netlist, tb, tech, die, pre, 0)
    except PipelineError as exc:
        raise BaselineError(exc.stage, exc.detail)
    return BaselineResult(record, die)


def random_explore(baseline: BaselineResult, netlist: ConcreteNetlist,
                   tb: Testbench, tech: TechnologyCard,
                   cfg: ExplorationConfig) -> list[VariantRecord]:
    """Chain of N validated perturbations from the baseline IR.

    Each iteration rolls one die for the component and one for the
    direction; a failed shift or validation reverts the perturbation and
    resamples, up to max_retries per iteration. Stops early when the
    evaluation budget runs out."""
    rng = random.Random(derive_seed(cfg.seed, netlist.index, "random"))
    ir = baseline.record.ir
    pre = baseline.record.pre_trace
    records: list[VariantRecord] = []
    evaluations = 0
    names = [t.name for t in ir.tiles]
    for j in range(1, cfg.n_variants + 1):
        retries = 0
        while True:
            if cfg.max_evaluations is not None \
                    and evaluations >= cfg.max_evaluations:
                return records
            if retries >= cfg.max_retries:
                raise RetriesExhausted(j, records)
            component = names[rng.randrange(len(names))]
            direction = DIRECTIONS[rng.randrange(len(DIRECTIONS))]
            try:
                candidate = shift_component(ir, component, direction,
                                            cfg.shift_nm)
            except ShiftError as exc:
                log.debug("netlist %d variant %d: shift rejected (%s)",
                          netlist.index, j, exc)
                retries += 1
                continue
            try:
                evaluations += 1
                record = validate_layout(candidate, netlist, tb, tech,
                                         baseline.die, pre, j)
            except PipelineError as exc:
                log.info("netlist %d variant %d: revert (%s)",
                         netlist.index, j, exc)
                retries += 1
                continue
            ir = candidate
            records.append(record)
            log.info("netlist %d variant %d: accept pscore=%.6g area=%.6g",
                     netlist.index, j, record.qos.pscore, record.qos.area)
            break
    return records
