"""Two-level RL exploration drive.

Outer loop: the finger agent picks the next netlist, a baseline is
placed and routed, the inner agent explores shifts for a bounded number
of steps, and the best resulting improvement becomes the outer reward.
Unlike the random strategy, a failed inner step ends the episode with a
small penalty instead of being retried.

The evaluation budget counts pipeline runs (baseline builds plus routed
validations), which is the unit of real cost."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..explore import (BaselineError, ExplorationConfig, PipelineError,
                       VariantRecord, baseline_pnr, derive_seed,
                       validate_layout)
from ..geometry import DIRECTIONS, ShiftError, shift_component
from ..netlist import (CircuitTemplate, ConcreteNetlist, MatchingPairs,
                       Testbench, apply_fingers, enumerate_finger_permutations,
                       validate_assignment)
from ..tech import TechnologyCard
from .agents import (InnerAgent, InnerAgentConfig, OuterAgent,
                     OuterAgentConfig, OuterEpisode, RewardConfig, Transition,
                     DEFAULT_FINGER_VALUES, inner_reward, ir_features,
                     outer_reward)

log = logging.getLogger("layoutlab.rl")


@dataclass(frozen=True)
class RlConfig:
    seed: int = 0
    total_evaluations: int = 100
    steps_per_episode: int = 16
    finger_values: tuple[int, ...] = DEFAULT_FINGER_VALUES
    reward: RewardConfig = field(default_factory=RewardConfig)
    pipeline: ExplorationConfig = field(default_factory=ExplorationConfig)


@dataclass
class EpisodeLog:
    episode: int
    netlist_index: int
    outer_reward: float
    inner_rewards: list[float]
    outer_loss: float
    ppo_losses: list[float]

    def to_json(self) -> str:
        return json.dumps({
            "episode": self.episode,
            "netlist_index": self.netlist_index,
            "outer_reward": self.outer_reward,
            "inner_rewards": self.inner_rewards,
            "outer_loss": self.outer_loss,
            "ppo_losses": self.ppo_losses,
        }, sort_keys=True)


@dataclass
class RlResult:
    records: list[VariantRecord]
    logs: list[EpisodeLog]
    outer_agent: OuterAgent
    inner_agent: InnerAgent
    evaluations: int

    def best_pscore(self) -> float:
        return min(r.qos.pscore for r in self.records)


def _assignment_vector(assignment: dict[str, int],
                       device_names: list[str]) -> np.ndarray:
    return np.array([assignment[n] for n in device_names], dtype=float)


def rl_explore(template: CircuitTemplate, pairs: MatchingPairs,
               tb: Testbench, tech: TechnologyCard,
               cfg: RlConfig = RlConfig()) -> RlResult:
    """Run the two-level strategy over one circuit until the evaluation
    budget is exhausted (or every valid netlist has been explored).

    Emits every validated variant (baselines as variant 0), exactly like
    the random strategy."""
    all_assignments = enumerate_finger_permutations(
        template, pairs, tech, allowed=cfg.finger_values, max_count=None)
    if not all_assignments:
        raise ValueError("no valid finger assignment exists for the template")
    device_names = sorted(d.name for d in template.mos_devices())
    index_of = {tuple(a[n] for n in device_names): i
                for i, a in enumerate(all_assignments)}
    name_groups = pairs.groups(template)
    index_groups = [tuple(device_names.index(n) for n in g)
                    for g in name_groups]
    value_index = {v: i for i, v in enumerate(cfg.finger_values)}

    outer = OuterAgent(OuterAgentConfig(
        n_transistors=len(device_names), finger_values=cfg.finger_values,
        seed=derive_seed(cfg.seed, "outer")))
    n_components = len(template.devices)
    inner = InnerAgent(InnerAgentConfig(
        n_components=n_components, seed=derive_seed(cfg.seed, "inner")))

    pipeline = replace(cfg.pipeline, seed=cfg.seed)
    records: list[VariantRecord] = []
    logs: list[EpisodeLog] = []
    explored: set[tuple[int, ...]] = set()
    nf_prev = _assignment_vector(all_assignments[0], device_names)
    evaluations = 0
    episode = 0

    while evaluations < cfg.total_evaluations \
            and len(explored) < len(all_assignments):
        episode += 1
        state = outer.normalize(nf_prev)

        # FinPerm search: sample until a valid, unexplored assignment
        actions = None
        assignment = None
        outer_losses = []
        for _ in range(outer.cfg.max_resamples):
            actions, _logp = outer.select(state, index_groups or
                                          [(i,) for i in
                                           range(len(device_names))])
            trial = {name: cfg.finger_values[a]
                     for name, a in zip(device_names, actions)}
            problems = validate_assignment(template, pairs, trial, tech)
            if problems:
                outer_losses.append(outer.reinforce_update(
                    [OuterEpisode(state, actions,
                                  outer.cfg.invalid_penalty)]))
                continue
            if tuple(trial[n] for n in device_names) in explored:
                continue
            assignment = trial
            break
        if assignment is None:
            log.info("outer agent found no new valid assignment; stopping")
            break
        key = tuple(assignment[n] for n in device_names)
        explored.add(key)
        netlist = apply_fingers(template, assignment, index_of[key])

        # baseline P&R (counts against the budget)
        evaluations += 1
        try:
            baseline = baseline_pnr(netlist, tb, tech, pipeline)
        except BaselineError as exc:
            log.info("episode %d: baseline failed (%s)", episode, exc)
            loss = outer.reinforce_update(
                [OuterEpisode(state, actions, outer.cfg.invalid_penalty)])
            logs.append(EpisodeLog(episode, netlist.index,
                                   outer.cfg.invalid_penalty, [], loss, []))
            nf_prev = _assignment_vector(assignment, device_names)
            continue
        records.append(baseline.record)

        # inner spatial exploration
        ir = baseline.record.ir
        transitions: list[Transition] = []
        inner_rewards: list[float] = []
        variant_qos = []
        j = 0
        while j < cfg.steps_per_episode \
                and evaluations < cfg.total_evaluations:
            feats = ir_features(ir, baseline.die)
            c, d, logp, value = inner.policy(feats)
            component = ir.tiles[c].name
            direction = DIRECTIONS[d]
            try:
                candidate = shift_component(ir, component, direction,
                                            pipeline.shift_nm)
            except ShiftError:
                r = inner.cfg.failure_penalty
                transitions.append(Transition(feats, (c, d), logp, r,
                                              value, True))
                inner_rewards.append(r)
                break
            evaluations += 1
            try:
                record = validate_layout(candidate, netlist, tb, tech,
                                         baseline.die,
                                         baseline.record.pre_trace, j + 1)
            except PipelineError:
                r = inner.cfg.failure_penalty
                transitions.append(Transition(feats, (c, d), logp, r,
                                              value, True))
                inner_rewards.append(r)
                break
            r = inner_reward(record.qos, baseline.record.qos, cfg.reward)
            transitions.append(Transition(feats, (c, d), logp, r, value,
                                          False))
            inner_rewards.append(r)
            records.append(record)
            variant_qos.append(record.qos)
            ir = candidate
            j += 1

        inner.finish_episode(transitions)
        ppo_losses = inner.maybe_update()
        r_outer = outer_reward(variant_qos, baseline.record.qos, cfg.reward)
        loss = outer.reinforce_update([OuterEpisode(state, actions, r_outer)])
        logs.append(EpisodeLog(episode, netlist.index, r_outer,
                               inner_rewards, loss, ppo_losses))
        log.info("episode %d netlist %d: R=%.4g steps=%d",
                 episode, netlist.index, r_outer, len(inner_rewards))
        nf_prev = _assignment_vector(assignment, device_names)

    return RlResult(records, logs, outer, inner, evaluations)
