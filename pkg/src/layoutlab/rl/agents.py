"""The two learning agents and their reward shaping.

Outer agent: categorical distribution over finger values per transistor,
trained with REINFORCE on the best improvement its netlist achieved.
Inner agent: actor-critic over (component, direction) shifts, trained
with clipped-surrogate PPO from a bounded replay of transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import DIRECTIONS, InternalRepresentation, Rect
from ..metrics import QoS
from .nn import Adam, DenseNetwork, log_softmax, softmax

KIND_ONEHOT = {
    "nmos": (1.0, 0.0, 0.0, 0.0),
    "pmos": (0.0, 1.0, 0.0, 0.0),
    "capacitor": (0.0, 0.0, 1.0, 0.0),
    "resistor": (0.0, 0.0, 0.0, 1.0),
}

DEFAULT_FINGER_VALUES = (2, 4, 6, 8, 10, 12, 14, 16)


# ---------------------------------------------------------------------------
# rewards


@dataclass(frozen=True)
class RewardConfig:
    """alpha weights the pscore delta, beta the area delta.

    Default mode: deltas are (baseline - variant) / baseline, so an
    improvement earns a positive reward and the two terms are unit free.
    improvement_sign=False and relative=False together reproduce the raw
    (variant - baseline) form.
    """

    alpha: float = 5.0
    beta: float = 1.5
    improvement_sign: bool = True
    relative: bool = True

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


def _delta(baseline: float, variant: float, cfg: RewardConfig) -> float:
    diff = (baseline - variant) if cfg.improvement_sign \
        else (variant - baseline)
    if cfg.relative and abs(baseline) > 1e-30:
        return diff / abs(baseline)
    return diff


def inner_reward(qos: QoS, baseline: QoS,
                 cfg: RewardConfig = RewardConfig()) -> float:
    """Per-step reward; the area term uses the die bounding box, which
    shifts actually move (the component-sum area is shift invariant)."""
    return (cfg.alpha * _delta(baseline.pscore, qos.pscore, cfg)
            + cfg.beta * _delta(baseline.die_area, qos.die_area, cfg))


def outer_reward(variants: list[QoS], baseline: QoS,
                 cfg: RewardConfig = RewardConfig()) -> float:
    """Best single-variant reward over the exploration of one netlist;
    zero when no variant was produced."""
    if not variants:
        return 0.0
    return max(inner_reward(q, baseline, cfg) for q in variants)


# ---------------------------------------------------------------------------
# outer agent (finger assignments, REINFORCE)


@dataclass(frozen=True)
class OuterAgentConfig:
    n_transistors: int
    finger_values: tuple[int, ...] = DEFAULT_FINGER_VALUES
    n_blocks: int = 5
    units_per_transistor: int = 64
    learning_rate: float = 1e-5
    invalid_penalty: float = -10.0
    max_resamples: int = 64
    seed: int = 0


@dataclass(frozen=True)
class OuterEpisode:
    state: np.ndarray        # normalized previous nf vector, shape (D,)
    actions: np.ndarray      # chosen finger-value indices, shape (D,)
    reward: float


class OuterAgent:
    """D independent K-way categorical heads over finger values."""

    def __init__(self, cfg: OuterAgentConfig):
        self.cfg = cfg
        self.d = cfg.n_transistors
        self.k = len(cfg.finger_values)
        self.rng = np.random.default_rng(cfg.seed)
        self.net = DenseNetwork(
            self.d, cfg.units_per_transistor * self.d, cfg.n_blocks,
            {"nf": self.d * self.k}, self.rng)
        self.opt = Adam(self.net.params, lr=cfg.learning_rate)

    def normalize(self, nf_vector: np.ndarray) -> np.ndarray:
        return np.asarray(nf_vector, dtype=float) / max(self.cfg.finger_values)

    def distributions(self, state: np.ndarray) -> np.ndarray:
        """(D, K) softmax rows for one normalized input state."""
        logits, _ = self.net.forward(state[None, :])
        return softmax(logits["nf"].reshape(self.d, self.k), axis=1)

    def select(self, state: np.ndarray,
               groups: list[tuple[int, ...]]) -> tuple[np.ndarray, float]:
        """Sample one finger-value index per transistor; every member of
        a matched group copies its leader's sample. Returns the action
        vector and its log probability (summed over all transistors)."""
        probs = self.distributions(state)
        actions = np.zeros(self.d, dtype=int)
        for group in groups:
            leader = min(group)
            choice = int(self.rng.choice(self.k, p=probs[leader]))
            for member in group:
                actions[member] = choice
        return actions, self.log_prob(state, actions)

    def log_prob(self, state: np.ndarray, actions: np.ndarray) -> float:
        logits, _ = self.net.forward(state[None, :])
        logp = log_softmax(logits["nf"].reshape(self.d, self.k), axis=1)
        return float(logp[np.arange(self.d), actions].sum())

    def reinforce_update(self, episodes: list[OuterEpisode]) -> float:
        """One Adam step on -sum(R * log pi(actions)); returns the loss."""
        if not episodes:
            raise ValueError("reinforce_update needs at least one episode")
        states = np.stack([e.state for e in episodes])
        logits, cache = self.net.forward(states)
        logits_nf = logits["nf"].reshape(len(episodes), self.d, self.k)
        logp = log_softmax(logits_nf, axis=2)
        probs = softmax(logits_nf, axis=2)
        loss = 0.0
        dlogits = np.zeros_like(logits_nf)
        for i, ep in enumerate(episodes):
            picked = logp[i, np.arange(self.d), ep.actions]
            loss -= ep.reward * picked.sum()
            onehot = np.zeros((self.d, self.k))
            onehot[np.arange(self.d), ep.actions] = 1.0
            dlogits[i] = ep.reward * (probs[i] - onehot)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite REINFORCE loss")
        grads = self.net.backward(
            cache, {"nf": dlogits.reshape(len(episodes), self.d * self.k)})
        self.opt.step(grads)
        return float(loss)

    def reinforce_loss(self, episodes: list[OuterEpisode]) -> float:
        """Loss only (no update); used by gradient checks."""
        states = np.stack([e.state for e in episodes])
        logits, _ = self.net.forward(states)
        logp = log_softmax(
            logits["nf"].reshape(len(episodes), self.d, self.k), axis=2)
        loss = 0.0
        for i, ep in enumerate(episodes):
            loss -= ep.reward * logp[i, np.arange(self.d), ep.actions].sum()
        return float(loss)


# ---------------------------------------------------------------------------
# inner agent (component shifts, PPO)


@dataclass(frozen=True)
class InnerAgentConfig:
    n_components: int
    n_blocks: int = 5
    units_per_component: int = 128
    gamma: float = 0.99
    clip_epsilon: float = 0.2
    entropy_coeff: float = 0.01
    value_coeff: float = 0.5
    learning_rate: float = 1e-5
    batch_size: int = 16
    replay_capacity: int = 128
    failure_penalty: float = -0.001
    seed: int = 0


@dataclass(frozen=True)
class Transition:
    state: np.ndarray            # shape (8C,)
    action: tuple[int, int]      # component index, direction index
    log_prob: float
    reward: float
    value: float
    terminal: bool
    ret: float = 0.0             # discounted return, filled at episode end


def ir_features(ir: InternalRepresentation, die: Rect) -> np.ndarray:
    """Per component: one-hot kind then ll/ur coordinates normalized to
    the die box, concatenated in tile order (8 values per component)."""
    w = die[2] - die[0]
    h = die[3] - die[1]
    feats: list[float] = []
    for tile in ir.tiles:
        feats.extend(KIND_ONEHOT[tile.kind])
        feats.append((tile.ll[0] - die[0]) / w)
        feats.append((tile.ll[1] - die[1]) / h)
        feats.append((tile.ur[0] - die[0]) / w)
        feats.append((tile.ur[1] - die[1]) / h)
    return np.array(feats)


def discounted_returns(rewards: list[float], gamma: float) -> list[float]:
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


class InnerAgent:
    """Shared trunk with component/direction actor heads and a scalar
    critic head."""

    def __init__(self, cfg: InnerAgentConfig):
        self.cfg = cfg
        self.c = cfg.n_components
        self.rng = np.random.default_rng(cfg.seed)
        self.net = DenseNetwork(
            8 * cfg.n_components, cfg.units_per_component * cfg.n_components,
            cfg.n_blocks,
            {"component": cfg.n_components, "direction": len(DIRECTIONS),
             "value": 1},
            self.rng)
        self.opt = Adam(self.net.params, lr=cfg.learning_rate)
        self.replay: list[Transition] = []

    def policy(self, state: np.ndarray
               ) -> tuple[int, int, float, float]:
        """Sample (component, direction); returns indices, the joint log
        probability, and the critic value."""
        logits, _ = self.net.forward(state[None, :])
        pc = softmax(logits["component"][0])
        pd = softmax(logits["direction"][0])
        c = int(self.rng.choice(self.c, p=pc))
        d = int(self.rng.choice(len(DIRECTIONS), p=pd))
        logp = float(np.log(pc[c]) + np.log(pd[d]))
        value = float(logits["value"][0, 0])
        return c, d, logp, value

    def evaluate(self, state: np.ndarray) -> tuple[np.ndarray, np.ndarray,
                                                   float]:
        logits, _ = self.net.forward(state[None, :])
        return (softmax(logits["component"][0]),
                softmax(logits["direction"][0]),
                float(logits["value"][0, 0]))

    # -- training -----------------------------------------------------------

    def finish_episode(self, transitions: list[Transition]) -> None:
        """Fill discounted returns, then absorb into the replay buffer."""
        returns = discounted_returns([t.reward for t in transitions],
                                     self.cfg.gamma)
        for t, g in zip(transitions, returns):
            self.replay.append(Transition(t.state, t.action, t.log_prob,
                                          t.reward, t.value, t.terminal, g))
        overflow = len(self.replay) - self.cfg.replay_capacity
        if overflow > 0:
            del self.replay[:overflow]

    def maybe_update(self) -> list[float]:
        """Run PPO over the replay once it is full, then clear it."""
        if len(self.replay) < self.cfg.replay_capacity:
            return []
        losses = self.ppo_update(self.replay)
        self.replay = []
        return losses

    def ppo_update(self, transitions: list[Transition]) -> list[float]:
        """Clipped-surrogate update over shuffled minibatches; returns
        the per-minibatch losses."""
        if len(transitions) < self.cfg.batch_size:
            raise ValueError(
                f"ppo_update needs >= {self.cfg.batch_size} transitions")
        order = np.arange(len(transitions))
        self.rng.shuffle(order)
        losses = []
        bs = self.cfg.batch_size
        for start in range(0, len(order) - bs + 1, bs):
            batch = [transitions[i] for i in order[start:start + bs]]
            loss, grads = self.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise FloatingPointError("non-finite PPO loss")
            self.opt.step(grads)
            losses.append(loss)
        return losses

    def ppo_loss(self, batch: list[Transition]) -> float:
        return self._loss(batch, with_grads=False)[0]

    def loss_and_grads(self, batch: list[Transition]
                       ) -> tuple[float, list[np.ndarray]]:
        return self._loss(batch, with_grads=True)

    def _loss(self, batch: list[Transition], with_grads: bool):
        cfg = self.cfg
        b = len(batch)
        states = np.stack([t.state for t in batch])
        comp = np.array([t.action[0] for t in batch])
        dirn = np.array([t.action[1] for t in batch])
        logp_old = np.array([t.log_prob for t in batch])
        returns = np.array([t.ret for t in batch])
        values_old = np.array([t.value for t in batch])
        advantage = returns - values_old

        logits, cache = self.net.forward(states)
        lpc = log_softmax(logits["component"], axis=1)
        lpd = log_softmax(logits["direction"], axis=1)
        pc = softmax(logits["component"], axis=1)
        pd = softmax(logits["direction"], axis=1)
        v = logits["value"][:, 0]

        rows = np.arange(b)
        logp_new = lpc[rows, comp] + lpd[rows, dirn]
        ratio = np.exp(logp_new - logp_old)
        clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon,
                          1.0 + cfg.clip_epsilon)
        s1 = ratio * advantage
        s2 = clipped * advantage
        surrogate = np.minimum(s1, s2)
        ent_c = -(pc * lpc).sum(axis=1)
        ent_d = -(pd * lpd).sum(axis=1)
        loss = (-surrogate.mean()
                + cfg.value_coeff * ((v - returns) ** 2).mean()
                - cfg.entropy_coeff * (ent_c + ent_d).mean())
        if not with_grads:
            return float(loss), None

        unclipped_active = (s1 <= s2)
        dlogp = np.where(unclipped_active, -advantage * ratio, 0.0) / b
        dlc = dlogp[:, None] * (_onehot(comp, pc.shape[1]) - pc)
        dld = dlogp[:, None] * (_onehot(dirn, pd.shape[1]) - pd)
        # entropy term: d(-coef*H)/dz = coef * p * (log p + H)
        dlc += cfg.entropy_coeff * pc * (lpc + ent_c[:, None]) / b
        dld += cfg.entropy_coeff * pd * (lpd + ent_d[:, None]) / b
        dv = (2.0 * cfg.value_coeff * (v - returns) / b)[:, None]
        grads = self.net.backward(cache, {"component": dlc, "direction": dld,
                                          "value": dv})
        return float(loss), grads


def _onehot(indices: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(indices), width))
    out[np.arange(len(indices)), indices] = 1.0
    return out
