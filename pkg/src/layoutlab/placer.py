"""Baseline placement: sequence-pair encoding packed by longest paths,
searched with simulated annealing on half-perimeter wirelength.

A block `a` placed before `b` in both sequences sits to b's left; before
in the first but after in the second sits above b. Packing solves the
induced horizontal/vertical constraint graphs by longest path, which
realizes the minimal coordinates for the encoded order relations.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field

from .geometry import ComponentTile

# A net is a list of pins; a pin is (tile index, (dx, dy)) with the
# offset measured from the tile's lower-left corner.
Pin = tuple[int, tuple[int, int]]
Net = list[Pin]


@dataclass(frozen=True)
class SequencePair:
    gamma_pos: tuple[int, ...]
    gamma_neg: tuple[int, ...]

    def __post_init__(self):
        n = len(self.gamma_pos)
        if sorted(self.gamma_pos) != list(range(n)) \
                or sorted(self.gamma_neg) != list(range(n)):
            raise ValueError("sequence pair must hold two permutations of 0..T-1")

    @staticmethod
    def identity(n: int) -> "SequencePair":
        return SequencePair(tuple(range(n)), tuple(range(n)))


@dataclass(frozen=True)
class AnnealSchedule:
    t0: float | None = None          # None: 10x HPWL stdev over 50 random SPs
    cooling: float = 0.95
    moves_per_temp: int = 100
    stop_ratio: float = 1e-4         # stop temperature = t0 * stop_ratio
    seed: int = 0
    patience: int | None = None      # temp levels without improvement

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must be in (0, 1)")
        if self.t0 is not None and self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.stop_ratio < 1:
            raise ValueError("stop_ratio must be in (0, 1)")
        if self.moves_per_temp < 1:
            raise ValueError("moves_per_temp must be >= 1")


def pack(sp: SequencePair, tiles: list[ComponentTile],
         margin: int = 0) -> list[tuple[int, int]]:
    """Lower-left coordinates realizing the sequence-pair relations.

    Adjacent tiles are separated by the sum of their margins, so each
    tile's halo fits without overlapping a neighbour's. Coordinates are
    minimal; a lone tile lands at the origin.
    """
    n = len(tiles)
    if n == 0:
        raise ValueError("pack needs at least one tile")
    pos_p = {b: i for i, b in enumerate(sp.gamma_pos)}
    pos_n = {b: i for i, b in enumerate(sp.gamma_neg)}
    x = [0] * n
    y = [0] * n
    # Process in gamma_neg order: both "left of" and "below" predecessors
    # of b appear earlier in gamma_neg.
    for b in sp.gamma_neg:
        for a in sp.gamma_neg:
            if a == b:
                break
            if pos_p[a] < pos_p[b]:  # a left of b
                x[b] = max(x[b], x[a] + tiles[a].width + 2 * margin)
            else:                    # a below b
                y[b] = max(y[b], y[a] + tiles[a].height + 2 * margin)
    return list(zip(x, y))


def place_tiles(sp: SequencePair, tiles: list[ComponentTile],
                margin: int = 0) -> list[ComponentTile]:
    coords = pack(sp, tiles, margin)
    return [t.translated(cx - t.ll[0], cy - t.ll[1])
            for t, (cx, cy) in zip(tiles, coords)]


def hpwl(coords: list[tuple[int, int]], nets: list[Net]) -> int:
    """Sum over nets of the pin bounding-box half perimeter (nm)."""
    total = 0
    for net in nets:
        if not net:
            raise ValueError("hpwl: net without pins")
        xs = [coords[i][0] + dx for i, (dx, _dy) in net]
        ys = [coords[i][1] + dy for i, (_dx, dy) in net]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


def _random_sp(n: int, rng: random.Random) -> SequencePair:
    p = list(range(n))
    q = list(range(n))
    rng.shuffle(p)
    rng.shuffle(q)
    return SequencePair(tuple(p), tuple(q))


def _swap_blocks(seq: tuple[int, ...], a: int, b: int) -> tuple[int, ...]:
    ia, ib = seq.index(a), seq.index(b)
    out = list(seq)
    out[ia], out[ib] = out[ib], out[ia]
    return tuple(out)


def anneal(tiles: list[ComponentTile], nets: list[Net],
           schedule: AnnealSchedule = AnnealSchedule(),
           margin: int = 0) -> tuple[SequencePair, list[ComponentTile]]:
    """Simulated annealing over sequence pairs, minimizing HPWL.

    Moves swap two blocks in the first sequence, the second, or both;
    equal-cost moves are accepted. Deterministic for a fixed seed.
    Returns the best-seen pair and the tiles placed accordingly.
    """
    n = len(tiles)
    rng = random.Random(schedule.seed)
    current = SequencePair.identity(n)
    if n == 1:
        return current, place_tiles(current, tiles, margin)

    cache: dict[tuple, int] = {}

    def cost(sp: SequencePair) -> int:
        key = (sp.gamma_pos, sp.gamma_neg)
        if key not in cache:
            cache[key] = hpwl(pack(sp, tiles, margin), nets)
        return cache[key]

    t0 = schedule.t0
    if t0 is None:
        samples = [cost(_random_sp(n, rng)) for _ in range(50)]
        spread = statistics.pstdev(samples)
        t0 = 10.0 * spread if spread > 0 else 1.0
    t_stop = t0 * schedule.stop_ratio

    cur_cost = cost(current)
    best, best_cost = current, cur_cost
    temperature = t0
    stale = 0
    while temperature > t_stop:
        improved = False
        for _ in range(schedule.moves_per_temp):
            a = rng.randrange(n)
            b = rng.randrange(n - 1)
            if b >= a:
                b += 1
            kind = rng.randrange(3)
            gp, gn = current.gamma_pos, current.gamma_neg
            if kind in (0, 2):
                gp = _swap_blocks(gp, a, b)
            if kind in (1, 2):
                gn = _swap_blocks(gn, a, b)
            candidate = SequencePair(gp, gn)
            delta = cost(candidate) - cur_cost
            if delta <= 0 or rng.random() < math.exp(-delta / temperature):
                current, cur_cost = candidate, cost(candidate)
                if cur_cost < best_cost:
                    best, best_cost = current, cur_cost
                    improved = True
        temperature *= schedule.cooling
        stale = 0 if improved else stale + 1
        if schedule.patience is not None and stale >= schedule.patience:
            break
    return best, place_tiles(best, tiles, margin)


def nets_from_terminals(tiles: list[ComponentTile],
                        net_terminals: dict[str, list[tuple[str, str]]]
                        ) -> list[Net]:
    """Convert netlist connectivity into placer pin lists, using each
    tile's pin offsets from its lower-left corner."""
    index = {t.name: i for i, t in enumerate(tiles)}
    nets: list[Net] = []
    for _net, terms in net_terminals.items():
        pins: Net = []
        for device, role in terms:
            tile = tiles[index[device]]
            x, y, _layer = tile.pins[role]
            pins.append((index[device], (x - tile.ll[0], y - tile.ll[1])))
        nets.append(pins)
    return nets
