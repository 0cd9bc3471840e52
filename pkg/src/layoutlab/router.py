"""Two-stage grid routing.

Global routing builds a per-net tree on a coarse grid with Dijkstra and
congestion-weighted costs; detailed routing realizes each net on the
fine grid (pitch = wire pitch, two layers, via between them) with A*
restricted to a corridor around the global route, falling back to the
full grid. Spacing is legal by construction: tracks sit one pitch apart
and wires are pitch minus min-spacing wide.
"""

from __future__ import annotations

import heapq
from collections import defaultdict

import numpy as np

from .geometry import InternalRepresentation, Layout, Rect, Via, WireSegment
from .tech import TechnologyCard

VIA_COST = 3
CONGESTION_PENALTY = 2.0
COARSE_FACTOR = 8

Cell = tuple[int, int]          # fine-grid (ix, iy)
Node = tuple[int, int, int]     # (layer index 0/1, ix, iy)


class Unroutable(RuntimeError):
    def __init__(self, net: str, reason: str = ""):
        self.net = net
        super().__init__(f"net {net!r} is unroutable"
                         + (f": {reason}" if reason else ""))


class RoutingGrid:
    """Fine-grid occupancy for both wiring layers plus per-net pin cells."""

    def __init__(self, die: Rect, tech: TechnologyCard,
                 coarse_factor: int = COARSE_FACTOR):
        self.die = die
        self.pitch = tech.wire_pitch
        self.tech = tech
        self.coarse = coarse_factor
        self.nx = (die[2] - die[0]) // self.pitch + 1
        self.ny = (die[3] - die[1]) // self.pitch + 1
        self.blocked = np.zeros((2, self.ny, self.nx), dtype=bool)
        self.pin_cells: dict[str, set[Cell]] = defaultdict(set)
        # metal1 cells adjacent to a pin, kept for that pin's net so other
        # nets cannot wall off the only access to it
        self.reserved: dict[Cell, set[str]] = {}

    def to_cell(self, x: int, y: int) -> Cell:
        dx, dy = x - self.die[0], y - self.die[1]
        if dx % self.pitch or dy % self.pitch:
            raise ValueError(f"point ({x}, {y}) off the routing lattice")
        ix, iy = dx // self.pitch, dy // self.pitch
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"point ({x}, {y}) outside the die")
        return ix, iy

    def to_point(self, cell: Cell) -> tuple[int, int]:
        return (self.die[0] + cell[0] * self.pitch,
                self.die[1] + cell[1] * self.pitch)

    def block_rect(self, rect: Rect) -> None:
        """Block every cell whose node lies on/inside the rectangle."""
        ix0 = max(0, -(-(rect[0] - self.die[0]) // self.pitch))
        iy0 = max(0, -(-(rect[1] - self.die[1]) // self.pitch))
        ix1 = min(self.nx - 1, (rect[2] - self.die[0]) // self.pitch)
        iy1 = min(self.ny - 1, (rect[3] - self.die[1]) // self.pitch)
        if ix0 <= ix1 and iy0 <= iy1:
            self.blocked[:, iy0:iy1 + 1, ix0:ix1 + 1] = True

    def register_pin(self, net: str, x: int, y: int) -> None:
        """Record a pin cell; call after tiles are blocked so the free
        neighbours can be reserved for this net."""
        ix, iy = self.to_cell(x, y)
        self.pin_cells[net].add((ix, iy))
        for nxx, nyy in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1),
                         (ix, iy - 1)):
            if 0 <= nxx < self.nx and 0 <= nyy < self.ny \
                    and not self.blocked[0, nyy, nxx]:
                self.reserved.setdefault((nxx, nyy), set()).add(net)

    def passable(self, net: str, layer: int, cell: Cell) -> bool:
        if layer == 0:
            owners = self.reserved.get(cell)
            if owners is not None and net not in owners:
                return False
        if not self.blocked[layer, cell[1], cell[0]]:
            return True
        # metal1 access to the net's own pins, which sit on blocked
        # tile-boundary cells
        return layer == 0 and cell in self.pin_cells[net]

    def commit(self, nodes: set[Node]) -> None:
        for layer, ix, iy in nodes:
            self.blocked[layer, iy, ix] = True

    # coarse-grid helpers -------------------------------------------------

    @property
    def coarse_nx(self) -> int:
        return -(-self.nx // self.coarse)

    @property
    def coarse_ny(self) -> int:
        return -(-self.ny // self.coarse)

    def to_coarse(self, cell: Cell) -> Cell:
        return (cell[0] // self.coarse, cell[1] // self.coarse)


def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _dijkstra_attach(sources: set[Cell], target: Cell, nx: int, ny: int,
                     cost_of: dict[Cell, float]) -> list[Cell] | None:
    """Shortest coarse path from any source to target; cost accrues on
    entering a cell. Returns the path target-exclusive of sources."""
    if target in sources:
        return []
    dist: dict[Cell, float] = {s: 0.0 for s in sources}
    parent: dict[Cell, Cell] = {}
    heap = [(0.0, s) for s in sorted(sources)]
    heapq.heapify(heap)
    seen: set[Cell] = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in seen:
            continue
        seen.add(cell)
        if cell == target:
            path = [cell]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            return path
        x, y = cell
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny) or nxt in seen:
                continue
            nd = d + cost_of.get(nxt, 1.0)
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                parent[nxt] = cell
                heapq.heappush(heap, (nd, nxt))
    return None


def global_route(grid: RoutingGrid,
                 ordered_nets: list[tuple[str, list[Cell]]]
                 ) -> dict[str, set[Cell]]:
    """Coarse tree per net: seed with the closest pin pair, then attach
    the nearest remaining pin via congestion-weighted Dijkstra."""
    occupancy: dict[Cell, int] = defaultdict(int)
    trees: dict[str, set[Cell]] = {}
    cnx, cny = grid.coarse_nx, grid.coarse_ny
    for name, pins in ordered_nets:
        coarse_pins = [grid.to_coarse(p) for p in pins]
        cost_of = {c: 1.0 + CONGESTION_PENALTY * n
                   for c, n in occupancy.items()}
        if len(coarse_pins) == 1:
            tree = {coarse_pins[0]}
        else:
            best = min(
                ((i, j) for i in range(len(coarse_pins))
                 for j in range(i + 1, len(coarse_pins))),
                key=lambda ij: (_manhattan(coarse_pins[ij[0]],
                                           coarse_pins[ij[1]]), ij))
            tree = {coarse_pins[best[0]]}
            remaining = [c for k, c in enumerate(coarse_pins)
                         if k != best[0]]
            while remaining:
                remaining.sort(
                    key=lambda c: (min(_manhattan(c, t) for t in tree), c))
                nxt = remaining.pop(0)
                path = _dijkstra_attach(tree, nxt, cnx, cny, cost_of)
                if path is None:
                    raise Unroutable(name, "no coarse path")
                tree.update(path)
        for cell in tree:
            occupancy[cell] += 1
        trees[name] = tree
    return trees


def _astar_attach(grid: RoutingGrid, net: str, sources: set[Node],
                  target_cell: Cell,
                  corridor: set[Cell] | None) -> list[Node] | None:
    """Multi-source A* to the target pin cell on metal1. Returns the node
    path from a source to the target, inclusive."""
    nx, ny = grid.nx, grid.ny
    tx, ty = target_cell

    def heuristic(layer: int, x: int, y: int) -> int:
        return abs(x - tx) + abs(y - ty) + (VIA_COST if layer != 0 else 0)

    dist: dict[Node, float] = {}
    parent: dict[Node, Node] = {}
    heap: list[tuple[float, int, Node]] = []
    tick = 0
    for node in sorted(sources):
        dist[node] = 0.0
        heapq.heappush(heap, (heuristic(*node), tick, node))
        tick += 1
    goal = (0, tx, ty)
    seen: set[Node] = set()
    while heap:
        _f, _t, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        if node == goal:
            path = [node]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            path.reverse()
            return path
        layer, x, y = node
        neighbours = (
            (layer, x + 1, y, 1), (layer, x - 1, y, 1),
            (layer, x, y + 1, 1), (layer, x, y - 1, 1),
            (1 - layer, x, y, VIA_COST),
        )
        for nl, nxx, nyy, step in neighbours:
            if not (0 <= nxx < nx and 0 <= nyy < ny):
                continue
            cell = (nxx, nyy)
            if corridor is not None and grid.to_coarse(cell) not in corridor:
                continue
            if not grid.passable(net, nl, cell):
                continue
            nxt = (nl, nxx, nyy)
            nd = dist[node] + step
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                parent[nxt] = node
                heapq.heappush(heap, (nd + heuristic(nl, nxx, nyy), tick, nxt))
                tick += 1
    return None


def _path_to_geometry(grid: RoutingGrid, net: str, path: list[Node]
                      ) -> tuple[list[WireSegment], list[Via]]:
    """Maximal straight same-layer runs become wire rectangles; layer
    flips become vias. Zero-length runs emit no wire."""
    half = grid.tech.wire_width // 2
    wires: list[WireSegment] = []
    vias: list[Via] = []

    def emit(run: list[Node]) -> None:
        if len(run) < 2:
            return
        layer = run[0][0]
        x0, y0 = grid.to_point((run[0][1], run[0][2]))
        x1, y1 = grid.to_point((run[-1][1], run[-1][2]))
        rect = (min(x0, x1) - half, min(y0, y1) - half,
                max(x0, x1) + half, max(y0, y1) + half)
        wires.append(WireSegment(net, 1 if layer == 0 else 2, rect))

    run: list[Node] = [path[0]]
    for prev, node in zip(path, path[1:]):
        if node[0] != prev[0]:
            emit(run)
            x, y = grid.to_point((node[1], node[2]))
            vias.append(Via(net, x, y))
            run = [node]
        elif len(run) >= 2 and not _collinear(run[-2], run[-1], node):
            emit(run)
            run = [run[-1], node]
        else:
            run.append(node)
    emit(run)
    return wires, vias


def _collinear(a: Node, b: Node, c: Node) -> bool:
    return (a[1] == b[1] == c[1]) or (a[2] == b[2] == c[2])


def detail_route(grid: RoutingGrid, name: str, pins: list[Cell],
                 coarse_tree: set[Cell] | None
                 ) -> tuple[list[WireSegment], list[Via], set[Node]]:
    """Route one net on the fine grid. Tries the corridor around the
    global tree first, then the full grid; raises Unroutable after that."""
    corridor: set[Cell] | None = None
    if coarse_tree is not None:
        corridor = set()
        for cx, cy in coarse_tree:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    corridor.add((cx + dx, cy + dy))
    ordered = sorted(set(pins))
    claimed: set[Node] = {(0, *ordered[0])}
    wires: list[WireSegment] = []
    vias: list[Via] = []
    remaining = ordered[1:]
    while remaining:
        remaining.sort(key=lambda c: (
            min(abs(c[0] - n[1]) + abs(c[1] - n[2]) for n in claimed), c))
        pin = remaining.pop(0)
        if (0, *pin) in claimed:
            continue
        path = _astar_attach(grid, name, claimed, pin, corridor)
        if path is None and corridor is not None:
            path = _astar_attach(grid, name, claimed, pin, None)
        if path is None:
            raise Unroutable(name, "A* found no fine-grid path")
        w, v = _path_to_geometry(grid, name, path)
        wires.extend(w)
        vias.extend(v)
        claimed.update(path)
    return wires, vias, claimed


def route_all(ir: InternalRepresentation,
              net_terminals: dict[str, list[tuple[str, str]]],
              tech: TechnologyCard, die: Rect,
              coarse_factor: int = COARSE_FACTOR) -> Layout:
    """Route every multi-pin net of the IR inside the die box.

    Nets are routed in descending pin count, then ascending pin-bbox
    half perimeter, then name; committed wires block later nets. The
    result is deterministic for identical inputs.
    """
    grid = RoutingGrid(die, tech, coarse_factor)
    for tile in ir.tiles:
        grid.block_rect(tile.box)

    pin_points: dict[str, list[tuple[int, int]]] = {}
    for net, terms in net_terminals.items():
        pts = []
        for device, role in terms:
            x, y, _layer = ir.tile(device).pins[role]
            pts.append((x, y))
            grid.register_pin(net, x, y)
        pin_points[net] = pts

    def net_hpwl(pts: list[tuple[int, int]]) -> int:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return (max(xs) - min(xs)) + (max(ys) - min(ys))

    multi = [(name, pts) for name, pts in pin_points.items()
             if len(set(pts)) >= 2]
    multi.sort(key=lambda item: (-len(item[1]), net_hpwl(item[1]), item[0]))
    ordered = [(name, sorted({grid.to_cell(*p) for p in pts}))
               for name, pts in multi]

    trees = global_route(grid, ordered)
    wires: list[WireSegment] = []
    vias: list[Via] = []
    for name, cells in ordered:
        w, v, claimed = detail_route(grid, name, cells, trees[name])
        wires.extend(w)
        vias.extend(v)
        grid.commit(claimed)
    return Layout(ir, tuple(wires), tuple(vias), die)
