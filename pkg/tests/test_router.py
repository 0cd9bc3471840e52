import heapq
import random

import pytest

from layoutlab.explore import ExplorationConfig, baseline_pnr
from layoutlab.gds import write_gds
from layoutlab.geometry import shift_component
from layoutlab.router import (RoutingGrid, Unroutable, VIA_COST,
                              _astar_attach, detail_route, global_route,
                              route_all)
from layoutlab.verify import drc, extract_connectivity, lvs


def _grid(tech, w=4000, h=4000):
    return RoutingGrid((0, 0, w, h), tech)


def oracle_dijkstra(grid, net, sources, target):
    """Independent shortest-path cost on the same weighted graph."""
    heap = [(0, s) for s in sorted(sources)]
    dist = {s: 0 for s in sources}
    heapq.heapify(heap)
    goal = (0, *target)
    while heap:
        d, node = heapq.heappop(heap)
        if node == goal:
            return d
        if d > dist.get(node, 1 << 60):
            continue
        layer, x, y = node
        steps = [(layer, x + 1, y, 1), (layer, x - 1, y, 1),
                 (layer, x, y + 1, 1), (layer, x, y - 1, 1),
                 (1 - layer, x, y, VIA_COST)]
        for nl, nx, ny, w in steps:
            if not (0 <= nx < grid.nx and 0 <= ny < grid.ny):
                continue
            if not grid.passable(net, nl, (nx, ny)):
                continue
            nd = d + w
            if nd < dist.get((nl, nx, ny), 1 << 60):
                dist[(nl, nx, ny)] = nd
                heapq.heappush(heap, (nd, (nl, nx, ny)))
    return None


def path_cost(path):
    cost = 0
    for a, b in zip(path, path[1:]):
        cost += VIA_COST if a[0] != b[0] else 1
    return cost


def test_adjacent_coarse_cells_single_step(tech):
    grid = _grid(tech)
    trees = global_route(grid, [("n", [(0, 0), (8, 0)])])
    assert trees["n"] == {(0, 0), (1, 0)}


def test_coarse_cost_is_manhattan_on_empty_grid(tech):
    grid = _grid(tech, 8000, 8000)
    trees = global_route(grid, [("n", [(0, 0), (72, 48)])])
    # L1 distance in coarse cells is 9 + 6; the tree is a shortest path
    assert len(trees["n"]) == 9 + 6 + 1


def test_three_collinear_pins_span(tech):
    grid = _grid(tech, 8000, 1000)
    pins = [(0, 0), (32, 0), (72, 0)]
    trees = global_route(grid, [("n", pins)])
    assert trees["n"] == {(x, 0) for x in range(10)}


def test_straight_connection_single_segment_no_vias(tech):
    grid = _grid(tech)
    grid.register_pin("n", 0, 500)
    grid.register_pin("n", 3000, 500)
    wires, vias, _ = detail_route(grid, "n",
                                  [grid.to_cell(0, 500),
                                   grid.to_cell(3000, 500)], None)
    assert len(wires) == 1 and vias == []
    assert wires[0].rect == (0 - 25, 500 - 25, 3000 + 25, 500 + 25)


def test_detour_cost_matches_oracle(tech):
    grid = _grid(tech)
    grid.block_rect((1000, 0, 1200, 3900))  # wall with a gap at the top
    a = grid.to_cell(500, 500)
    b = grid.to_cell(2500, 500)
    path = _astar_attach(grid, "n", {(0, *a)}, b, None)
    assert path is not None
    assert path_cost(path) == oracle_dijkstra(grid, "n", {(0, *a)}, b)


def test_astar_equals_dijkstra_on_random_grids(tech):
    rng = random.Random(99)
    for trial in range(30):
        grid = _grid(tech, 3000, 3000)
        for _ in range(rng.randrange(5, 25)):
            x = rng.randrange(grid.nx) * tech.wire_pitch
            y = rng.randrange(grid.ny) * tech.wire_pitch
            grid.block_rect((x, y, x + 300, y + 300))
        free = [(x, y) for x in range(grid.nx) for y in range(grid.ny)
                if grid.passable("n", 0, (x, y))]
        a, b = rng.sample(free, 2)
        path = _astar_attach(grid, "n", {(0, *a)}, b, None)
        want = oracle_dijkstra(grid, "n", {(0, *a)}, b)
        if want is None:
            assert path is None
        else:
            assert path is not None and path_cost(path) == want


def test_crossing_nets_use_second_layer(tech):
    grid = _grid(tech)
    for x, y in ((0, 2000), (3900, 2000), (2000, 0), (2000, 3900)):
        grid.register_pin("h" if y == 2000 else "v", x, y)
    wires_h, vias_h, claimed = detail_route(
        grid, "h", [grid.to_cell(0, 2000), grid.to_cell(3900, 2000)], None)
    grid.commit(claimed)
    wires_v, vias_v, _ = detail_route(
        grid, "v", [grid.to_cell(2000, 0), grid.to_cell(2000, 3900)], None)
    assert vias_h == []
    assert len(vias_v) == 2
    assert {w.layer for w in wires_v} == {1, 2}
    # no same-layer overlap between the two nets
    for a in wires_h:
        for b in wires_v:
            if a.layer != b.layer:
                continue
            ax0, ay0, ax1, ay1 = a.rect
            bx0, by0, bx1, by1 = b.rect
            assert ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0


def test_unroutable_when_target_walled_in(tech):
    grid = _grid(tech)
    grid.block_rect((900, 900, 2100, 2100))
    # target stranded strictly inside the blocked region on both layers
    with pytest.raises(Unroutable):
        detail_route(grid, "n", [grid.to_cell(0, 0),
                                 grid.to_cell(1500, 1500)], None)


def test_route_all_is_deterministic(ota_baseline, ota_netlist, tech):
    ir = ota_baseline.record.ir
    a = route_all(ir, ota_netlist.net_terminals(), tech, ota_baseline.die)
    b = route_all(ir, ota_netlist.net_terminals(), tech, ota_baseline.die)
    assert write_gds(a) == write_gds(b)


def test_route_all_clean_and_lvs_after_shift(ota_baseline, ota_netlist,
                                             ota, tech):
    ir = shift_component(ota_baseline.record.ir,
                         ota_baseline.record.ir.tiles[0].name, "up", 100)
    layout = route_all(ir, ota_netlist.net_terminals(), tech,
                       ota_baseline.die)
    assert drc(layout, tech) == []
    assert lvs(extract_connectivity(layout), ota_netlist).passed


def test_wire_widths_equal_tech_width(ota_baseline, tech):
    for wire in ota_baseline.record.layout.wires:
        r = wire.rect
        assert min(r[2] - r[0], r[3] - r[1]) == tech.wire_width


def test_no_two_nets_share_a_fine_cell(ota_baseline, tech):
    seen = {}
    for wire in ota_baseline.record.layout.wires:
        r = wire.rect
        axis_cells = []
        if r[2] - r[0] >= r[3] - r[1]:
            y = (r[1] + r[3]) // 2
            for x in range(r[0] + 25, r[2], tech.wire_pitch):
                axis_cells.append((wire.layer, x, y))
        else:
            x = (r[0] + r[2]) // 2
            for y in range(r[1] + 25, r[3], tech.wire_pitch):
                axis_cells.append((wire.layer, x, y))
        for cell in axis_cells:
            assert seen.setdefault(cell, wire.net) == wire.net
