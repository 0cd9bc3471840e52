"""Dataset tree emission and loading.

Layout of one dataset root:

    netlists/<circuit>/template.sp, testbench.tb, pairs.txt,
                       netlist_<iii>.sp
    data/<circuit>/simulations/netlist_<iii>_variant_<jjj>.pre / .post
    data/<circuit>/metrics/netlist_<iii>_variant_<jjj>.pex_score / .area
    data/<circuit>/layouts/netlist_<iii>_variant_<jjj>.gds
    data/<circuit>/metadata/netlist_<iii>_variant_<jjj>.tiles / .moves

Scalar files hold one plain decimal; traces are two-column text; tiles
is the JSON internal representation; moves lists one accumulated move
per line. Writes are idempotent, and rewriting a path with different
content is refused to guard against index collisions."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .acsim import SimulationTrace
from .explore import VariantRecord
from .gds import read_gds, write_gds
from .geometry import InternalRepresentation, Layout, ir_from_json, ir_to_json
from .netlist import ConcreteNetlist, write_netlist

DATA_SUBDIRS = ("simulations", "metrics", "layouts", "metadata")


class DatasetCollision(RuntimeError):
    pass


def _stem(i: int, j: int) -> str:
    return f"netlist_{i:03d}_variant_{j:03d}"


def variant_paths(root: Path, circuit: str, i: int, j: int) -> dict[str, Path]:
    data = Path(root) / "data" / circuit
    stem = _stem(i, j)
    return {
        "pre": data / "simulations" / f"{stem}.pre",
        "post": data / "simulations" / f"{stem}.post",
        "pex_score": data / "metrics" / f"{stem}.pex_score",
        "area": data / "metrics" / f"{stem}.area",
        "gds": data / "layouts" / f"{stem}.gds",
        "tiles": data / "metadata" / f"{stem}.tiles",
        "moves": data / "metadata" / f"{stem}.moves",
    }


def _write_guarded(path: Path, payload: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        existing = path.read_bytes()
        if existing == payload:
            return path
        raise DatasetCollision(f"{path} exists with different content")
    path.write_bytes(payload)
    return path


def moves_text(ir: InternalRepresentation) -> str:
    return "".join(f"{c} {d} {a}\n" for c, d, a in ir.moves)


def emit_variant(root: Path, circuit: str, record: VariantRecord,
                 template_text: str | None = None,
                 testbench_text: str | None = None,
                 pairs_text: str | None = None) -> list[Path]:
    """Write one variant's seven data files plus the shared netlist
    files; returns the created/confirmed paths."""
    root = Path(root)
    i, j = record.qos.netlist_index, record.qos.variant_index
    paths = variant_paths(root, circuit, i, j)
    written = [
        _write_guarded(paths["pre"], record.pre_trace.to_text().encode()),
        _write_guarded(paths["post"], record.post_trace.to_text().encode()),
        _write_guarded(paths["pex_score"],
                       f"{record.qos.pscore!r}\n".encode()),
        _write_guarded(paths["area"], f"{record.qos.area!r}\n".encode()),
        _write_guarded(paths["gds"], write_gds(record.layout)),
        _write_guarded(paths["tiles"], ir_to_json(record.ir).encode()),
        _write_guarded(paths["moves"], moves_text(record.ir).encode()),
    ]
    nets_dir = root / "netlists" / circuit
    written.append(_write_guarded(nets_dir / f"netlist_{i:03d}.sp",
                                  write_netlist(record.netlist).encode()))
    for filename, text in (("template.sp", template_text),
                           ("testbench.tb", testbench_text),
                           ("pairs.txt", pairs_text)):
        if text is not None:
            written.append(_write_guarded(nets_dir / filename, text.encode()))
    return written


@dataclass(frozen=True)
class LoadedVariant:
    circuit: str
    netlist_index: int
    variant_index: int
    pre: SimulationTrace
    post: SimulationTrace
    pscore: float
    area: float
    layout: Layout
    ir: InternalRepresentation
    moves: tuple[tuple[str, str, int], ...]


def load_variant(root: Path, circuit: str, i: int, j: int) -> LoadedVariant:
    paths = variant_paths(Path(root), circuit, i, j)
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        raise FileNotFoundError(f"incomplete variant: missing {missing[0]}")
    moves = []
    for line in paths["moves"].read_text().splitlines():
        c, d, a = line.split()
        moves.append((c, d, int(a)))
    return LoadedVariant(
        circuit=circuit,
        netlist_index=i,
        variant_index=j,
        pre=SimulationTrace.from_text(paths["pre"].read_text()),
        post=SimulationTrace.from_text(paths["post"].read_text()),
        pscore=float(paths["pex_score"].read_text()),
        area=float(paths["area"].read_text()),
        layout=read_gds(paths["gds"].read_bytes()),
        ir=ir_from_json(paths["tiles"].read_text()),
        moves=tuple(moves),
    )


def list_variants(root: Path, circuit: str) -> list[tuple[int, int]]:
    metrics = Path(root) / "data" / circuit / "metrics"
    out = []
    if not metrics.is_dir():
        return out
    for name in sorted(os.listdir(metrics)):
        if name.endswith(".pex_score"):
            stem = name[:-len(".pex_score")]
            parts = stem.split("_")
            out.append((int(parts[1]), int(parts[3])))
    return out


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class CircuitStats:
    circuit: str
    netlists: int
    variants_per_netlist: float
    total_variants: int
    pscore_mean: float
    pscore_var: float
    area_mean: float
    area_var: float
    wall_seconds: float | None  # estimated from file timestamps

    def as_dict(self) -> dict:
        return {
            "circuit": self.circuit,
            "netlists": self.netlists,
            "variants_per_netlist": self.variants_per_netlist,
            "total_variants": self.total_variants,
            "pscore_mean": self.pscore_mean,
            "pscore_var": self.pscore_var,
            "area_mean": self.area_mean,
            "area_var": self.area_var,
            "wall_seconds": self.wall_seconds,
        }


def _population_stats(values: list[float]) -> tuple[float, float]:
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, var


def summarize(root: Path) -> list[CircuitStats]:
    """Table-style statistics per circuit: explored netlists, variants,
    pscore/area moments, and a wall-time estimate from file mtimes."""
    root = Path(root)
    netlists_dir = root / "netlists"
    if not netlists_dir.is_dir():
        raise FileNotFoundError(f"{root} holds no dataset (no netlists/)")
    stats = []
    for circuit in sorted(os.listdir(netlists_dir)):
        circuit_dir = netlists_dir / circuit
        if not circuit_dir.is_dir():
            continue
        n_netlists = sum(1 for f in os.listdir(circuit_dir)
                         if f.startswith("netlist_") and f.endswith(".sp"))
        pairs_ij = list_variants(root, circuit)
        if not pairs_ij:
            continue
        pscores = []
        areas = []
        mtimes = []
        for i, j in pairs_ij:
            paths = variant_paths(root, circuit, i, j)
            pscores.append(float(paths["pex_score"].read_text()))
            areas.append(float(paths["area"].read_text()))
            mtimes.append(paths["pex_score"].stat().st_mtime)
        p_mean, p_var = _population_stats(pscores)
        a_mean, a_var = _population_stats(areas)
        wall = max(mtimes) - min(mtimes) if len(mtimes) > 1 else None
        stats.append(CircuitStats(
            circuit=circuit,
            netlists=n_netlists,
            variants_per_netlist=len(pairs_ij) / max(n_netlists, 1),
            total_variants=len(pairs_ij),
            pscore_mean=p_mean,
            pscore_var=p_var,
            area_mean=a_mean,
            area_var=a_var,
            wall_seconds=wall,
        ))
    if not stats:
        raise FileNotFoundError(f"{root} holds no variants")
    return stats


def render_stats(stats: list[CircuitStats]) -> str:
    header = (f"{'circuit':24} {'netlists':>8} {'var/netl':>9} "
              f"{'total':>6} {'pscore mean':>12} {'pscore var':>11} "
              f"{'area mean':>10} {'area var':>10} {'wall s':>8}")
    lines = [header, "-" * len(header)]
    for s in stats:
        wall = f"{s.wall_seconds:8.1f}" if s.wall_seconds is not None \
            else "     n/a"
        lines.append(
            f"{s.circuit:24} {s.netlists:8d} {s.variants_per_netlist:9.1f} "
            f"{s.total_variants:6d} {s.pscore_mean:12.5g} "
            f"{s.pscore_var:11.5g} {s.area_mean:10.5g} {s.area_var:10.5g} "
            f"{wall}")
    return "\n".join(lines) + "\n"
