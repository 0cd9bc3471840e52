"""AC small-signal simulation via modified nodal analysis.

MOS devices are linearized analytically with a square-law model (fixed
overdrive from the technology card), keeping every sweep point an exact
complex linear solve: A(w) = G + jwC plus one branch row for the ideal
AC source. Nets named "0"/"gnd" and every DC-biased net are AC ground.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netlist import ConcreteNetlist, DeviceInstance, Sweep, Testbench
from .tech import TechnologyCard

GROUND_NAMES = ("0", "gnd")

# LU solutions are rejected when the residual exceeds this times |b|_inf
RESIDUAL_RTOL = 1e-9


class SingularMatrix(RuntimeError):
    def __init__(self, message: str, node: str | None = None):
        self.node = node
        super().__init__(message + (f" (suspect node: {node})" if node else ""))


@dataclass(frozen=True)
class SmallSignalModel:
    """Linearized MOS quantities (siemens / farads)."""

    gm: float
    gds: float
    cgs: float
    cgd: float
    cdb: float
    csb: float

    @property
    def diffusion_cap(self) -> float:
        return self.cdb + self.csb


def small_signal(device: DeviceInstance, tech: TechnologyCard
                 ) -> SmallSignalModel:
    """Square-law linearization; diffusion capacitance follows the nf+1
    shared-region layout, so it shrinks as fingers increase."""
    if not device.is_mos:
        raise ValueError(f"{device.name}: small_signal needs a MOS device")
    if device.nf is None:
        raise ValueError(f"{device.name}: finger count not set")
    ratio = device.w_nm / device.l_nm
    gm = tech.k_prime * ratio * tech.v_ov
    i_d = 0.5 * tech.k_prime * ratio * tech.v_ov ** 2
    gds = tech.lambda_ * i_d
    w_um = device.w_nm / 1000.0
    l_um = device.l_nm / 1000.0
    l_diff_um = tech.l_diff / 1000.0
    cgs = (2.0 / 3.0) * tech.c_ox * w_um * l_um
    cgd = tech.c_ox * w_um * l_diff_um
    nf = device.nf
    finger_w_um = w_um / nf
    region_area = finger_w_um * l_diff_um          # um^2 per diffusion region
    region_side = 2.0 * finger_w_um                # um of sidewall per region
    # nf+1 regions share source and drain; the total junction capacitance
    # is split evenly so both terminals see the sharing benefit
    total = (nf + 1) * (tech.c_j * region_area + tech.c_jsw * region_side)
    cdb = total / 2.0
    csb = total / 2.0
    return SmallSignalModel(gm, gds, cgs, cgd, cdb, csb)


# ---------------------------------------------------------------------------
# circuit representation shared by pre-layout and annotated netlists


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    ohm: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    farad: float


@dataclass(frozen=True)
class Mos:
    name: str
    kind: str
    d: str
    g: str
    s: str
    b: str
    w_nm: int
    l_nm: int
    nf: int


Element = Resistor | Capacitor | Mos


@dataclass(frozen=True)
class Circuit:
    """Flat element list; annotation only remaps nodes and appends RC."""

    elements: tuple[Element, ...]

    @staticmethod
    def from_netlist(netlist: ConcreteNetlist) -> "Circuit":
        elements: list[Element] = []
        for dev in netlist.devices():
            if dev.is_mos:
                d, g, s, b = dev.terminals
                elements.append(Mos(dev.name, dev.kind, d, g, s, b,
                                    dev.w_nm, dev.l_nm, dev.nf))
            elif dev.kind == "resistor":
                elements.append(Resistor(dev.name, *dev.terminals, dev.value))
            else:
                elements.append(Capacitor(dev.name, *dev.terminals, dev.value))
        return Circuit(tuple(elements))

    def nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for el in self.elements:
            nets = (el.d, el.g, el.s, el.b) if isinstance(el, Mos) \
                else (el.n1, el.n2)
            for n in nets:
                seen.setdefault(n)
        return list(seen)


def write_circuit(circuit: Circuit) -> str:
    """SPICE-subset text for a circuit (used for annotated netlists)."""
    lines = []
    for el in circuit.elements:
        if isinstance(el, Mos):
            lines.append(f"{el.name} {el.d} {el.g} {el.s} {el.b} {el.kind} "
                         f"W={el.w_nm / 1000:.6g}u L={el.l_nm / 1000:.6g}u "
                         f"nf={el.nf}")
        elif isinstance(el, Resistor):
            lines.append(f"{el.name} {el.n1} {el.n2} {el.ohm!r}")
        else:
            lines.append(f"{el.name} {el.n1} {el.n2} {el.farad!r}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class SimulationTrace:
    """|V(out)| samples over a log-spaced frequency sweep."""

    freqs: tuple[float, ...]
    mags: tuple[float, ...]

    def __post_init__(self):
        if len(self.freqs) != len(self.mags):
            raise ValueError("frequency/magnitude length mismatch")
        if any(b <= a for a, b in zip(self.freqs, self.freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.freqs)

    def to_text(self) -> str:
        return "".join(f"{f!r} {m!r}\n" for f, m in zip(self.freqs, self.mags))

    @staticmethod
    def from_text(text: str) -> "SimulationTrace":
        freqs, mags = [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            f, m = line.split()
            freqs.append(float(f))
            mags.append(float(m))
        return SimulationTrace(tuple(freqs), tuple(mags))


def sweep_frequencies(sweep: Sweep) -> np.ndarray:
    decades = np.log10(sweep.f_stop / sweep.f_start)
    k = int(round(decades * sweep.points_per_decade)) + 1
    exponents = np.arange(k) / sweep.points_per_decade
    return sweep.f_start * np.power(10.0, exponents)


# ---------------------------------------------------------------------------
# MNA assembly and solve


def _stamp_conductance(G, idx, n1, n2, g):
    i, j = idx.get(n1), idx.get(n2)
    if i is not None:
        G[i, i] += g
    if j is not None:
        G[j, j] += g
    if i is not None and j is not None:
        G[i, j] -= g
        G[j, i] -= g


def _stamp_vccs(G, idx, out_p, out_n, ctrl_p, ctrl_n, gm):
    """Current gm*(v_ctrl_p - v_ctrl_n) flowing out_p -> out_n."""
    for node, sign_node in ((out_p, +1.0), (out_n, -1.0)):
        i = idx.get(node)
        if i is None:
            continue
        for ctrl, sign_ctrl in ((ctrl_p, +1.0), (ctrl_n, -1.0)):
            j = idx.get(ctrl)
            if j is not None:
                G[i, j] += sign_node * sign_ctrl * gm


def ac_sweep(circuit: Circuit | ConcreteNetlist, tb: Testbench,
             tech: TechnologyCard) -> SimulationTrace:
    """Solve G + jwC at every sweep frequency and record |V(out)|.

    Raises SingularMatrix for floating nodes (with the suspect node
    named) or when the LU residual exceeds the accepted bound.
    """
    if isinstance(circuit, ConcreteNetlist):
        circuit = Circuit.from_netlist(circuit)
    ground = {n for n in circuit.nodes()
              if n.lower() in GROUND_NAMES} | set(tb.dc_bias)
    nodes = [n for n in circuit.nodes() if n not in ground]
    if tb.source_net in ground:
        raise ValueError(f"source net {tb.source_net!r} is AC ground")
    if tb.source_net not in nodes:
        raise ValueError(f"source net {tb.source_net!r} not in circuit")
    if tb.output_net not in nodes and tb.output_net not in ground:
        raise ValueError(f"output net {tb.output_net!r} not in circuit")
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)

    G = np.zeros((n, n))
    C = np.zeros((n, n))
    for el in circuit.elements:
        if isinstance(el, Resistor):
            _stamp_conductance(G, idx, el.n1, el.n2, 1.0 / el.ohm)
        elif isinstance(el, Capacitor):
            _stamp_conductance(C, idx, el.n1, el.n2, el.farad)
        else:
            model = small_signal(
                DeviceInstance(el.name, el.kind, (el.d, el.g, el.s, el.b),
                               w_nm=el.w_nm, l_nm=el.l_nm, nf=el.nf), tech)
            # intrinsic channel elements only; the junction capacitances
            # (model.cdb/csb) belong to diffusion geometry and enter the
            # post-layout netlist through parasitic extraction
            _stamp_vccs(G, idx, el.d, el.s, el.g, el.s, model.gm)
            _stamp_conductance(G, idx, el.d, el.s, model.gds)
            _stamp_conductance(C, idx, el.g, el.s, model.cgs)
            _stamp_conductance(C, idx, el.g, el.d, model.cgd)

    # ideal AC source branch row/column
    m = n + 1
    src = idx[tb.source_net]
    A_G = np.zeros((m, m))
    A_C = np.zeros((m, m))
    A_G[:n, :n] = G
    A_C[:n, :n] = C
    A_G[src, n] = 1.0
    A_G[n, src] = 1.0
    rhs = np.zeros(m, dtype=complex)
    rhs[n] = tb.magnitude

    freqs = sweep_frequencies(tb.sweep)
    omega = 2.0 * np.pi * freqs
    A = A_G[None, :, :] + 1j * omega[:, None, None] * A_C[None, :, :]
    b = np.broadcast_to(rhs[:, None], (len(freqs), m, 1)).copy()
    try:
        x = np.linalg.solve(A, b)[:, :, 0]
        residual = np.abs(np.einsum("kij,kj->ki", A, x) - rhs).max()
        bound = RESIDUAL_RTOL * np.abs(rhs).max()
        if np.isfinite(residual) and residual > bound:
            # one step of iterative refinement tightens ill-conditioned
            # near-ideal-connection cases
            r = rhs[None, :] - np.einsum("kij,kj->ki", A, x)
            x = x + np.linalg.solve(A, r[:, :, None])[:, :, 0]
            residual = np.abs(np.einsum("kij,kj->ki", A, x) - rhs).max()
    except np.linalg.LinAlgError:
        raise SingularMatrix("MNA matrix is singular",
                             node=_suspect_node(A_G, A_C, nodes))
    # backward-error acceptance: reduces to rtol*|b| for well-scaled
    # systems, stays meaningful when huge conductances blow up |A|
    scale = max(np.abs(rhs).max(),
                float(np.abs(A).sum(axis=2).max() * np.abs(x).max()))
    if not np.isfinite(x).all() or residual > RESIDUAL_RTOL * scale:
        raise SingularMatrix(
            f"LU residual {residual:.3e} exceeds bound "
            f"{RESIDUAL_RTOL * scale:.3e}",
            node=_suspect_node(A_G, A_C, nodes))

    if tb.output_net in ground:
        mags = np.zeros(len(freqs))
    else:
        mags = np.abs(x[:, idx[tb.output_net]])
    return SimulationTrace(tuple(freqs.tolist()), tuple(mags.tolist()))


def _suspect_node(A_G: np.ndarray, A_C: np.ndarray,
                  nodes: list[str]) -> str | None:
    combined = np.abs(A_G) + np.abs(A_C)
    for i, name in enumerate(nodes):
        if combined[i].max() == 0 or combined[:, i].max() == 0:
            return name
    return None
