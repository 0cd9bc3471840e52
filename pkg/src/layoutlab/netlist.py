"""Circuit templates, testbenches, matching pairs, and finger assignments.

The accepted netlist grammar is a small SPICE subset, one device per line:

    M<name> <d> <g> <s> <b> [nmos|pmos] W=<v> L=<v> [nf=<v>]
    R<name> <a> <b> <value>
    C<name> <a> <b> <value>
    .port (in|out|supply) <net> [<net> ...]
    .end
    * comment

Nets are declared implicitly by device terminals. MOS dimensions are kept
as integer nanometers; resistor/capacitor values as SI floats.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace

from .tech import TechnologyCard

DEFAULT_FINGERS = (2, 4, 6, 8, 10, 12, 14, 16)
DEFAULT_MAX_NETLISTS = 256

MOS_TERMINALS = ("d", "g", "s", "b")
PASSIVE_TERMINALS = ("p", "n")

_SUFFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
    "k": 1e3, "meg": 1e6, "g": 1e9, "t": 1e12,
}
_NUMBER_RE = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkgt])?$",
    re.IGNORECASE)


class ParseError(ValueError):
    """Syntax or semantic error in an input file, with source position."""

    def __init__(self, message: str, line: int, column: int = 1,
                 text: str = ""):
        self.line = line
        self.column = column
        self.text = text
        where = f"line {line}, column {column}"
        super().__init__(f"{where}: {message}" + (f" [{text}]" if text else ""))


def parse_spice_number(token: str) -> float:
    """Parse a SPICE number with optional SI suffix (1k, 0.15u, 2meg)."""
    m = _NUMBER_RE.match(token)
    if not m:
        raise ValueError(f"not a number: {token!r}")
    value = float(m.group(1))
    suffix = m.group(2)
    return value * _SUFFIX[suffix.lower()] if suffix else value


def _si_to_nm(value_si: float) -> int:
    return int(round(value_si * 1e9))


@dataclass(frozen=True)
class DeviceInstance:
    """One circuit element. MOS devices carry W/L in nm and an optional
    finger count; resistors/capacitors carry a single SI value."""

    name: str
    kind: str                       # nmos | pmos | resistor | capacitor
    terminals: tuple[str, ...]      # nets, ordered (d,g,s,b) or (p,n)
    w_nm: int | None = None
    l_nm: int | None = None
    value: float | None = None      # ohm or farad for R/C
    nf: int | None = None

    def __post_init__(self):
        if self.kind in ("nmos", "pmos"):
            if len(self.terminals) != 4:
                raise ValueError(f"{self.name}: MOS needs 4 terminals")
            if not self.w_nm or not self.l_nm or self.w_nm <= 0 or self.l_nm <= 0:
                raise ValueError(f"{self.name}: MOS needs W > 0 and L > 0")
        else:
            if len(self.terminals) != 2:
                raise ValueError(f"{self.name}: R/C needs 2 terminals")
            if self.value is None or self.value <= 0:
                raise ValueError(f"{self.name}: R/C needs a positive value")
        if self.nf is not None and (self.nf < 2 or self.nf % 2):
            raise ValueError(f"{self.name}: nf must be even and >= 2")

    @property
    def is_mos(self) -> bool:
        return self.kind in ("nmos", "pmos")

    @property
    def terminal_roles(self) -> tuple[str, ...]:
        return MOS_TERMINALS if self.is_mos else PASSIVE_TERMINALS


@dataclass(frozen=True)
class CircuitTemplate:
    """Parsed circuit: devices, the implicit net set, and declared ports."""

    devices: tuple[DeviceInstance, ...]
    ports: dict[str, str] = field(default_factory=dict)  # net -> role

    @property
    def nets(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for dev in self.devices:
            for net in dev.terminals:
                seen.setdefault(net)
        return tuple(seen)

    def device(self, name: str) -> DeviceInstance:
        for dev in self.devices:
            if dev.name == name:
                return dev
        raise KeyError(name)

    def mos_devices(self) -> tuple[DeviceInstance, ...]:
        return tuple(d for d in self.devices if d.is_mos)

    def strip_fingers(self) -> "CircuitTemplate":
        return CircuitTemplate(
            tuple(replace(d, nf=None) for d in self.devices), dict(self.ports))

    def net_terminals(self) -> dict[str, list[tuple[str, str]]]:
        """Map net -> [(device name, terminal role)] in device order."""
        out: dict[str, list[tuple[str, str]]] = {}
        for dev in self.devices:
            for role, net in zip(dev.terminal_roles, dev.terminals):
                out.setdefault(net, []).append((dev.name, role))
        return out


@dataclass(frozen=True)
class MatchingPairs:
    """Device pairs that must receive identical finger counts."""

    pairs: tuple[tuple[str, str], ...]

    def validate(self, template: CircuitTemplate) -> None:
        for a, b in self.pairs:
            try:
                da, db = template.device(a), template.device(b)
            except KeyError as exc:
                raise ValueError(f"matching pair names unknown device {exc}")
            if not (da.is_mos and db.is_mos):
                raise ValueError(f"pair ({a}, {b}): both must be MOS")
            if da.kind != db.kind:
                raise ValueError(f"pair ({a}, {b}): kinds differ")
            if (da.w_nm, da.l_nm) != (db.w_nm, db.l_nm):
                raise ValueError(f"pair ({a}, {b}): W/L differ")

    def groups(self, template: CircuitTemplate) -> list[tuple[str, ...]]:
        """Partition the template's MOS devices into matched groups
        (union of chained pairs), each sorted, ordered by leader name."""
        parent: dict[str, str] = {d.name: d.name for d in template.mos_devices()}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        buckets: dict[str, list[str]] = {}
        for name in parent:
            buckets.setdefault(find(name), []).append(name)
        return [tuple(sorted(v)) for _, v in sorted(buckets.items())]


FingerAssignment = dict[str, int]


def validate_assignment(template: CircuitTemplate, pairs: MatchingPairs,
                        assignment: FingerAssignment,
                        tech: TechnologyCard) -> list[str]:
    """Return the list of constraint violations (empty means valid)."""
    problems = []
    mos_names = {d.name for d in template.mos_devices()}
    if set(assignment) != mos_names:
        missing = sorted(mos_names - set(assignment))
        extra = sorted(set(assignment) - mos_names)
        if missing:
            problems.append(f"missing MOS devices: {', '.join(missing)}")
        if extra:
            problems.append(f"unknown devices: {', '.join(extra)}")
        return problems
    for name, nf in assignment.items():
        if nf < 2 or nf % 2:
            problems.append(f"{name}: nf={nf} not an even count >= 2")
            continue
        dev = template.device(name)
        if dev.w_nm / nf < tech.min_gate_width:
            problems.append(
                f"{name}: per-finger width {dev.w_nm / nf:.0f} nm below "
                f"minimum {tech.min_gate_width} nm")
    for group in pairs.groups(template):
        values = {assignment[n] for n in group if n in assignment}
        if len(values) > 1:
            problems.append(f"matched devices {group} have unequal nf")
    return problems


@dataclass(frozen=True)
class ConcreteNetlist:
    """A template with every MOS finger count fixed; index i orders it
    within the enumeration of all valid assignments."""

    template: CircuitTemplate
    assignment: FingerAssignment
    index: int = 0

    def devices(self) -> tuple[DeviceInstance, ...]:
        return tuple(
            replace(d, nf=self.assignment[d.name]) if d.is_mos else d
            for d in self.template.devices)

    def net_terminals(self) -> dict[str, list[tuple[str, str]]]:
        return self.template.net_terminals()

    @property
    def ports(self) -> dict[str, str]:
        return self.template.ports


@dataclass(frozen=True)
class Sweep:
    f_start: float = 1e3
    f_stop: float = 1e9
    points_per_decade: int = 50

    def __post_init__(self):
        if self.f_start >= self.f_stop:
            raise ValueError("sweep needs f_start < f_stop")
        if self.points_per_decade < 1:
            raise ValueError("sweep needs points_per_decade >= 1")


@dataclass(frozen=True)
class Testbench:
    """AC analysis description: source net, AC-grounded bias nets, the
    probed output net, and the frequency sweep."""

    source_net: str
    output_net: str
    magnitude: float = 1.0
    dc_bias: dict[str, float] = field(default_factory=dict)
    sweep: Sweep = field(default_factory=Sweep)


# ---------------------------------------------------------------------------
# parsing


def _tokenize(line: str) -> list[tuple[str, int]]:
    """Split a line into (token, 1-based column) pairs."""
    out = []
    for m in re.finditer(r"\S+", line):
        out.append((m.group(0), m.start() + 1))
    return out


def _strip_comment(line: str) -> str:
    # `;` starts an inline comment; `*` only comments whole lines.
    return line.split(";", 1)[0]


def _parse_kv(token: str, key: str, lineno: int, col: int, line: str) -> float:
    if "=" not in token:
        raise ParseError(f"expected {key}=<value>", lineno, col, line)
    k, v = token.split("=", 1)
    if k.lower() != key.lower():
        raise ParseError(f"expected {key}=, got {k}=", lineno, col, line)
    try:
        return parse_spice_number(v)
    except ValueError:
        raise ParseError(f"bad number for {key}: {v!r}", lineno, col, line)


def parse_template(text: str) -> CircuitTemplate:
    """Parse the SPICE subset into a CircuitTemplate.

    Raises ParseError with the offending line/column for syntax errors,
    duplicate device names, and ports naming undeclared nets.
    """
    devices: list[DeviceInstance] = []
    names: dict[str, int] = {}
    port_decls: list[tuple[str, str, int, int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = _tokenize(line)
        head, col0 = tokens[0]
        lower = head.lower()
        if lower == ".end":
            break
        if lower == ".port":
            if len(tokens) < 3:
                raise ParseError(".port needs a role and at least one net",
                                 lineno, col0, raw)
            role = tokens[1][0].lower()
            if role not in ("in", "out", "supply"):
                raise ParseError(f"unknown port role {role!r}", lineno,
                                 tokens[1][1], raw)
            for net, col in tokens[2:]:
                port_decls.append((net, role, lineno, col, raw))
            continue
        if lower.startswith("."):
            raise ParseError(f"unknown directive {head!r}", lineno, col0, raw)

        letter = head[0].upper()
        if letter == "M":
            if len(tokens) < 7:
                raise ParseError("MOS line needs: name, 4 nets, W=, L=",
                                 lineno, col0, raw)
            terminals = tuple(t for t, _ in tokens[1:5])
            rest = tokens[5:]
            kind = "nmos"
            if rest[0][0].lower() in ("nmos", "pmos"):
                kind = rest[0][0].lower()
                rest = rest[1:]
            if len(rest) < 2:
                raise ParseError("MOS line needs W= and L=", lineno, col0, raw)
            w_nm = _si_to_nm(_parse_kv(rest[0][0], "W", lineno, rest[0][1], raw))
            l_nm = _si_to_nm(_parse_kv(rest[1][0], "L", lineno, rest[1][1], raw))
            nf = None
            if len(rest) > 2:
                nf = int(_parse_kv(rest[2][0], "nf", lineno, rest[2][1], raw))
                if len(rest) > 3:
                    raise ParseError("trailing tokens on MOS line", lineno,
                                     rest[3][1], raw)
            try:
                dev = DeviceInstance(head, kind, terminals, w_nm=w_nm,
                                     l_nm=l_nm, nf=nf)
            except ValueError as exc:
                raise ParseError(str(exc), lineno, col0, raw)
        elif letter in ("R", "C"):
            if len(tokens) != 4:
                raise ParseError(f"{letter} line needs: name, 2 nets, value",
                                 lineno, col0, raw)
            terminals = (tokens[1][0], tokens[2][0])
            try:
                value = parse_spice_number(tokens[3][0])
            except ValueError:
                raise ParseError(f"bad value {tokens[3][0]!r}", lineno,
                                 tokens[3][1], raw)
            kind = "resistor" if letter == "R" else "capacitor"
            try:
                dev = DeviceInstance(head, kind, terminals, value=value)
            except ValueError as exc:
                raise ParseError(str(exc), lineno, col0, raw)
        else:
            raise ParseError(f"unknown element {head!r}", lineno, col0, raw)

        if dev.name in names:
            raise ParseError(f"duplicate device name {dev.name!r} "
                             f"(first on line {names[dev.name]})",
                             lineno, col0, raw)
        names[dev.name] = lineno
        devices.append(dev)

    declared = {net for dev in devices for net in dev.terminals}
    ports: dict[str, str] = {}
    for net, role, lineno, col, raw in port_decls:
        if net not in declared:
            raise ParseError(f"port net {net!r} not connected to any device",
                             lineno, col, raw)
        ports[net] = role
    return CircuitTemplate(tuple(devices), ports)


def parse_concrete(text: str, index: int = 0) -> ConcreteNetlist:
    """Parse a netlist whose MOS devices all carry nf annotations."""
    parsed = parse_template(text)
    assignment: FingerAssignment = {}
    for dev in parsed.mos_devices():
        if dev.nf is None:
            raise ValueError(f"{dev.name}: netlist lacks an nf annotation")
        assignment[dev.name] = dev.nf
    return ConcreteNetlist(parsed.strip_fingers(), assignment, index)


def parse_pairs(text: str, template: CircuitTemplate) -> MatchingPairs:
    """Parse a matching-pairs file: one `name name` pair per line."""
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = _tokenize(line)
        if len(tokens) != 2:
            raise ParseError("expected exactly two device names", lineno,
                             tokens[0][1], raw)
        pairs.append((tokens[0][0], tokens[1][0]))
    result = MatchingPairs(tuple(pairs))
    result.validate(template)
    return result


def parse_testbench(text: str) -> Testbench:
    """Parse testbench directives: .ac dec, .in, .bias, .out."""
    sweep = Sweep()
    source = None
    magnitude = 1.0
    output = None
    bias: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = _tokenize(line)
        head, col0 = tokens[0]
        lower = head.lower()
        try:
            if lower == ".ac":
                if len(tokens) != 5 or tokens[1][0].lower() != "dec":
                    raise ParseError(".ac needs: dec <points> <fstart> <fstop>",
                                     lineno, col0, raw)
                sweep = Sweep(
                    points_per_decade=int(parse_spice_number(tokens[2][0])),
                    f_start=parse_spice_number(tokens[3][0]),
                    f_stop=parse_spice_number(tokens[4][0]))
            elif lower == ".in":
                if len(tokens) not in (2, 3):
                    raise ParseError(".in needs: <net> [magnitude]",
                                     lineno, col0, raw)
                source = tokens[1][0]
                if len(tokens) == 3:
                    magnitude = parse_spice_number(tokens[2][0])
            elif lower == ".bias":
                if len(tokens) != 3:
                    raise ParseError(".bias needs: <net> <volts>",
                                     lineno, col0, raw)
                bias[tokens[1][0]] = parse_spice_number(tokens[2][0])
            elif lower == ".out":
                if len(tokens) != 2:
                    raise ParseError(".out needs: <net>", lineno, col0, raw)
                output = tokens[1][0]
            elif lower == ".end":
                break
            else:
                raise ParseError(f"unknown testbench directive {head!r}",
                                 lineno, col0, raw)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), lineno, col0, raw)
    if source is None:
        raise ParseError("testbench lacks an .in source directive", 1)
    if output is None:
        raise ParseError("testbench lacks an .out directive", 1)
    return Testbench(source, output, magnitude, bias, sweep)


# ---------------------------------------------------------------------------
# writing


def _format_um(nm: int) -> str:
    return f"{nm / 1000:.6g}u"


def write_template(template: CircuitTemplate) -> str:
    lines = []
    for dev in template.devices:
        if dev.is_mos:
            parts = [dev.name, *dev.terminals, dev.kind,
                     f"W={_format_um(dev.w_nm)}", f"L={_format_um(dev.l_nm)}"]
            if dev.nf is not None:
                parts.append(f"nf={dev.nf}")
            lines.append(" ".join(parts))
        else:
            lines.append(f"{dev.name} {dev.terminals[0]} {dev.terminals[1]} "
                         f"{dev.value!r}")
    for net, role in template.ports.items():
        lines.append(f".port {role} {net}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def write_netlist(netlist: ConcreteNetlist) -> str:
    """Serialize a concrete netlist; parse_concrete round-trips it."""
    annotated = CircuitTemplate(netlist.devices(), dict(netlist.ports))
    return write_template(annotated)


# ---------------------------------------------------------------------------
# finger enumeration


def apply_fingers(template: CircuitTemplate, assignment: FingerAssignment,
                  index: int = 0) -> ConcreteNetlist:
    """Bind an assignment to a template; the assignment must name exactly
    the template's MOS devices."""
    mos_names = {d.name for d in template.mos_devices()}
    missing = sorted(mos_names - set(assignment))
    if missing:
        raise ValueError(f"assignment missing MOS devices: {', '.join(missing)}")
    extra = sorted(set(assignment) - mos_names)
    if extra:
        raise ValueError(f"assignment names unknown devices: {', '.join(extra)}")
    return ConcreteNetlist(template.strip_fingers(), dict(assignment), index)


def enumerate_finger_permutations(
        template: CircuitTemplate, pairs: MatchingPairs,
        tech: TechnologyCard,
        allowed: tuple[int, ...] = DEFAULT_FINGERS,
        max_count: int | None = DEFAULT_MAX_NETLISTS) -> list[FingerAssignment]:
    """All valid finger assignments, sorted lexicographically by the nf
    vector over sorted device names, truncated to max_count.

    Returns [] when some device admits no allowed finger count.
    """
    pairs.validate(template)
    groups = pairs.groups(template)
    if not groups:
        # No MOS devices: the only concrete netlist is the template itself.
        return [{}]
    choices: list[list[int]] = []
    for group in groups:
        valid = []
        for nf in sorted(allowed):
            if nf < 2 or nf % 2:
                continue
            if all(template.device(n).w_nm / nf >= tech.min_gate_width
                   for n in group):
                valid.append(nf)
        if not valid:
            return []
        choices.append(valid)
    sorted_names = sorted(n for g in groups for n in g)
    assignments = []
    for combo in itertools.product(*choices):
        assignment = {}
        for group, nf in zip(groups, combo):
            for name in group:
                assignment[name] = nf
        assignments.append(assignment)
    assignments.sort(key=lambda a: tuple(a[n] for n in sorted_names))
    if max_count is not None:
        assignments = assignments[:max_count]
    return assignments
