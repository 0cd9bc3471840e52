"""Bundled example circuits (template, testbench, matching pairs)."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..netlist import (CircuitTemplate, MatchingPairs, Testbench,
                       parse_pairs, parse_template, parse_testbench)

CIRCUIT_NAMES = ("five_transistor_ota", "common_source", "lpf")


@dataclass(frozen=True)
class CircuitBundle:
    name: str
    template_text: str
    testbench_text: str
    pairs_text: str
    template: CircuitTemplate
    testbench: Testbench
    pairs: MatchingPairs


def _read(name: str, filename: str) -> str:
    root = resources.files(__package__)
    return (root / name / filename).read_text(encoding="utf-8")


def load_circuit(name: str) -> CircuitBundle:
    if name not in CIRCUIT_NAMES:
        raise KeyError(f"unknown bundled circuit {name!r}; "
                       f"available: {', '.join(CIRCUIT_NAMES)}")
    template_text = _read(name, "template.sp")
    testbench_text = _read(name, "testbench.tb")
    pairs_text = _read(name, "pairs.txt")
    template = parse_template(template_text)
    return CircuitBundle(
        name=name,
        template_text=template_text,
        testbench_text=testbench_text,
        pairs_text=pairs_text,
        template=template,
        testbench=parse_testbench(testbench_text),
        pairs=parse_pairs(pairs_text, template),
    )
