"""Generalized circuits over [0, 1].

Gate kinds: constant, scaling, truncated addition and subtraction, and
the brittle comparison against a constant. A two-input comparison
pseudo-gate ("gt2") is accepted when building a circuit and rewritten into
core gates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

import networkx as nx

from .errors import NotAnEpsSolution, NotForwardEvaluable
from .linfeas import Infeasible, LinearSystem, feasible_point
from .netcore import ONE, ZERO, as_rational, clamp01, fmt_rational

HALF = Fraction(1, 2)


class GateKind(str, enum.Enum):
    CONST = "const"
    SCALE = "scale"
    ADD = "add"
    SUB = "sub"
    GT = "gt"
    GT2 = "gt2"


ARITY = {
    GateKind.CONST: 0,
    GateKind.SCALE: 1,
    GateKind.ADD: 2,
    GateKind.SUB: 2,
    GateKind.GT: 1,
    GateKind.GT2: 2,
}
HAS_ZETA = {GateKind.CONST, GateKind.SCALE, GateKind.GT}
STATEFUL = {GateKind.ADD, GateKind.SUB, GateKind.GT}


class State(str, enum.Enum):
    L = "L"
    M = "M"
    H = "H"


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    inputs: tuple
    output: str
    zeta: Optional[Fraction] = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) != ARITY[kind]:
            raise ValueError(f"{kind.value} gate takes {ARITY[kind]} inputs, got {len(self.inputs)}")
        if kind in HAS_ZETA:
            if self.zeta is None:
                raise ValueError(f"{kind.value} gate needs a parameter zeta")
            z = as_rational(self.zeta)
            if not 0 <= z <= 1:
                raise ValueError("zeta must lie in [0, 1]")
            object.__setattr__(self, "zeta", z)
        elif self.zeta is not None:
            raise ValueError(f"{kind.value} gate takes no parameter")


@dataclass(frozen=True)
class GCircuit:
    """Nodes plus gates; gate ids are positions in ``gates``. Cycles are allowed."""

    nodes: tuple
    gates: tuple

    def __post_init__(self):
        nodes = tuple(self.nodes)
        gates = tuple(g if isinstance(g, Gate) else Gate(**g) for g in self.gates)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node names")
        known = set(nodes)
        driven = set()
        for i, g in enumerate(gates):
            if g.kind == GateKind.GT2:
                raise ValueError("gt2 pseudo-gates must be expanded; use GCircuit.build")
            for v in g.inputs + (g.output,):
                if v not in known:
                    raise ValueError(f"gate {i} mentions unknown node {v!r}")
            if g.output in driven:
                raise ValueError(f"node {g.output!r} is the output of more than one gate")
            driven.add(g.output)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "gates", gates)

    @classmethod
    def build(cls, nodes, gates) -> "GCircuit":
        """Construct a circuit, rewriting any gt2 pseudo-gates first."""
        nodes = list(nodes)
        gates = [g if isinstance(g, Gate) else Gate(**g) for g in gates]
        out_nodes, out_gates = list(nodes), []
        for g in gates:
            if g.kind == GateKind.GT2:
                extra_nodes, extra_gates = _binary_gt_parts(g, set(out_nodes))
                out_nodes.extend(extra_nodes)
                out_gates.extend(extra_gates)
            else:
                out_gates.append(g)
        return cls(tuple(out_nodes), tuple(out_gates))

    @property
    def driver(self) -> dict:
        return {g.output: i for i, g in enumerate(self.gates)}

    @property
    def stateful_gates(self) -> list:
        return [i for i, g in enumerate(self.gates) if g.kind in STATEFUL]

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self._graph())

    def _graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for gate in self.gates:
            for a in gate.inputs:
                g.add_edge(a, gate.output)
        return g


def _binary_gt_parts(g: Gate, taken: set):
    a, b = g.inputs
    v = g.output

    def fresh(tag):
        name = f"{v}#{tag}"
        k = 0
        while name in taken:
            k += 1
            name = f"{v}#{tag}{k}"
        taken.add(name)
        return name

    d1, h, s1, d2, u = (fresh(t) for t in ("ab", "half", "shift", "ba", "u"))
    gates = [
        Gate(GateKind.SUB, (a, b), d1),
        Gate(GateKind.CONST, (), h, HALF),
        Gate(GateKind.ADD, (h, d1), s1),
        Gate(GateKind.SUB, (b, a), d2),
        Gate(GateKind.SUB, (s1, d2), u),
        Gate(GateKind.GT, (u,), v, HALF),
    ]
    return [d1, h, s1, d2, u], gates


def gc_expand_binary_gt(circ_nodes, circ_gates, gate_index: int) -> GCircuit:
    """Replace the gt2 pseudo-gate at ``gate_index`` by its unary-comparison subcircuit.

    The subcircuit computes u = [[1/2 + [a - b]] - [b - a]] and compares u
    against 1/2. Other gt2 gates, if any, are expanded as well.
    """
    gates = [g if isinstance(g, Gate) else Gate(**g) for g in circ_gates]
    if gates[gate_index].kind != GateKind.GT2:
        raise ValueError(f"gate {gate_index} is not a binary comparison")
    return GCircuit.build(circ_nodes, gates)


# ---------------------------------------------------------------------------
# semantics


def gate_value(g: Gate, x: Mapping) -> Optional[Fraction]:
    """The exact output a gate asks for, or None inside a comparison's brittle band at eps=0."""
    if g.kind == GateKind.CONST:
        return g.zeta
    if g.kind == GateKind.SCALE:
        return g.zeta * x[g.inputs[0]]
    if g.kind == GateKind.ADD:
        return clamp01(x[g.inputs[0]] + x[g.inputs[1]])
    if g.kind == GateKind.SUB:
        return clamp01(x[g.inputs[0]] - x[g.inputs[1]])
    if g.kind == GateKind.GT:
        xa = x[g.inputs[0]]
        if xa > g.zeta:
            return ONE
        if xa < g.zeta:
            return ZERO
        return None
    raise ValueError(g.kind)


@dataclass(frozen=True)
class GateCheck:
    gate: int
    ok: bool
    detail: str


@dataclass(frozen=True)
class GcReport:
    eps: Fraction
    gates: tuple
    range_violations: tuple
    verdict: bool

    def __bool__(self):
        return self.verdict

    @property
    def failing(self) -> list:
        return [c.gate for c in self.gates if not c.ok]


def _check_gate(g: Gate, x: Mapping, eps: Fraction) -> tuple:
    xv = x[g.output]
    if g.kind == GateKind.GT:
        xa = x[g.inputs[0]]
        if xa < g.zeta - eps:
            return abs(xv) <= eps, f"input below band, output {fmt_rational(xv)}"
        if xa > g.zeta + eps:
            return abs(xv - 1) <= eps, f"input above band, output {fmt_rational(xv)}"
        return True, "input inside band"
    want = gate_value(g, x)
    err = abs(xv - want)
    return err <= eps, f"|x[v] - target| = {fmt_rational(err)}"


def gc_is_eps_solution(circ: GCircuit, x: Mapping, eps=0) -> GcReport:
    eps = as_rational(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    missing = set(circ.nodes) - set(x)
    if missing:
        raise ValueError(f"assignment misses nodes {sorted(missing)}")
    x = {v: as_rational(x[v]) for v in circ.nodes}
    out_of_range = tuple(v for v in circ.nodes if not 0 <= x[v] <= 1)
    checks = []
    for i, g in enumerate(circ.gates):
        ok, detail = _check_gate(g, x, eps)
        checks.append(GateCheck(i, ok, detail))
    verdict = not out_of_range and all(c.ok for c in checks)
    return GcReport(eps, tuple(checks), out_of_range, verdict)


def gc_discretize(circ: GCircuit, x: Mapping, eps=0) -> dict:
    """Discrete states read off a continuous eps-solution."""
    eps = as_rational(eps)
    if not gc_is_eps_solution(circ, x, eps):
        raise NotAnEpsSolution("x is not an eps-solution of the circuit")
    x = {v: as_rational(x[v]) for v in circ.nodes}
    d = {}
    for i, g in enumerate(circ.gates):
        if g.kind == GateKind.ADD:
            d[i] = State.H if x[g.inputs[0]] + x[g.inputs[1]] >= 1 else State.M
        elif g.kind == GateKind.SUB:
            d[i] = State.L if x[g.inputs[0]] - x[g.inputs[1]] <= 0 else State.M
        elif g.kind == GateKind.GT:
            xa = x[g.inputs[0]]
            if xa < g.zeta - eps:
                d[i] = State.L
            elif xa > g.zeta + eps:
                d[i] = State.H
            else:
                d[i] = State.M
    return d


def _within(ls: LinearSystem, coeffs: dict, center, eps) -> None:
    """Add |coeffs . x - center| <= eps as two inequalities."""
    ls.le(coeffs, center + eps)
    ls.ge(coeffs, center - eps)


def gc_lfp(circ: GCircuit, d: Mapping, eps) -> LinearSystem:
    """The linear system whose feasible points are the eps-solutions compatible with d."""
    eps = as_rational(eps)
    ls = LinearSystem()
    for v in circ.nodes:
        ls.add_var(v)
        ls.ge({v: 1}, 0)
        ls.le({v: 1}, 1)
    for i, g in enumerate(circ.gates):
        v = g.output
        if g.kind == GateKind.CONST:
            _within(ls, {v: 1}, g.zeta, eps)
            continue
        if g.kind == GateKind.SCALE:
            a = g.inputs[0]
            coeffs = {v: 1}
            coeffs[a] = coeffs.get(a, 0) - g.zeta
            _within(ls, coeffs, 0, eps)
            continue
        if i not in d:
            raise ValueError(f"no discrete state for gate {i}")
        s = State(d[i])
        if g.kind == GateKind.ADD:
            a, b = g.inputs
            ab = _lin({a: 1}, {b: 1})
            if s in (State.L, State.M):
                ls.le(ab, 1 + eps)
                _within(ls, _lin({v: 1}, {a: -1}, {b: -1}), 0, eps)
            else:
                ls.ge(ab, 1 - eps)
                _within(ls, {v: 1}, 1, eps)
        elif g.kind == GateKind.SUB:
            a, b = g.inputs
            ab = _lin({a: 1}, {b: -1})
            if s == State.L:
                ls.le(ab, eps)
                _within(ls, {v: 1}, 0, eps)
            else:
                ls.ge(ab, -eps)
                _within(ls, _lin({v: 1}, {a: -1}, {b: 1}), 0, eps)
        elif g.kind == GateKind.GT:
            a = g.inputs[0]
            if s == State.L:
                ls.le({a: 1}, g.zeta + eps)
                _within(ls, {v: 1}, 0, eps)
            elif s == State.M:
                _within(ls, {a: 1}, g.zeta, eps)
            else:
                ls.ge({a: 1}, g.zeta - eps)
                _within(ls, {v: 1}, 1, eps)
    return ls


def _lin(*parts) -> dict:
    out: dict = {}
    for p in parts:
        for k, c in p.items():
            out[k] = out.get(k, 0) + c
    return {k: c for k, c in out.items() if c != 0}


def gc_lfp_reconstruct(circ: GCircuit, d: Mapping, eps=0):
    """A continuous eps-solution compatible with the discrete states d, or ``Infeasible``."""
    res = feasible_point(gc_lfp(circ, d, eps))
    if isinstance(res, Infeasible):
        return res
    return {v: res[v] for v in circ.nodes}


def gc_forward(
    circ: GCircuit,
    inputs: Mapping,
    eps=0,
    perturb: Optional[Callable] = None,
) -> dict:
    """Evaluate an acyclic circuit from values on its undriven nodes.

    ``perturb(gate_index, lo, hi)`` picks the output of each gate from the
    interval the gate allows at ``eps``; the default picks the exact
    target, and 1/2 for a comparison whose input sits exactly on the
    threshold.
    """
    eps = as_rational(eps)
    if not circ.is_acyclic():
        raise NotForwardEvaluable("circuit has a cycle")
    driver = circ.driver
    x = {v: as_rational(val) for v, val in inputs.items()}
    for v in nx.lexicographical_topological_sort(circ._graph(), key=circ.nodes.index):
        if v not in driver:
            if v not in x:
                raise ValueError(f"no value for undriven node {v!r}")
            continue
        i = driver[v]
        g = circ.gates[i]
        if g.kind == GateKind.GT:
            xa = x[g.inputs[0]]
            if xa < g.zeta - eps:
                lo, hi = ZERO, eps
            elif xa > g.zeta + eps:
                lo, hi = 1 - eps, ONE
            else:
                lo, hi = ZERO, ONE
            target = gate_value(g, x)
            target = HALF if target is None else target
        else:
            target = gate_value(g, x)
            lo, hi = target - eps, target + eps
        lo, hi = clamp01(lo), clamp01(hi)
        x[v] = perturb(i, lo, hi) if perturb is not None else clamp01(target)
    return x


# ---------------------------------------------------------------------------
# JSON


def circuit_from_json(doc: Mapping) -> GCircuit:
    gates = []
    for g in doc.get("gates", []):
        z = g.get("zeta")
        gates.append(Gate(GateKind(g["kind"]), tuple(g.get("inputs", [])), g["output"], None if z is None else as_rational(z)))
    return GCircuit.build(tuple(doc["nodes"]), gates)


def circuit_to_json(circ: GCircuit) -> dict:
    return {
        "nodes": list(circ.nodes),
        "gates": [
            {
                "kind": g.kind.value,
                "zeta": None if g.zeta is None else fmt_rational(g.zeta),
                "inputs": list(g.inputs),
                "output": g.output,
            }
            for g in circ.gates
        ],
    }


def discrete_to_json(d: Mapping) -> dict:
    return {"states": {str(i): State(s).value for i, s in sorted(d.items())}}


def discrete_from_json(doc: Mapping) -> dict:
    return {int(i): State(s) for i, s in doc["states"].items()}
