"""Compiling circuits into financial systems, and mapping solutions both ways.

Boolean circuits (NAND gates over zero-one inputs) optionally get a
SAT-destroyer on their output, so that exact solutions exist iff the
circuit is satisfiable. Generalized circuits compile gate by gate, each
gate's gadget linked to a node bank through a x1 scaling gadget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from ..errors import (
    FalsifyingAssignment,
    ImpossibleProbePattern,
    InternalConsistencyError,
    NoDefaultCosts,
    NotExactSolution,
    PreconditionError,
)
from ..gcircuit import (
    GateKind,
    GCircuit,
    State,
    circuit_from_json,
    circuit_to_json,
    gc_is_eps_solution,
)
from ..netcore import (
    ONE,
    ZERO,
    FinancialSystem,
    RecoveryVector,
    as_rational,
    fmt_rational,
    forward_evaluate,
    is_eps_solution,
    system_from_json,
    system_to_json,
)
from .blueprints import (
    COMPARISON_C,
    bp_comparison,
    bp_constant,
    bp_cutoff,
    bp_difference,
    bp_nand,
    bp_or,
    bp_scaling,
    bp_sum,
    bp_zero_one,
)
from .builder import SINK, SOURCE, Builder, GadgetBlueprint, instantiate_standalone

DEFAULT_GC_EPS = Fraction(1, 1000)


# ---------------------------------------------------------------------------
# Boolean circuits


@dataclass(frozen=True)
class BooleanCircuit:
    """NAND gates (a, b, out) listed in topological order."""

    inputs: tuple
    gates: tuple
    output: str

    def __post_init__(self):
        inputs = tuple(self.inputs)
        gates = tuple(tuple(g) for g in self.gates)
        known = set(inputs)
        if len(known) != len(inputs):
            raise ValueError("duplicate input names")
        for a, b, out in gates:
            for x in (a, b):
                if x not in known:
                    raise ValueError(f"gate input {x!r} is used before it is defined")
            if out in known:
                raise ValueError(f"name {out!r} defined twice")
            known.add(out)
        if self.output not in known:
            raise ValueError(f"output {self.output!r} is not defined")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "gates", gates)

    def evaluate(self, chi: Mapping) -> dict:
        missing = set(self.inputs) - set(chi)
        if missing:
            raise PreconditionError(f"assignment misses inputs {sorted(missing)}")
        val = {x: bool(chi[x]) for x in self.inputs}
        for a, b, out in self.gates:
            val[out] = not (val[a] and val[b])
        return val

    def value(self, chi: Mapping) -> bool:
        return self.evaluate(chi)[self.output]

    def to_json(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "gates": [{"kind": "nand", "inputs": [a, b], "output": o} for a, b, o in self.gates],
            "output": self.output,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "BooleanCircuit":
        gates = []
        for g in doc.get("gates", []):
            if g.get("kind", "nand") != "nand":
                raise ValueError(f"only nand gates are supported, got {g.get('kind')!r}")
            a, b = g["inputs"]
            gates.append((a, b, g["output"]))
        return cls(tuple(doc["inputs"]), tuple(gates), doc["output"])


@dataclass(frozen=True)
class DestroyerBanks:
    input: str
    B: str
    u: str
    A: str


@dataclass(frozen=True)
class CompiledArtifact:
    system: FinancialSystem
    port_map: Mapping
    probe_map: Mapping = field(default_factory=dict)
    kind: str = "boolean"  # or "gcircuit"
    circuit: object = None
    zero_one: Mapping = field(default_factory=dict)
    destroyer: tuple = ()
    eps: Optional[Fraction] = None

    def to_json(self) -> dict:
        circ = self.circuit.to_json() if self.kind == "boolean" else circuit_to_json(self.circuit)
        return {
            "system": system_to_json(self.system),
            "sidecar": {
                "kind": self.kind,
                "ports": dict(self.port_map),
                "probes": {str(i): dict(p) for i, p in sorted(self.probe_map.items())},
                "circuit": circ,
                "zero_one": {x: dict(uv) for x, uv in self.zero_one.items()},
                "destroyer": [d.__dict__.copy() for d in self.destroyer],
                "eps": None if self.eps is None else fmt_rational(self.eps),
            },
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "CompiledArtifact":
        side = doc["sidecar"]
        kind = side.get("kind", "boolean")
        circ = BooleanCircuit.from_json(side["circuit"]) if kind == "boolean" else circuit_from_json(side["circuit"])
        eps = side.get("eps")
        return cls(
            system=system_from_json(doc["system"]),
            port_map=dict(side["ports"]),
            probe_map={int(i): dict(p) for i, p in side.get("probes", {}).items()},
            kind=kind,
            circuit=circ,
            zero_one={x: dict(uv) for x, uv in side.get("zero_one", {}).items()},
            destroyer=tuple(DestroyerBanks(**d) for d in side.get("destroyer", [])),
            eps=None if eps is None else as_rational(eps),
        )


def destroyer_parameters(alpha, beta) -> dict:
    """Assets of B, notional of the CDS on A held by B, and the cutoff window on B."""
    alpha, beta = as_rational(alpha), as_rational(beta)
    if alpha == 1 and beta == 1:
        raise NoDefaultCosts("the SAT-destroyer needs alpha < 1 or beta < 1")
    if beta < 1:
        return {"e_B": ZERO, "notional": Fraction(2), "K": (3 * beta + 1) / 4, "L": (beta + 3) / 4}
    return {"e_B": Fraction(4, 5), "notional": Fraction(4, 5), "K": (3 * alpha + 1) / 4, "L": (alpha + 3) / 4}


def attach_sat_destroyer(builder: Builder, a, alpha=None, beta=None) -> FinancialSystem:
    """Attach the destroyer to bank ``a``; returns a snapshot of the resulting system.

    With r_a >= 3/4 the system extends to an exact solution (r_A = 1, B
    defaults); with r_a <= 1/4 there is no eps-solution for small eps. The
    banks used are recorded in ``builder.destroyers``.
    """
    alpha = builder.alpha if alpha is None else as_rational(alpha)
    beta = builder.beta if beta is None else as_rational(beta)
    if (alpha, beta) != (builder.alpha, builder.beta):
        raise ValueError("alpha/beta differ from the builder's")
    p = destroyer_parameters(alpha, beta)
    B = builder.add_bank(builder.fresh_prefix("destroyer") + "B", p["e_B"])
    builder.add_contract(B, SINK, None, ONE)
    u = builder.apply(bp_cutoff(p["K"], p["L"]), [B])
    A = builder.apply(bp_or(), [a, u])
    builder.add_contract(SOURCE, B, A, p["notional"])
    builder.destroyers.append(DestroyerBanks(a, B, u, A))
    return builder.finalize()


def destroyer_slice(alpha, beta, counterparty_free: bool = False):
    """The destroyer on its own, attached to a bare input bank ``a`` owing 1 to the sink.

    Returns (system, DestroyerBanks). Used to probe the no-solution side:
    pin r_a low and search over r_B.
    """
    b = Builder(alpha, beta, counterparty_free)
    a = b.add_bank("a")
    b.add_contract(a, SINK, None, ONE)
    sys = attach_sat_destroyer(b, a)
    return sys, b.destroyers[-1]


def compile_boolean(circ: BooleanCircuit, alpha=1, beta=1, counterparty_free: bool = False, destroyer: bool = False):
    b = Builder(alpha, beta, counterparty_free)
    port = {}
    zero_one = {}
    z1 = bp_zero_one(alpha, beta)
    for x in circ.inputs:
        names = b.instantiate(z1, [])
        zero_one[x] = {"u": names[z1.roles["u"]], "v": names[z1.roles["v"]]}
        port[x] = zero_one[x]["v"]
    nand = bp_nand()
    for a, c, out in circ.gates:
        port[out] = b.apply(nand, [port[a], port[c]])
    if destroyer:
        attach_sat_destroyer(b, port[circ.output])
    return CompiledArtifact(
        system=b.finalize(),
        port_map=port,
        kind="boolean",
        circuit=circ,
        zero_one=zero_one,
        destroyer=tuple(b.destroyers),
    )


def reduce_sat(circ: BooleanCircuit, alpha, beta, counterparty_free: bool = False) -> FinancialSystem:
    """A system with an exact solution iff ``circ`` is satisfiable (and no eps-solution otherwise)."""
    destroyer_parameters(alpha, beta)
    return compile_boolean(circ, alpha, beta, counterparty_free, destroyer=True).system


def witness_boolean(artifact: CompiledArtifact, chi: Mapping) -> RecoveryVector:
    """Exact solution whose input banks carry the assignment ``chi``."""
    if artifact.kind != "boolean":
        raise PreconditionError("witness_boolean needs a Boolean-circuit artifact")
    sys = artifact.system
    if artifact.destroyer and not artifact.circuit.value(chi):
        raise FalsifyingAssignment("the assignment falsifies the circuit")
    pinned = {SOURCE: ONE, SINK: ONE}
    for x, uv in artifact.zero_one.items():
        bit = ONE if chi[x] else ZERO
        pinned[uv["u"]] = 1 - bit
        pinned[uv["v"]] = bit
    for d in artifact.destroyer:
        # B's CDS on A pays nothing when A is solvent, so B keeps what its own assets allow
        pinned[d.B] = min(ONE, sys.alpha * sys.e(d.B) / sum(c.notional for c in sys.written[d.B]))
    r = forward_evaluate(sys, pinned)
    rep = is_eps_solution(sys, r, 0)
    if not rep:
        raise InternalConsistencyError(f"witness fails at banks {rep.failing[:5]}")
    return r


# ---------------------------------------------------------------------------
# generalized circuits


def node_bank(v: str) -> str:
    return f"n.{v}"


def _gate_blueprint(g, eps) -> GadgetBlueprint:
    if g.kind == GateKind.CONST:
        return bp_constant(g.zeta)
    if g.kind == GateKind.SCALE:
        return bp_scaling(g.zeta)
    if g.kind == GateKind.ADD:
        return bp_sum()
    if g.kind == GateKind.SUB:
        return bp_difference()
    if g.kind == GateKind.GT:
        return bp_comparison(g.zeta, eps)
    raise ValueError(g.kind)


_PROBE_ROLES = {
    GateKind.ADD: ("v",),
    GateKind.SUB: ("u",),
    GateKind.GT: ("u1", "v1", "const"),
}


def compile_gcircuit(circ: GCircuit, eps=DEFAULT_GC_EPS, counterparty_free: bool = False) -> CompiledArtifact:
    """One gadget per gate, its output copied onto the node bank by a x1 scaling gadget.

    ``eps`` sets the comparison gadgets' window. Nodes no gate drives owe 1
    to the sink and hold nothing, so their rate is 0.
    """
    eps = as_rational(eps)
    b = Builder(1, 1, counterparty_free)
    port = {v: b.add_bank(node_bank(v)) for v in circ.nodes}
    probes = {}
    link = bp_scaling(1)
    for i, g in enumerate(circ.gates):
        bp = _gate_blueprint(g, eps)
        names = b.instantiate(bp, [port[a] for a in g.inputs], relax=True)
        if g.kind in _PROBE_ROLES:
            probes[i] = {role: names[bp.roles[role]] for role in _PROBE_ROLES[g.kind] if role in bp.roles}
        b.instantiate(link, [names[bp.output_port]], output_as=port[g.output])
    driven = {g.output for g in circ.gates}
    for v in circ.nodes:
        if v not in driven:
            b.add_contract(port[v], SINK, None, ONE)
    return CompiledArtifact(
        system=b.finalize(),
        port_map=port,
        probe_map=probes,
        kind="gcircuit",
        circuit=circ,
        eps=eps,
    )


def embed_gc_solution(artifact: CompiledArtifact, x: Mapping) -> RecoveryVector:
    """Exact network solution with node banks set to the exact circuit solution ``x``."""
    if artifact.kind != "gcircuit":
        raise PreconditionError("embed_gc_solution needs a generalized-circuit artifact")
    circ = artifact.circuit
    x = {v: as_rational(x[v]) for v in circ.nodes if v in x}
    if len(x) != len(circ.nodes) or not gc_is_eps_solution(circ, x, 0):
        raise NotExactSolution("x is not an exact solution of the circuit")
    pinned = {SOURCE: ONE, SINK: ONE}
    pinned.update({artifact.port_map[v]: x[v] for v in circ.nodes})
    r = forward_evaluate(artifact.system, pinned)
    rep = is_eps_solution(artifact.system, r, 0)
    if not rep:
        raise NotExactSolution(
            f"the compiled gadgets cannot reproduce x exactly (failing banks {rep.failing[:5]}); "
            "comparison inputs must lie outside the gadget window and undriven nodes must be 0"
        )
    return r


def extract_discrete(artifact: CompiledArtifact, D) -> dict:
    """Discrete state of every stateful gate read off a default set D."""
    if artifact.kind != "gcircuit":
        raise PreconditionError("extract_discrete needs a generalized-circuit artifact")
    D = frozenset(D)
    circ = artifact.circuit
    d = {}
    for i in circ.stateful_gates:
        g = circ.gates[i]
        probe = artifact.probe_map[i]
        if g.kind == GateKind.ADD:
            d[i] = State.M if probe["v"] in D else State.H
        elif g.kind == GateKind.SUB:
            d[i] = State.M if probe["u"] in D else State.L
        elif "const" in probe:
            d[i] = State.H if g.zeta <= COMPARISON_C * artifact.eps else State.L
        else:
            u1, v1 = probe["u1"] in D, probe["v1"] in D
            if not u1 and not v1:
                raise ImpossibleProbePattern(f"gate {i}: neither comparison probe is in D")
            d[i] = State.L if not u1 else (State.H if not v1 else State.M)
    return d


def eval_gadget_forward(bp: GadgetBlueprint, input_values, counterparty_free: bool = False) -> dict:
    """Exact interior rates of a gadget with its inputs pinned and r_s = r_t = 1."""
    sys, ins, names = instantiate_standalone(bp, counterparty_free=counterparty_free)
    input_values = list(input_values)
    if len(input_values) != len(ins):
        raise PreconditionError(f"{bp.name} takes {len(ins)} inputs, got {len(input_values)}")
    pinned = {SOURCE: ONE, SINK: ONE}
    pinned.update({b: as_rational(x) for b, x in zip(ins, input_values)})
    r = forward_evaluate(sys, pinned)
    return {loc: r[names[loc]] for loc in bp.interior}
