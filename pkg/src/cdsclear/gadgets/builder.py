"""Growing a financial system out of gadgets that share one source and one sink."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from ..errors import ArgWritesNoDebt, ParameterOutOfRange, PortArityMismatch
from ..netcore import ONE, ZERO, BankId, Contract, FinancialSystem, as_rational

SOURCE = "s"
SINK = "t"


@dataclass(frozen=True)
class GadgetBlueprint:
    """A reusable sub-network over local bank names.

    ``body`` mentions the placeholders ``s`` and ``t`` for the shared source
    and sink. Input ports appear only as CDS reference entities. ``roles``
    names interior banks that callers may want to inspect.
    """

    name: str
    body: FinancialSystem
    input_ports: tuple
    output_port: str
    doc: str
    roles: Mapping = field(default_factory=dict)
    uses_source_sink: bool = True
    needs_no_default_costs: bool = False

    def __post_init__(self):
        for p in self.input_ports:
            if self.body.e(p) or self.body.written[p] or self.body.held[p]:
                raise ValueError(f"input port {p!r} carries assets or contracts")
        for b in self.body.banks:
            if b in self.input_ports or b in (SOURCE, SINK):
                continue
            if self.body.notional(b, SINK, None) != 1:
                raise ValueError(f"interior bank {b!r} does not owe 1 to the sink")

    @property
    def interior(self) -> list:
        return [b for b in self.body.banks if b not in self.input_ports and b not in (SOURCE, SINK)]


class Builder:
    """Single-writer accumulator for a gadget-built system.

    Starts with source ``s`` and sink ``t`` and the debt s -> t of notional
    1. ``finalize`` sets e_s to twice the total notional written by s.
    """

    def __init__(self, alpha=1, beta=1, counterparty_free: bool = False):
        self.alpha = as_rational(alpha)
        self.beta = as_rational(beta)
        self.counterparty_free = counterparty_free
        self._banks: list = []
        self._ext: dict = {}
        self._contracts: dict = defaultdict(Fraction)
        self._count = 0
        self.tally = ZERO
        self.destroyers: list = []
        self.add_bank(SOURCE)
        self.add_bank(SINK)
        self.add_contract(SOURCE, SINK, None, ONE)

    # -- primitive edits -------------------------------------------------
    def add_bank(self, name: BankId, e=0) -> BankId:
        if name in self._ext:
            raise ValueError(f"bank {name!r} already exists")
        self._banks.append(name)
        self._ext[name] = as_rational(e)
        return name

    def has_bank(self, name) -> bool:
        return name in self._ext

    def set_assets(self, name, e) -> None:
        self._ext[name] = as_rational(e)

    def add_contract(self, writer, holder, reference, notional) -> None:
        n = as_rational(notional)
        if n == 0:
            return
        for b in (writer, holder) + (() if reference is None else (reference,)):
            if b not in self._ext:
                raise ValueError(f"unknown bank {b!r}")
        self._contracts[(writer, holder, reference)] += n
        if writer == SOURCE:
            self.tally += n

    def fresh_prefix(self, kind: str) -> str:
        p = f"{kind}{self._count}."
        self._count += 1
        return p

    def writes_debt(self, b) -> bool:
        return any(w == b and k is None for (w, _, k) in self._contracts)

    def is_bare(self, b) -> bool:
        return not self._ext[b] and not any(b in (w, h) for (w, h, _) in self._contracts)

    # -- gadgets ---------------------------------------------------------
    def instantiate(
        self,
        bp: GadgetBlueprint,
        args: Sequence,
        output_as: Optional[BankId] = None,
        relax: bool = False,
    ) -> dict:
        """Copy ``bp`` into the system with its ports identified with ``args``.

        Returns the map from the blueprint's local names to bank ids.
        ``relax`` waives the requirement that every argument writes debt
        (used while wiring cyclic circuits, where node banks receive their
        debt later). ``output_as`` identifies the output with an existing
        bank that has no assets or contracts yet.
        """
        args = list(args)
        if len(args) != len(bp.input_ports):
            raise PortArityMismatch(f"{bp.name} takes {len(bp.input_ports)} inputs, got {len(args)}")
        if bp.needs_no_default_costs and (self.alpha != 1 or self.beta != 1):
            raise ParameterOutOfRange(f"{bp.name} gadget requires alpha = beta = 1")
        for a in args:
            if a not in self._ext:
                raise ValueError(f"unknown bank {a!r}")
            if not relax and not self.writes_debt(a):
                raise ArgWritesNoDebt(f"argument {a!r} writes no debt contract")
        if output_as is not None and (output_as not in self._ext or not self.is_bare(output_as)):
            raise ValueError(f"cannot identify the output with {output_as!r}: not an existing bare bank")
        prefix = self.fresh_prefix(bp.name)
        names = {SOURCE: SOURCE, SINK: SINK}
        names.update(zip(bp.input_ports, args))
        for b in bp.interior:
            if b == bp.output_port and output_as is not None:
                names[b] = output_as
            else:
                names[b] = self.add_bank(prefix + b)
        for b in bp.interior:
            if bp.body.e(b):
                self._ext[names[b]] += bp.body.e(b)
        for c in bp.body.contracts:
            self.add_contract(
                names[c.writer],
                names[c.holder],
                None if c.reference is None else names[c.reference],
                c.notional,
            )
        return names

    def apply(self, bp, args, output_as=None, relax=False) -> BankId:
        return self.instantiate(bp, args, output_as, relax)[bp.output_port]

    # -- output ----------------------------------------------------------
    def contracts(self) -> list:
        return [Contract(w, h, k, n) for (w, h, k), n in self._contracts.items()]

    def finalize(self, relaxed: bool = False) -> FinancialSystem:
        ext = dict(self._ext)
        ext[SOURCE] = 2 * self.tally
        return FinancialSystem(
            banks=tuple(self._banks),
            external_assets=ext,
            contracts=tuple(self.contracts()),
            alpha=self.alpha,
            beta=self.beta,
            counterparty_free=self.counterparty_free,
            relaxed=relaxed,
        )

    def to_blueprint(self, name, ports, output, doc, roles=None, needs_no_default_costs=False) -> GadgetBlueprint:
        """Freeze the current contents (minus the base s -> t debt) as a blueprint."""
        contracts = dict(self._contracts)
        contracts[(SOURCE, SINK, None)] -= 1
        body = FinancialSystem(
            banks=tuple(self._banks),
            external_assets={b: e for b, e in self._ext.items() if b != SOURCE},
            contracts=tuple(Contract(w, h, k, n) for (w, h, k), n in contracts.items()),
            relaxed=True,
        )
        return GadgetBlueprint(
            name=name,
            body=body,
            input_ports=tuple(ports),
            output_port=output,
            doc=doc,
            roles=dict(roles or {}),
            needs_no_default_costs=needs_no_default_costs,
        )


def apply_gadget(builder: Builder, bp: GadgetBlueprint, args: Sequence, relax: bool = False) -> BankId:
    return builder.apply(bp, args, relax=relax)


def instantiate_standalone(bp: GadgetBlueprint, alpha=1, beta=1, counterparty_free=False):
    """The gadget alone on bare input banks ``a``, ``b``, ... plus source and sink.

    Returns (system, input bank ids, local-name map).
    """
    b = Builder(alpha, beta, counterparty_free)
    inputs = [b.add_bank(f"in{i}") for i, _ in enumerate(bp.input_ports)]
    names = b.instantiate(bp, inputs, relax=True)
    return b.finalize(relaxed=True), inputs, names
