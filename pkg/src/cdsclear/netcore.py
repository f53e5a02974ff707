"""Financial networks with debt and credit default swaps.

All evaluation here is exact: notionals, assets and recovery rates are
``fractions.Fraction`` values. Float inputs are accepted by the
conversion helpers but are read through their shortest decimal repr, so
``0.01`` means ``1/100``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional

import networkx as nx

from .errors import NotAnEpsSolution, NotForwardEvaluable

BankId = str

ZERO = Fraction(0)
ONE = Fraction(1)


def as_rational(x) -> Fraction:
    """Convert ints, floats, decimal strings and ``"p/q"`` strings to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Decimal):
        return Fraction(x)
    return Fraction(x)


def fmt_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def clamp01(x: Fraction) -> Fraction:
    return min(ONE, max(ZERO, x))


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True, order=True)
class Contract:
    writer: BankId
    holder: BankId
    reference: Optional[BankId]
    notional: Fraction

    @property
    def is_debt(self) -> bool:
        return self.reference is None

    @property
    def key(self) -> tuple:
        return (self.writer, self.holder, self.reference)


def _contract_sort_key(c: Contract):
    return (c.writer, c.holder, "" if c.reference is None else "\x01" + c.reference)


@dataclass(frozen=True, eq=True)
class FinancialSystem:
    """A tuple (banks, external assets, contracts, alpha, beta).

    Contracts are canonicalized on construction: notionals for the same
    (writer, holder, reference) triple are summed and zero entries dropped.
    ``relaxed`` marks gadget-internal systems that may carry dummy banks
    violating the CDS sanity assumption.
    """

    banks: tuple
    external_assets: Mapping[BankId, Fraction]
    contracts: tuple
    alpha: Fraction = ONE
    beta: Fraction = ONE
    counterparty_free: bool = False
    relaxed: bool = False

    def __post_init__(self):
        banks = tuple(self.banks)
        if len(set(banks)) != len(banks):
            raise ValueError("duplicate bank ids")
        known = set(banks)
        ext = {}
        for b, v in dict(self.external_assets).items():
            if b not in known:
                raise ValueError(f"external assets for unknown bank {b!r}")
            v = as_rational(v)
            if v < 0:
                raise ValueError(f"negative external assets for {b!r}")
            if v:
                ext[b] = v
        agg: dict = defaultdict(Fraction)
        for c in self.contracts:
            if not isinstance(c, Contract):
                c = Contract(*c)
            for who in (c.writer, c.holder) + (() if c.reference is None else (c.reference,)):
                if who not in known:
                    raise ValueError(f"contract mentions unknown bank {who!r}")
            n = as_rational(c.notional)
            if n < 0:
                raise ValueError("negative notional")
            agg[(c.writer, c.holder, c.reference)] += n
        contracts = tuple(
            sorted(
                (Contract(w, h, k, n) for (w, h, k), n in agg.items() if n > 0),
                key=_contract_sort_key,
            )
        )
        alpha, beta = as_rational(self.alpha), as_rational(self.beta)
        for name, v in (("alpha", alpha), ("beta", beta)):
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        object.__setattr__(self, "banks", banks)
        object.__setattr__(self, "external_assets", ext)
        object.__setattr__(self, "contracts", contracts)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    # -- derived indices -------------------------------------------------
    @cached_property
    def index(self) -> dict:
        return {b: i for i, b in enumerate(self.banks)}

    @cached_property
    def written(self) -> dict:
        out = {b: [] for b in self.banks}
        for c in self.contracts:
            out[c.writer].append(c)
        return out

    @cached_property
    def held(self) -> dict:
        out = {b: [] for b in self.banks}
        for c in self.contracts:
            out[c.holder].append(c)
        return out

    def e(self, bank: BankId) -> Fraction:
        return self.external_assets.get(bank, ZERO)

    def notional(self, writer, holder, reference=None) -> Fraction:
        return self._notional_map.get((writer, holder, reference), ZERO)

    @cached_property
    def _notional_map(self) -> dict:
        return {c.key: c.notional for c in self.contracts}

    @property
    def has_cds(self) -> bool:
        return any(not c.is_debt for c in self.contracts)

    def writes_debt(self, bank: BankId) -> bool:
        return any(c.is_debt for c in self.written[bank])

    def has_no_liabilities(self, bank: BankId) -> bool:
        """True when l_i(r) = 0 for every r (the bank writes nothing)."""
        return not self.written[bank]

    def replace(self, **changes) -> "FinancialSystem":
        fields = dict(
            banks=self.banks,
            external_assets=self.external_assets,
            contracts=self.contracts,
            alpha=self.alpha,
            beta=self.beta,
            counterparty_free=self.counterparty_free,
            relaxed=self.relaxed,
        )
        fields.update(changes)
        return FinancialSystem(**fields)


class RecoveryVector(Mapping):
    """Immutable map bank -> recovery rate in [0, 1]."""

    __slots__ = ("_rates",)

    def __init__(self, rates: Mapping[BankId, object]):
        conv = {}
        for b, v in rates.items():
            v = as_rational(v)
            if not 0 <= v <= 1:
                raise ValueError(f"recovery rate of {b!r} outside [0, 1]: {v}")
            conv[b] = v
        self._rates = conv

    @classmethod
    def ones(cls, sys: FinancialSystem) -> "RecoveryVector":
        return cls({b: ONE for b in sys.banks})

    @classmethod
    def for_system(cls, sys: FinancialSystem, rates) -> "RecoveryVector":
        """Build from a mapping or a sequence ordered like ``sys.banks``."""
        if not isinstance(rates, Mapping):
            rates = list(rates)
            if len(rates) != len(sys.banks):
                raise ValueError("rate sequence length does not match bank count")
            rates = dict(zip(sys.banks, rates))
        rv = rates if isinstance(rates, RecoveryVector) else cls(rates)
        if set(rv) != set(sys.banks):
            missing = set(sys.banks) - set(rv)
            extra = set(rv) - set(sys.banks)
            raise ValueError(f"rates do not cover the system (missing={sorted(missing)}, extra={sorted(extra)})")
        return rv

    def __getitem__(self, k):
        return self._rates[k]

    def __iter__(self) -> Iterator:
        return iter(self._rates)

    def __len__(self):
        return len(self._rates)

    def __repr__(self):
        inner = ", ".join(f"{k}: {fmt_rational(v)}" for k, v in self._rates.items())
        return f"RecoveryVector({{{inner}}})"

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return dict(self._rates) == dict(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._rates.items()))

    def updated(self, changes: Mapping) -> "RecoveryVector":
        d = dict(self._rates)
        d.update({k: as_rational(v) for k, v in changes.items()})
        return RecoveryVector(d)

    def as_floats(self) -> dict:
        return {k: float(v) for k, v in self._rates.items()}


DefaultSet = frozenset


# ---------------------------------------------------------------------------
# pointwise evaluation


def _contract_liability(c: Contract, r: Mapping) -> Fraction:
    if c.reference is None:
        return c.notional
    return c.notional * (1 - r[c.reference])


@dataclass(frozen=True)
class Liabilities:
    pairwise: dict  # (writer, holder) -> Fraction
    totals: dict  # bank -> Fraction


def liabilities(sys: FinancialSystem, r: Mapping) -> Liabilities:
    pair: dict = defaultdict(Fraction)
    tot = {b: ZERO for b in sys.banks}
    for c in sys.contracts:
        l = _contract_liability(c, r)
        pair[(c.writer, c.holder)] += l
        tot[c.writer] += l
    return Liabilities(dict(pair), tot)


def payments(sys: FinancialSystem, r: Mapping) -> dict:
    """p_{i,j}(r) = r_i * l_{i,j}(r) for every pair with a contract."""
    return {k: r[k[0]] * v for k, v in liabilities(sys, r).pairwise.items()}


def _incoming(sys: FinancialSystem, bank: BankId, r: Mapping) -> Fraction:
    total = ZERO
    if sys.counterparty_free:
        for c in sys.held[bank]:
            total += _contract_liability(c, r)
    else:
        for c in sys.held[bank]:
            total += r[c.writer] * _contract_liability(c, r)
    return total


def bank_state(sys: FinancialSystem, bank: BankId, r: Mapping):
    """Return (a_i, a'_i, l_i) at r."""
    inc = _incoming(sys, bank, r)
    e = sys.e(bank)
    l = sum((_contract_liability(c, r) for c in sys.written[bank]), ZERO)
    return e + inc, sys.alpha * e + sys.beta * inc, l


def assets(sys: FinancialSystem, r: Mapping):
    """Return the pair (a, a_post) of per-bank assets before and after default costs."""
    a, ap = {}, {}
    for b in sys.banks:
        a[b], ap[b], _ = bank_state(sys, b, r)
    return a, ap


def _F_from_state(a: Fraction, ap: Fraction, l: Fraction) -> Fraction:
    # l = 0: the bank has nothing to pay and never defaults
    if a >= l:
        return ONE
    return ap / l


def update_F_bank(sys: FinancialSystem, bank: BankId, r: Mapping) -> Fraction:
    return _F_from_state(*bank_state(sys, bank, r))


def update_F(sys: FinancialSystem, r: Mapping) -> RecoveryVector:
    return RecoveryVector({b: update_F_bank(sys, b, r) for b in sys.banks})


def sup_distance(r: Mapping, s: Mapping) -> Fraction:
    return max((abs(r[k] - s[k]) for k in r), default=ZERO)


# ---------------------------------------------------------------------------
# approximate solutions

NON_DEFAULT = "non-default"
DEFAULT = "default"


@dataclass(frozen=True)
class BankCheck:
    rate: Fraction
    assets: Fraction
    assets_after_costs: Fraction
    liabilities: Fraction
    branches: frozenset
    residual: Fraction  # |r_i - F_i(r)|

    @property
    def branch_taken(self) -> str:
        if len(self.branches) == 2:
            return "both"
        if not self.branches:
            return "neither"
        return next(iter(self.branches))

    @property
    def ok(self) -> bool:
        return bool(self.branches)


@dataclass(frozen=True)
class EpsReport:
    eps: Fraction
    banks: dict
    verdict: bool

    def __bool__(self):
        return self.verdict

    @property
    def failing(self) -> list:
        return [b for b, chk in self.banks.items() if not chk.ok]


def _branches(r_i, a, ap, l, eps) -> frozenset:
    out = set()
    if abs(r_i - 1) <= eps and a >= (1 - eps) * l:
        out.add(NON_DEFAULT)
    if l > 0 and abs(r_i - ap / l) <= eps and a < (1 + eps) * l:
        out.add(DEFAULT)
    return frozenset(out)


def check_bank(sys: FinancialSystem, bank: BankId, r: Mapping, eps) -> BankCheck:
    eps = as_rational(eps)
    a, ap, l = bank_state(sys, bank, r)
    ri = r[bank]
    return BankCheck(ri, a, ap, l, _branches(ri, a, ap, l, eps), abs(ri - _F_from_state(a, ap, l)))


def is_eps_solution(sys: FinancialSystem, r: Mapping, eps=0) -> EpsReport:
    eps = as_rational(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    r = RecoveryVector.for_system(sys, r)
    checks = {b: check_bank(sys, b, r, eps) for b in sys.banks}
    return EpsReport(eps, checks, all(c.ok for c in checks.values()))


def _round_half_away(x: Fraction, delta: Fraction) -> Fraction:
    q = x / delta
    n = math.floor(q)
    if q - n >= Fraction(1, 2):
        n += 1
    return n * delta


def round_solution(sys: FinancialSystem, r: Mapping, delta) -> RecoveryVector:
    """Round every rate to the nearest multiple of ``delta`` (ties away from zero), clamped to [0, 1]."""
    delta = as_rational(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = RecoveryVector.for_system(sys, r)
    return RecoveryVector({b: clamp01(_round_half_away(v, delta)) for b, v in r.items()})


def is_eps_default_set(sys: FinancialSystem, r: Mapping, D: Iterable, eps=0) -> bool:
    eps = as_rational(eps)
    if not is_eps_solution(sys, r, eps):
        raise NotAnEpsSolution("r is not an eps-solution")
    D = frozenset(D)
    unknown = D - set(sys.banks)
    if unknown:
        raise ValueError(f"default set mentions unknown banks {sorted(unknown)}")
    for b in sys.banks:
        a, _, l = bank_state(sys, b, r)
        if b in D:
            if not a < (1 + eps) * l:
                return False
        elif not a >= (1 - eps) * l:
            return False
    return True


def default_set_of(sys: FinancialSystem, r: Mapping, eps=0) -> frozenset:
    """The largest default set compatible with the eps-solution r."""
    eps = as_rational(eps)
    if not is_eps_solution(sys, r, eps):
        raise NotAnEpsSolution("r is not an eps-solution")
    out = set()
    for b in sys.banks:
        a, _, l = bank_state(sys, b, r)
        if a < (1 + eps) * l:
            out.add(b)
    return frozenset(out)


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True)
class Violation:
    kind: str  # "sanity" | "non-degenerate"
    bank: BankId
    message: str
    fatal: bool


def validate(sys: FinancialSystem, strict: bool = False) -> list:
    """Report sanity violations (fatal) and non-degeneracy violations.

    Non-degeneracy violations are warnings unless ``strict`` is set.
    Relaxed (gadget-internal) systems skip the CDS-reference check for
    banks that write no contracts at all.
    """
    out = []
    for c in sys.contracts:
        if c.writer == c.holder:
            out.append(Violation("sanity", c.writer, f"contract from {c.writer} to itself", True))
        if c.reference is not None and c.reference in (c.writer, c.holder):
            who = "writer" if c.reference == c.writer else "holder"
            out.append(
                Violation("sanity", c.reference, f"contract {c.writer}->{c.holder} references own {who}", True)
            )
    refs = sorted({c.reference for c in sys.contracts if c.reference is not None})
    for k in refs:
        if sys.writes_debt(k):
            continue
        if sys.relaxed and not sys.written[k]:
            continue
        out.append(Violation("sanity", k, f"CDS reference entity {k} writes no debt", True))
    for b in sys.banks:
        if sys.written[b] and not sys.writes_debt(b):
            out.append(
                Violation("non-degenerate", b, f"{b} writes contracts but no debt contract", strict)
            )
    return out


def naked_positions(sys: FinancialSystem) -> list:
    """All (holder, reference, excess) with CDS notional on reference above debt held from it."""
    cds: dict = defaultdict(Fraction)
    for c in sys.contracts:
        if c.reference is not None:
            cds[(c.holder, c.reference)] += c.notional
    out = []
    for (j, k), total in sorted(cds.items()):
        debt = sys.notional(k, j, None)
        if total > debt:
            out.append((j, k, total - debt))
    return out


@dataclass(frozen=True)
class DependencyGraph:
    graph: nx.DiGraph
    has_red_cycle: bool

    def red_edges(self) -> list:
        return sorted((u, v) for u, v, col in self.graph.edges(data="color") if col == "red")


def colored_dependency_graph(sys: FinancialSystem) -> DependencyGraph:
    g = nx.DiGraph()
    g.add_nodes_from(sys.banks)
    naked = {(j, k) for j, k, _ in naked_positions(sys)}

    def add(u, v, color):
        if g.has_edge(u, v):
            if color == "red":
                g[u][v]["color"] = "red"
        else:
            g.add_edge(u, v, color=color)

    for c in sys.contracts:
        add(c.writer, c.holder, "green")
        if c.reference is not None:
            add(c.reference, c.holder, "red" if (c.holder, c.reference) in naked else "green")
            add(c.reference, c.writer, "green")
    comp = {}
    for i, scc in enumerate(nx.strongly_connected_components(g)):
        for b in scc:
            comp[b] = i
    red_cycle = any(
        col == "red" and (u == v or comp[u] == comp[v]) for u, v, col in g.edges(data="color")
    )
    return DependencyGraph(g, red_cycle)


def dependencies(sys: FinancialSystem, bank: BankId) -> set:
    """Banks whose rates F_bank can depend on."""
    deps = set()
    for c in sys.held[bank]:
        if not sys.counterparty_free:
            deps.add(c.writer)
        if c.reference is not None:
            deps.add(c.reference)
    for c in sys.written[bank]:
        if c.reference is not None:
            deps.add(c.reference)
    deps.discard(bank)
    return deps


def liability_graph_is_acyclic(sys: FinancialSystem) -> bool:
    g = nx.DiGraph()
    g.add_nodes_from(sys.banks)
    g.add_edges_from((c.writer, c.holder) for c in sys.contracts)
    return nx.is_directed_acyclic_graph(g)


def intermediaries(sys: FinancialSystem) -> list:
    """Banks that both hold and write a CDS on the same reference entity."""
    held = {(c.holder, c.reference) for c in sys.contracts if c.reference is not None}
    wrote = {(c.writer, c.reference) for c in sys.contracts if c.reference is not None}
    return sorted(held & wrote)


def forward_order(sys: FinancialSystem, pinned: Iterable) -> list:
    """Topological order of the unpinned banks, or raise if they depend on each other cyclically."""
    pinned = set(pinned)
    free = [b for b in sys.banks if b not in pinned]
    g = nx.DiGraph()
    g.add_nodes_from(free)
    for b in free:
        for d in dependencies(sys, b):
            if d not in pinned:
                g.add_edge(d, b)
    try:
        return list(nx.lexicographical_topological_sort(g, key=sys.index.__getitem__))
    except nx.NetworkXUnfeasible:
        cyc = nx.find_cycle(g)
        raise NotForwardEvaluable(f"unpinned banks depend on each other cyclically: {cyc}") from None


def forward_evaluate(sys: FinancialSystem, pinned: Mapping) -> RecoveryVector:
    """Fix ``pinned`` rates and set every other bank to F_i in dependency order.

    The result satisfies r_i = F_i(r) exactly at every unpinned bank.
    """
    order = forward_order(sys, pinned)
    r = {b: ONE for b in sys.banks}
    r.update({b: as_rational(v) for b, v in pinned.items()})
    for b in order:
        r[b] = update_F_bank(sys, b, r)
    return RecoveryVector(r)


def estimate_lipschitz(sys: FinancialSystem, r: Mapping, radius, samples: int = 200, rng=None) -> Fraction:
    """Empirical Lipschitz bound of a_i/l_i and a'_i/l_i around r (sup-norm).

    Banks with l_i = 0 somewhere in the sampled box are skipped.
    Returns max(measured, 1).
    """
    import random

    rng = rng or random.Random(0)
    radius = as_rational(radius)
    r = RecoveryVector.for_system(sys, r)
    base = {}
    for b in sys.banks:
        a, ap, l = bank_state(sys, b, r)
        if l > 0:
            base[b] = (a / l, ap / l)
    best = ONE
    for _ in range(samples):
        q = {}
        for b, v in r.items():
            step = Fraction(rng.randint(-1000, 1000), 1000) * radius
            q[b] = clamp01(v + step)
        dist = sup_distance(r, q)
        if dist == 0:
            continue
        for b, (x0, y0) in base.items():
            a, ap, l = bank_state(sys, b, q)
            if l == 0:
                continue
            best = max(best, abs(a / l - x0) / dist, abs(ap / l - y0) / dist)
    return best


# ---------------------------------------------------------------------------
# JSON


def system_to_json(sys: FinancialSystem) -> dict:
    doc = {
        "alpha": fmt_rational(sys.alpha),
        "beta": fmt_rational(sys.beta),
        "counterparty_free": sys.counterparty_free,
        "banks": [{"id": b, "external_assets": fmt_rational(sys.e(b))} for b in sys.banks],
        "contracts": [
            {
                "writer": c.writer,
                "holder": c.holder,
                "reference": c.reference,
                "notional": fmt_rational(c.notional),
            }
            for c in sys.contracts
        ],
    }
    if sys.relaxed:
        doc["relaxed"] = True
    return doc


def system_from_json(doc: Mapping) -> FinancialSystem:
    banks = [b["id"] for b in doc["banks"]]
    ext = {b["id"]: as_rational(b.get("external_assets", "0")) for b in doc["banks"]}
    contracts = [
        Contract(c["writer"], c["holder"], c.get("reference"), as_rational(c["notional"]))
        for c in doc.get("contracts", [])
    ]
    return FinancialSystem(
        banks=tuple(banks),
        external_assets=ext,
        contracts=tuple(contracts),
        alpha=as_rational(doc.get("alpha", "1")),
        beta=as_rational(doc.get("beta", "1")),
        counterparty_free=bool(doc.get("counterparty_free", False)),
        relaxed=bool(doc.get("relaxed", False)),
    )


def rates_to_json(r: Mapping) -> dict:
    return {"rates": {b: fmt_rational(v) for b, v in r.items()}}


def rates_from_json(doc: Mapping) -> RecoveryVector:
    return RecoveryVector({b: as_rational(v) for b, v in doc["rates"].items()})


def decimal12(x: Fraction) -> str:
    """12-significant-digit decimal rendering (approximate, for display)."""
    if x == 0:
        return "0"
    d = Decimal(x.numerator) / Decimal(x.denominator)
    q = d.quantize(Decimal(1).scaleb(d.adjusted() - 11), rounding=ROUND_HALF_UP)
    return format(q.normalize(), "f") if abs(d) >= Decimal("1e-6") else format(q.normalize(), "e")
