"""Rigorous enclosures of eps-solutions, and random eps-solutions.

``enclose`` returns per-bank boxes that contain the rate of that bank in
every eps-solution agreeing with the fixed banks. Each bank's box is
intersected with the set of rates its own two-branch condition allows,
given the boxes of everyone it depends on; sweeping this to a fixpoint
never discards an eps-solution. An empty box refutes the region.

``sample_eps_solution`` walks an acyclic system in dependency order and
picks each rate at random from the exact allowed set, which yields genuine
eps-solutions with rates anywhere in the band, not only the exact ones.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from ..errors import InternalConsistencyError, NotForwardEvaluable
from ..netcore import (
    ONE,
    ZERO,
    FinancialSystem,
    RecoveryVector,
    as_rational,
    check_bank,
    forward_order,
)


@dataclass(frozen=True)
class AllowedSet:
    """Finite union of closed intervals inside [0, 1], sorted and disjoint."""

    parts: tuple

    @classmethod
    def of(cls, intervals) -> "AllowedSet":
        ivs = sorted((max(lo, ZERO), min(hi, ONE)) for lo, hi in intervals)
        merged = []
        for lo, hi in ivs:
            if lo > hi:
                continue
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
            else:
                merged.append((lo, hi))
        return cls(tuple(merged))

    @property
    def empty(self) -> bool:
        return not self.parts

    @property
    def hull(self):
        return (self.parts[0][0], self.parts[-1][1]) if self.parts else None

    def intersect(self, lo, hi) -> "AllowedSet":
        return AllowedSet.of((max(a, lo), min(b, hi)) for a, b in self.parts)

    def __contains__(self, x) -> bool:
        return any(lo <= x <= hi for lo, hi in self.parts)

    def inside(self, other: "AllowedSet") -> bool:
        return all(any(o_lo <= lo and hi <= o_hi for o_lo, o_hi in other.parts) for lo, hi in self.parts)


def _payment_bounds(sys: FinancialSystem, c, box) -> tuple:
    ref = (ONE, ONE) if c.reference is None else (1 - box[c.reference][1], 1 - box[c.reference][0])
    wr = (ONE, ONE) if sys.counterparty_free else box[c.writer]
    return c.notional * wr[0] * ref[0], c.notional * wr[1] * ref[1]


def allowed_set(sys: FinancialSystem, bank, box: Mapping, eps) -> AllowedSet:
    """Rates bank may take in an eps-solution when everyone else lies in ``box``."""
    eps = as_rational(eps)
    e = sys.e(bank)
    inc_lo = inc_hi = ZERO
    for c in sys.held[bank]:
        lo, hi = _payment_bounds(sys, c, box)
        inc_lo += lo
        inc_hi += hi
    l_lo = l_hi = ZERO
    for c in sys.written[bank]:
        if c.reference is None:
            l_lo += c.notional
            l_hi += c.notional
        else:
            l_lo += c.notional * (1 - box[c.reference][1])
            l_hi += c.notional * (1 - box[c.reference][0])
    parts = []
    if e + inc_hi >= (1 - eps) * l_lo:
        parts.append((1 - eps, ONE))
    if l_hi > 0 and e + inc_lo < (1 + eps) * l_hi:
        cap = min(inc_hi, (1 + eps) * l_hi - e)
        ap_lo = sys.alpha * e + sys.beta * inc_lo
        ap_hi = sys.alpha * e + sys.beta * cap
        lo = ap_lo / l_hi - eps
        hi = ap_hi / l_lo + eps if l_lo > 0 else ONE
        parts.append((lo, hi))
    return AllowedSet.of(parts)


@dataclass
class Enclosure:
    boxes: dict
    allowed: dict
    sweeps: int

    def hull(self, bank):
        return self.boxes[bank]


def _sweep_order(sys: FinancialSystem, fixed) -> list:
    rest = [b for b in sys.banks if b not in fixed]
    try:
        return forward_order(sys, set(fixed))
    except NotForwardEvaluable:
        return rest


def enclose(
    sys: FinancialSystem,
    eps,
    fixed: Mapping,
    initial: Optional[Mapping] = None,
    max_sweeps: int = 40,
    tol=Fraction(1, 10**12),
) -> Optional[Enclosure]:
    """Boxes containing every eps-solution that agrees with ``fixed``; None if there is none.

    ``fixed`` maps banks to a rate or a (lo, hi) box; their own condition is
    not checked (input ports). ``initial`` narrows the starting box of
    checked banks, for cell-by-cell searches.
    """
    eps = as_rational(eps)
    box = {b: (ZERO, ONE) for b in sys.banks}
    for b, v in fixed.items():
        lo, hi = (v, v) if not isinstance(v, tuple) else v
        box[b] = (as_rational(lo), as_rational(hi))
    for b, (lo, hi) in (initial or {}).items():
        box[b] = (as_rational(lo), as_rational(hi))
    order = _sweep_order(sys, fixed)
    allowed = {}
    for sweep in range(1, max_sweeps + 1):
        moved = ZERO
        for b in order:
            lo, hi = box[b]
            s = allowed_set(sys, b, box, eps).intersect(lo, hi)
            if s.empty:
                return None
            allowed[b] = s
            nlo, nhi = s.hull
            moved = max(moved, nlo - lo, hi - nhi)
            box[b] = (nlo, nhi)
        if moved <= tol:
            break
    return Enclosure(box, allowed, sweep)


def enclose_split(
    sys: FinancialSystem,
    eps,
    fixed: Mapping,
    initial: Optional[Mapping] = None,
    max_depth: int = 8,
    max_sweeps: int = 40,
) -> list:
    """Like ``enclose`` but case-splits banks whose allowed set has gaps.

    Returns leaf enclosures whose union covers every eps-solution agreeing
    with ``fixed``; an empty list refutes the region.
    """
    enc = enclose(sys, eps, fixed, initial, max_sweeps=max_sweeps)
    if enc is None:
        return []
    if max_depth == 0:
        return [enc]
    split = next((b for b in sys.banks if b in enc.allowed and len(enc.allowed[b].parts) > 1), None)
    if split is None:
        return [enc]
    out = []
    for part in enc.allowed[split].parts:
        init = dict(enc.boxes)
        for b in fixed:
            init.pop(b, None)
        init[split] = part
        out.extend(enclose_split(sys, eps, fixed, init, max_depth - 1, max_sweeps))
    return out


def refute_region(
    sys: FinancialSystem,
    eps,
    fixed: Mapping,
    region: Mapping,
    bisect,
    min_width=Fraction(1, 10**4),
    max_nodes: int = 50_000,
):
    """Branch and bound: try to show no eps-solution has its rates inside ``region``.

    ``region`` maps banks to (lo, hi) boxes. Boxes of the ``bisect`` banks
    are halved (widest first) until refuted or narrower than ``min_width``.
    Returns the list of leaf enclosures that could not be refuted; empty
    means the region holds no eps-solution.
    """
    min_width = as_rational(min_width)
    stack = [dict(region)]
    survivors = []
    nodes = 0
    while stack:
        init = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise InternalConsistencyError(f"branch and bound exceeded {max_nodes} nodes")
        enc = enclose(sys, eps, fixed, init)
        if enc is None:
            continue
        free = {b: v for b, v in enc.boxes.items() if b not in fixed}
        gap = next((b for b in sys.banks if b in enc.allowed and len(enc.allowed[b].parts) > 1), None)
        if gap is not None:
            for part in enc.allowed[gap].parts:
                stack.append({**free, gap: part})
            continue
        widths = [(enc.boxes[b][1] - enc.boxes[b][0], b) for b in bisect]
        w, b = max(widths, key=lambda t: t[0])
        if w <= min_width:
            survivors.append(enc)
            continue
        lo, hi = enc.boxes[b]
        mid = (lo + hi) / 2
        stack.append({**free, b: (lo, mid)})
        stack.append({**free, b: (mid, hi)})
    return survivors


def _pick(s: AllowedSet, rng: random.Random, denom: int = 10**6) -> Fraction:
    lo, hi = s.parts[rng.randrange(len(s.parts))]
    u = rng.random()
    if u < 0.15:
        return lo
    if u < 0.3:
        return hi
    return lo + (hi - lo) * Fraction(rng.randrange(denom + 1), denom)


def sample_eps_solution(sys: FinancialSystem, eps, fixed: Mapping, rng: random.Random) -> RecoveryVector:
    """A random eps-solution agreeing with ``fixed`` (whose banks go unchecked).

    Needs the banks outside ``fixed`` to be forward evaluable once the
    source and sink are placed; those two never default in a built system,
    so any rate in [1 - eps, 1] serves for them, and the final check
    confirms it.
    """
    eps = as_rational(eps)
    r = {b: ONE for b in sys.banks}
    r.update({b: as_rational(v) for b, v in fixed.items()})
    heads = [b for b in ("s", "t") if b in r and b not in fixed]
    for b in heads:
        r[b] = _pick(AllowedSet(((1 - eps, ONE),)), rng)
    for b in forward_order(sys, set(fixed) | set(heads)):
        box = {k: (v, v) for k, v in r.items()}
        r[b] = _pick(allowed_set(sys, b, box, eps), rng)
    bad = [b for b in sys.banks if b not in fixed and not check_bank(sys, b, r, eps).ok]
    if bad:
        raise InternalConsistencyError(f"sampled vector fails at {bad[:5]}")
    return RecoveryVector(r)
