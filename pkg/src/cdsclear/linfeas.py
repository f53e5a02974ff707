"""Exact rational linear feasibility.

Phase-1 simplex over ``Fraction`` with Bland's rule. Variables are free
(unbounded in sign) unless a constraint bounds them; internally each is
split as x = p - n with p, n >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from .errors import InternalConsistencyError
from .netcore import as_rational

LE, GE, EQ = "<=", ">=", "=="
_RELATIONS = (LE, GE, EQ)


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping
    relation: str
    rhs: Fraction

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        object.__setattr__(
            self, "coeffs", {v: as_rational(c) for v, c in dict(self.coeffs).items() if as_rational(c) != 0}
        )
        object.__setattr__(self, "rhs", as_rational(self.rhs))

    def lhs(self, x: Mapping) -> Fraction:
        return sum((c * x[v] for v, c in self.coeffs.items()), Fraction(0))

    def holds(self, x: Mapping) -> bool:
        lhs = self.lhs(x)
        if self.relation == LE:
            return lhs <= self.rhs
        if self.relation == GE:
            return lhs >= self.rhs
        return lhs == self.rhs

    def normalized(self) -> list:
        """The constraint as a list of (coeffs, rhs) pairs meaning coeffs . x <= rhs."""
        neg = {v: -c for v, c in self.coeffs.items()}
        if self.relation == LE:
            return [(dict(self.coeffs), self.rhs)]
        if self.relation == GE:
            return [(neg, -self.rhs)]
        return [(dict(self.coeffs), self.rhs), (neg, -self.rhs)]


@dataclass
class LinearSystem:
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)

    def add_var(self, name) -> None:
        if name not in self.variables:
            self.variables.append(name)

    def add(self, coeffs: Mapping, relation: str, rhs) -> None:
        unknown = set(coeffs) - set(self.variables)
        if unknown:
            raise ValueError(f"undeclared variables {sorted(map(str, unknown))}")
        self.constraints.append(Constraint(coeffs, relation, rhs))

    def le(self, coeffs, rhs):
        self.add(coeffs, LE, rhs)

    def ge(self, coeffs, rhs):
        self.add(coeffs, GE, rhs)

    def eq(self, coeffs, rhs):
        self.add(coeffs, EQ, rhs)

    def check(self, x: Mapping) -> list:
        """Indices of constraints violated by x."""
        return [i for i, c in enumerate(self.constraints) if not c.holds(x)]


class Infeasible:
    """Returned instead of a point when the constraints have no common solution."""

    def __init__(self, phase1_value: Fraction):
        self.phase1_value = phase1_value

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Infeasible(phase1_value={self.phase1_value})"


def _pivot(T: list, row: int, col: int) -> None:
    p = T[row][col]
    if p != 1:
        T[row] = [x / p for x in T[row]]
    pr = T[row]
    for i, r in enumerate(T):
        if i != row and r[col] != 0:
            f = r[col]
            T[i] = [a - f * b for a, b in zip(r, pr)]


def feasible_point(ls: LinearSystem) -> Union[dict, Infeasible]:
    """A point satisfying every constraint exactly, or ``Infeasible``."""
    nv = len(ls.variables)
    pos = {v: i for i, v in enumerate(ls.variables)}
    rows = []  # (dense coeffs over x, relation, rhs)
    for c in ls.constraints:
        dense = [Fraction(0)] * nv
        for v, a in c.coeffs.items():
            dense[pos[v]] = a
        rows.append((dense, c.relation, c.rhs))
    m = len(rows)
    if m == 0:
        return {v: Fraction(0) for v in ls.variables}

    n_slack = sum(1 for _, rel, _ in rows if rel != EQ)
    # columns: p (nv), n (nv), slacks, artificials, rhs
    n_struct = 2 * nv + n_slack
    ncols = n_struct + m
    T = []
    basis = []
    s_idx = 2 * nv
    for i, (dense, rel, rhs) in enumerate(rows):
        row = [Fraction(0)] * (ncols + 1)
        for j, a in enumerate(dense):
            row[j] = a
            row[nv + j] = -a
        if rel == LE:
            row[s_idx] = Fraction(1)
            s_idx += 1
        elif rel == GE:
            row[s_idx] = Fraction(-1)
            s_idx += 1
        row[-1] = rhs
        if rhs < 0:
            row = [-x for x in row]
        row[n_struct + i] = Fraction(1)
        T.append(row)
        basis.append(n_struct + i)

    # phase-1 objective: minimise the sum of artificials; z holds reduced costs
    z = [Fraction(0)] * (ncols + 1)
    for row in T:
        for j in range(n_struct):
            z[j] -= row[j]
        z[-1] -= row[-1]
    T.append(z)

    while True:
        zr = T[-1]
        enter = next((j for j in range(ncols) if zr[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # cannot happen in phase 1 (objective bounded below by 0)
            raise InternalConsistencyError("phase-1 simplex reported an unbounded direction")
        row = best[1]
        _pivot(T, row, enter)
        basis[row] = enter

    value = -T[-1][-1]
    if value > 0:
        return Infeasible(value)
    vals = [Fraction(0)] * ncols
    for i, b in enumerate(basis):
        vals[b] = T[i][-1]
    x = {v: vals[pos[v]] - vals[nv + pos[v]] for v in ls.variables}
    bad = ls.check(x)
    if bad:
        raise InternalConsistencyError(f"simplex point violates constraints {bad[:5]}")
    return x
