"""Algorithms that produce recovery vectors.

``iterate_monotone`` and ``solve_decomposed`` run in floating point and
certify their output exactly; ``fictitious_default`` is exact throughout;
``grid_oracle`` is a brute-force reference used as ground truth in tests.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

import networkx as nx
import numpy as np

from ._vector import VecSystem
from .errors import (
    CdsPresent,
    CertificationFailed,
    DimensionCapExceeded,
    IterationBoundExceeded,
    NakedCdsPresent,
    ParameterOutOfRange,
    RedCyclePresent,
)
from .netcore import (
    ONE,
    ZERO,
    FinancialSystem,
    RecoveryVector,
    as_rational,
    assets,
    check_bank,
    colored_dependency_graph,
    dependencies,
    forward_order,
    is_eps_solution,
    naked_positions,
    update_F_bank,
)

DEFAULT_DIM_CAP = 6


@dataclass(frozen=True)
class SolveResult:
    r: RecoveryVector
    iterations: int
    method: str
    certified_eps: Fraction
    # (r^n, F(r^n)) pairs as float tuples in bank order, when requested
    trajectory: Optional[list] = field(default=None, compare=False, repr=False)


def _certify(sys: FinancialSystem, rvec: np.ndarray, eps: Fraction, method: str, iterations: int, traj):
    r = RecoveryVector({b: Fraction(float(x)) for b, x in zip(sys.banks, rvec)})
    for cand in (eps, 2 * eps):
        if is_eps_solution(sys, r, cand):
            return SolveResult(r, iterations, method, cand, traj)
    raise CertificationFailed(f"{method}: float iterate failed exact verification at eps and 2*eps")


def _descend(vec: VecSystem, r: np.ndarray, active: np.ndarray, eps: float, bound: int, traj):
    """Iterate r <- F(r) on the ``active`` coordinates until the residual there is <= eps."""
    steps = 0
    while True:
        f = vec.F(r)[0]
        if traj is not None:
            traj.append((tuple(r), tuple(f)))
        resid = np.max(np.abs(f - r)[active], initial=0.0)
        if resid <= eps:
            return r, steps
        steps += 1
        if steps > bound:
            raise IterationBoundExceeded(f"no eps-approximate fixed point after {bound} corrective steps")
        # min() is a no-op in exact arithmetic (F(r^n) <= r^n); it only absorbs float noise
        nxt = r.copy()
        nxt[active] = np.minimum(r[active], f[active])
        r = nxt


def iterate_monotone(sys: FinancialSystem, eps, record: bool = False) -> SolveResult:
    """Iterate F from the all-ones vector until an eps-approximate fixed point is reached.

    Requires a system without naked CDS positions, where F is monotone and
    the sequence descends; at most ceil(|N|/eps) corrective steps occur.
    """
    eps = as_rational(eps)
    if eps <= 0:
        raise ParameterOutOfRange("eps must be positive")
    naked = naked_positions(sys)
    if naked:
        raise NakedCdsPresent(f"naked CDS positions present: {naked[:3]}")
    vec = VecSystem(sys)
    bound = math.ceil(len(sys.banks) / eps)
    traj = [] if record else None
    active = np.ones(vec.n, dtype=bool)
    r, steps = _descend(vec, np.ones(vec.n), active, float(eps), bound, traj)
    return _certify(sys, r, eps, "iterate", steps, traj)


def solve_decomposed(sys: FinancialSystem, eps, record: bool = False) -> SolveResult:
    """Monotone iteration per strongly connected component, in topological order.

    Upstream components are frozen once solved. Works whenever no cycle of
    the colored dependency graph contains a red (naked) edge.
    """
    eps = as_rational(eps)
    if eps <= 0:
        raise ParameterOutOfRange("eps must be positive")
    dg = colored_dependency_graph(sys)
    if dg.has_red_cycle:
        raise RedCyclePresent("a naked CDS position lies on a dependency cycle")
    vec = VecSystem(sys)
    cond = nx.condensation(dg.graph)
    order = list(nx.lexicographical_topological_sort(
        cond, key=lambda c: min(sys.index[b] for b in cond.nodes[c]["members"])
    ))
    r = np.ones(vec.n)
    traj = [] if record else None
    total = 0
    for comp in order:
        members = cond.nodes[comp]["members"]
        active = np.zeros(vec.n, dtype=bool)
        active[[sys.index[b] for b in members]] = True
        bound = math.ceil(len(members) / eps)
        r, steps = _descend(vec, r, active, float(eps), bound, traj)
        total += steps
    return _certify(sys, r, eps, "decomposed", total, traj)


# ---------------------------------------------------------------------------
# fictitious default


def _solve_exact(A: list, b: list) -> Optional[list]:
    """Gaussian elimination over Fractions. Returns None if A is singular."""
    n = len(b)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((i for i in range(col, n) if M[i][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for i in range(n):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [x - f * y for x, y in zip(M[i], M[col])]
    return [M[i][n] for i in range(n)]


def fictitious_default(sys: FinancialSystem) -> SolveResult:
    """Exact greatest clearing vector of a debt-only system.

    Starts from the hypothesis that nobody defaults; each round solves the
    linear system in which the hypothesised defaulters pay out their
    post-cost assets, then adds every bank that is short at the result.
    The default set only grows, so at most |N| rounds are needed.
    """
    if sys.has_cds:
        raise CdsPresent("fictitious default handles debt-only systems")
    banks = sys.banks
    l = {b: sum((c.notional for c in sys.written[b]), ZERO) for b in banks}
    r = {b: ONE for b in banks}
    D: list = []
    rounds = 0
    while True:
        a, _ = assets(sys, r)
        short = [b for b in banks if a[b] < l[b]]
        if set(short) <= set(D):
            break
        newD = sorted(set(D) | set(short), key=sys.index.__getitem__)
        if rounds >= len(banks):
            raise IterationBoundExceeded("default set grew more than |N| times")
        rounds += 1
        D = newD
        pos = {b: i for i, b in enumerate(D)}
        A = [[ZERO] * len(D) for _ in D]
        rhs = []
        for b in D:
            i = pos[b]
            A[i][i] += l[b]
            const = sys.alpha * sys.e(b)
            for c in sys.held[b]:
                if c.writer in pos:
                    A[i][pos[c.writer]] -= sys.beta * c.notional
                else:
                    const += sys.beta * c.notional
            rhs.append(const)
        sol = _solve_exact(A, rhs)
        if sol is None:
            raise CertificationFailed(
                "singular default system: a closed group of defaulting banks with no outside assets"
            )
        r = {b: ONE for b in banks}
        r.update({b: sol[pos[b]] for b in D})
    rv = RecoveryVector(r)
    if not is_eps_solution(sys, rv, 0):
        raise CertificationFailed("fictitious default produced a non-solution")
    return SolveResult(rv, rounds, "fictitious", ZERO)


# ---------------------------------------------------------------------------
# grid oracle


@dataclass(frozen=True)
class GridSpec:
    """Grid over ``free_banks`` with spacing ``step``.

    ``pinned`` fixes rates; ``ports`` is a subset of the pinned banks whose
    own clearing condition is not checked (gadget input banks). Banks with
    no liabilities are pinned to 1 automatically. Whatever is left is
    derived: set to F_i in dependency order, which requires the remaining
    dependencies to be acyclic.
    """

    step: Fraction
    free_banks: Optional[tuple] = None
    pinned: Mapping = field(default_factory=dict)
    ports: frozenset = frozenset()
    max_dims: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        object.__setattr__(self, "step", as_rational(self.step))
        if self.step <= 0:
            raise ParameterOutOfRange("grid step must be positive")
        object.__setattr__(self, "pinned", {b: as_rational(v) for b, v in dict(self.pinned).items()})
        if self.free_banks is not None:
            object.__setattr__(self, "free_banks", tuple(self.free_banks))
            if set(self.free_banks) & set(self.pinned):
                raise ValueError("free and pinned banks overlap")
        object.__setattr__(self, "ports", frozenset(self.ports))
        if not self.ports <= set(self.pinned):
            raise ValueError("ports must be pinned")


def grid_points(step: Fraction) -> list:
    k = math.floor(1 / step)
    pts = [i * step for i in range(k + 1)]
    if pts[-1] != 1:
        pts.append(ONE)
    return pts


@dataclass
class _Plan:
    free: list
    pinned: dict
    derived: list
    checked: list
    solve_last: Optional[str]


def _plan(sys: FinancialSystem, spec: GridSpec) -> _Plan:
    pinned = dict(spec.pinned)
    for b in sys.banks:
        if b not in pinned and sys.has_no_liabilities(b) and (spec.free_banks is None or b not in spec.free_banks):
            pinned[b] = ONE
    if spec.free_banks is None:
        free = [b for b in sys.banks if b not in pinned]
    else:
        unknown = set(spec.free_banks) - set(sys.banks)
        if unknown:
            raise ValueError(f"unknown free banks {sorted(unknown)}")
        free = list(spec.free_banks)
    if len(free) > spec.max_dims:
        raise DimensionCapExceeded(f"{len(free)} free banks exceed the cap of {spec.max_dims}")
    derived = forward_order(sys, set(pinned) | set(free))
    checked = [b for b in sys.banks if b not in spec.ports]

    # The last free bank can be solved for instead of enumerated when its own
    # state does not depend on itself through derived banks.
    solve_last = None
    if free:
        cand = free[-1]
        g = nx.DiGraph()
        g.add_nodes_from(sys.banks)
        for b in derived:
            for d in dependencies(sys, b):
                g.add_edge(d, b)
        downstream = nx.descendants(g, cand)
        if not (dependencies(sys, cand) & downstream):
            solve_last = cand
    return _Plan(free, pinned, derived, checked, solve_last)


def _threads() -> int:
    env = os.environ.get("CDSCLEAR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _screen(sys: FinancialSystem, vec: VecSystem, plan: _Plan, pts: np.ndarray, step: float, eps: float):
    """Yield float candidate rows (full vectors) that may be eps-solutions."""
    idx = sys.index
    n = vec.n
    check = np.zeros(n, dtype=bool)
    check[[idx[b] for b in plan.checked]] = True
    enum = [b for b in plan.free if b != plan.solve_last]
    npts = len(pts)
    total = npts ** len(enum)
    chunk = max(1, min(total, 200_000))

    def rows(start, stop):
        lin = np.arange(start, stop)
        R = np.ones((stop - start, n))
        for b, v in plan.pinned.items():
            R[:, idx[b]] = float(v)
        for pos in range(len(enum) - 1, -1, -1):
            R[:, idx[enum[pos]]] = pts[lin % npts]
            lin = lin // npts
        return R

    def derive(R):
        for b in plan.derived:
            j = idx[b]
            R[:, j] = vec.F(R)[:, j]
        return R

    def work(start):
        stop = min(total, start + chunk)
        R = rows(start, stop)
        if plan.solve_last is None:
            R = derive(R)
            return R[vec.eps_mask(R, eps, check)]
        j = idx[plan.solve_last]
        # the solved bank's own state does not depend on its rate, nor do derived banks it depends on
        R[:, j] = 1.0
        R = derive(R)
        lo1, hi1, lo2, hi2 = vec.allowed_rates(R, j, eps)
        out = []
        for lo, hi in ((lo1, hi1), (lo2, hi2)):
            klo = np.maximum(np.ceil(np.clip(lo, 0, 1) / step - 1e-9), 0)
            khi = np.minimum(np.floor(np.clip(hi, 0, 1) / step + 1e-9), npts - 1)
            width = int(np.max(khi - klo, initial=-1)) + 1
            for off in range(max(width, 0)):
                k = klo + off
                sel = k <= khi
                if not sel.any():
                    continue
                Rk = R[sel].copy()
                Rk[:, j] = pts[k[sel].astype(np.int64)]
                Rk = derive(Rk)
                out.append(Rk[vec.eps_mask(Rk, eps, check)])
        if not out:
            return np.zeros((0, n))
        return np.concatenate(out)

    starts = list(range(0, total, chunk))
    if len(starts) > 1 and _threads() > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    return np.concatenate(parts) if parts else np.zeros((0, n))


def grid_oracle(sys: FinancialSystem, eps, spec: GridSpec) -> list:
    """All grid points (with derived banks filled in) that are eps-solutions.

    The grid is {0, step, 2*step, ..., 1} on each free bank. A float pass
    discards points that cannot qualify; survivors are rebuilt and checked
    in exact arithmetic. Ports are excluded from the check. An empty list
    means no grid point qualifies. Results are sorted by the free banks'
    rates, lexicographically.
    """
    eps = as_rational(eps)
    plan = _plan(sys, spec)
    vec = VecSystem(sys)
    pts_exact = grid_points(spec.step)
    pts = np.array([float(p) for p in pts_exact])
    cands = _screen(sys, vec, plan, pts, float(spec.step), float(eps))
    idx = sys.index
    seen = set()
    found = []
    for row in cands:
        key = tuple(pts_exact[int(np.abs(pts - row[idx[b]]).argmin())] for b in plan.free)
        if key in seen:
            continue
        seen.add(key)
        r = {b: ONE for b in sys.banks}
        r.update(plan.pinned)
        r.update(dict(zip(plan.free, key)))
        for b in plan.derived:
            r[b] = update_F_bank(sys, b, r)
        if _exact_check(sys, r, eps, plan.checked):
            found.append((key, RecoveryVector(r)))
    found.sort(key=lambda kv: kv[0])
    return [rv for _, rv in found]


def _exact_check(sys, r, eps, checked) -> bool:
    return all(check_bank(sys, b, r, eps).ok for b in checked)
