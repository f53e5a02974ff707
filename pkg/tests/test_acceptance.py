"""Acceptance criteria. Each test carries a ``criterion(n)`` marker; conftest prints
one PASS/FAIL line per criterion at the end of the run."""

import math
import random
import time
from fractions import Fraction as Fr

import numpy as np
import pytest
from conftest import random_debt_only, random_general, random_no_naked
from gadget_suite import identities_at_zero, run_suite

from cdsclear import cli
from cdsclear._vector import VecSystem
from cdsclear.fixtures import cds_triangle, not_x, self_loop_circuit, sqrt_cycle, x_and_not_x
from cdsclear.gadgets import (
    bp_zero_one,
    compile_boolean,
    compile_gcircuit,
    destroyer_slice,
    embed_gc_solution,
    extract_discrete,
    instantiate_standalone,
    reduce_sat,
    witness_boolean,
)
from cdsclear.gcircuit import State, gc_is_eps_solution, gc_lfp_reconstruct
from cdsclear.netcore import (
    RecoveryVector,
    assets,
    default_set_of,
    forward_order,
    is_eps_default_set,
    is_eps_solution,
    liabilities,
    rates_to_json,
    sup_distance,
    system_to_json,
    update_F,
)
from cdsclear.solvers import GridSpec, fictitious_default, grid_oracle, iterate_monotone

# fixed before any run of this suite; never tuned
LAWS_SEED = 20240601


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# ---------------------------------------------------------------------------
# 1


@pytest.mark.criterion(1)
def test_cds_triangle_reproduction(tmp_path):
    import json

    sysf, ratef = tmp_path / "cds_triangle.json", tmp_path / "r.json"
    sysf.write_text(json.dumps(system_to_json(cds_triangle())))
    ratef.write_text(json.dumps(rates_to_json(RecoveryVector({"A": 1, "B": Fr(1, 3), "C": 1}))))
    with Timer() as t:
        payload, code = cli.run(["check", str(sysf), "--rates", str(ratef), "--eps", "0"])
    assert code == 0 and payload["verdict"] is True
    liab = {(x["writer"], x["holder"]): Fr(x["value"]) for x in payload["liabilities"]}
    pays = {(x["writer"], x["holder"]): Fr(x["value"]) for x in payload["payments"]}
    assert liab == {("B", "A"): 2, ("B", "C"): 1, ("A", "C"): Fr(2, 3)}
    assert pays == {("B", "A"): Fr(2, 3), ("B", "C"): Fr(1, 3), ("A", "C"): Fr(2, 3)}
    assert t.elapsed < 1


# ---------------------------------------------------------------------------
# 2


@pytest.mark.criterion(2)
def test_sqrt_cycle_fptas():
    with Timer() as t:
        res = iterate_monotone(sqrt_cycle(), Fr(1, 10**6))
    assert res.iterations <= 4 * 10**6
    want = {"A": 1 - 1 / math.sqrt(2), "B": 2 - math.sqrt(2), "C": 1.0, "t": 1.0}
    assert max(abs(float(res.r[b]) - want[b]) for b in want) <= 1e-4
    assert is_eps_solution(sqrt_cycle(), res.r, res.certified_eps)
    assert t.elapsed < 5


# ---------------------------------------------------------------------------
# 3


@pytest.mark.criterion(3)
@pytest.mark.parametrize("beta", [Fr(1, 2), Fr(1)], ids=["beta=1/2", "beta=1"])
def test_zero_one_exactness(beta):
    with Timer() as t:
        sys, _, names = instantiate_standalone(bp_zero_one(1, beta), 1, beta)
        u, v = names["u"], names["v"]
        found = grid_oracle(sys, 0, GridSpec(1, free_banks=(u, v), pinned={"s": 1}))
    assert {(r[u], r[v]) for r in found} == {(0, 1), (1, 0)}
    assert len(found) == 2
    assert t.elapsed < 1


# ---------------------------------------------------------------------------
# 4 and 10 (gadget suite)


def _gadget_suite(cpf):
    with Timer() as t:
        results = run_suite(1000, counterparty_free=cpf)
        ident = identities_at_zero(random.Random(4), 200, cpf)
    for res in results:
        print(f"  {res.name:<11} checked={res.checked:<5} failures={len(res.failures)}")
    assert all(res.ok for res in results), [(r.name, r.failures[:2]) for r in results if not r.ok]
    assert all(res.checked >= 1000 for res in results if res.name != "zero_one")
    assert ident == []
    return t.elapsed


@pytest.mark.criterion(4)
def test_gadget_property_suite():
    assert _gadget_suite(False) < 60


# ---------------------------------------------------------------------------
# 5


def _candidates(sys, free, rng, n):
    """Float candidates: random rates on ``free``; the rest mostly derived through F."""
    vec = VecSystem(sys)
    idx = sys.index
    order = forward_order(sys, set(free))
    R = np.ones((n, vec.n))
    for b in free:
        R[:, idx[b]] = rng.random(n)
    R[:, idx["s"]] = 1 - 1e-3 * rng.random(n)
    for b in order:
        R[:, idx[b]] = vec.F(R)[:, idx[b]]
    kind = rng.random(n)
    noisy = kind < 0.5
    R[noisy] = np.clip(R[noisy] + rng.uniform(-1e-3, 1e-3, size=R[noisy].shape), 0, 1)
    uniform = kind > 0.9
    R[uniform] = rng.random(R[uniform].shape)
    return vec, R


@pytest.mark.criterion(5)
def test_sat_reduction_round_trip():
    eps = Fr(1, 1000)
    with Timer() as t:
        half = Fr(1, 2)
        art = compile_boolean(not_x(), half, half, destroyer=True)
        assert art.system == reduce_sat(not_x(), half, half)
        assert is_eps_solution(art.system, witness_boolean(art, {"x": 0}), 0)

        # destroyer slice with its input pinned low: the 1-D grid over r_B is empty
        sl, d = destroyer_slice(half, half)
        spec = GridSpec(eps, free_banks=(d.B,), pinned={d.input: 0, "s": 1}, ports={d.input})
        assert grid_oracle(sl, eps, spec) == []

        unsat = compile_boolean(x_and_not_x(), half, half, destroyer=True)
        sys = unsat.system
        dB = unsat.destroyer[0].B
        zo = unsat.zero_one["x"]
        for x in (0, 1):
            spec = GridSpec(eps, free_banks=(dB,), pinned={"s": 1, "t": 1, zo["u"]: 1 - x, zo["v"]: x}, ports=set())
            assert grid_oracle(sys, eps, spec) == []

        # 10^5 random candidates: float screen, then exact check of anything that slips through
        rng = np.random.default_rng(5)
        free = ["s", "t", zo["u"], zo["v"], dB]
        vec, R = _candidates(sys, free, rng, 10**5)
        mask = vec.eps_mask(R, float(eps), np.ones(vec.n, dtype=bool))
        passed = []
        for row in R[mask]:
            r = {b: Fr(float(row[i])) for i, b in enumerate(sys.banks)}
            if is_eps_solution(sys, r, eps):
                passed.append(r)
    print(f"  candidates=100000 float-screen survivors={int(mask.sum())} exact passes={len(passed)}")
    assert passed == []
    assert t.elapsed < 120


# ---------------------------------------------------------------------------
# 6 and 10 (generalized-circuit round trip)

GC_EPS = Fr(1, 1000)
# the reconstruction tolerance: difference gadget (6 eps) plus the x1 link (5 eps)
RECON = 11 * GC_EPS


def _gc_round_trip(cpf):
    with Timer() as t:
        art = compile_gcircuit(self_loop_circuit(), GC_EPS, counterparty_free=cpf)
        r = embed_gc_solution(art, {"c1": 1, "v": Fr(1, 2)})
        assert is_eps_solution(art.system, r, 0)
        D = default_set_of(art.system, r, GC_EPS)
        assert is_eps_default_set(art.system, r, D, GC_EPS)
        d = extract_discrete(art, D)
        assert d == {1: State.M}
        x = gc_lfp_reconstruct(art.circuit, d, RECON)
        assert x and gc_is_eps_solution(art.circuit, x, RECON)
        assert all(isinstance(v, Fr) for v in x.values())
    return t.elapsed


@pytest.mark.criterion(6)
def test_gcircuit_round_trip():
    assert _gc_round_trip(False) < 10


# ---------------------------------------------------------------------------
# 7


@pytest.mark.criterion(7)
def test_debt_only_oracle_equivalence():
    eps = delta = Fr(1, 100)
    rng = random.Random(7)
    with Timer() as t:
        for _ in range(200):
            sys = random_debt_only(rng)
            fd = fictitious_default(sys)
            assert is_eps_solution(sys, fd.r, 0)
            grid = grid_oracle(sys, eps, GridSpec(delta))
            assert any(sup_distance(g, fd.r) <= delta + eps for g in grid), sys
    assert t.elapsed < 120


# ---------------------------------------------------------------------------
# 8


@pytest.mark.criterion(8)
def test_no_naked_oracle_equivalence():
    eps = delta = Fr(2, 100)
    rng = random.Random(8)
    with Timer() as t:
        for _ in range(100):
            sys = random_no_naked(rng)
            res = iterate_monotone(sys, eps, record=True)
            traj = [np.asarray(r) for r, _ in res.trajectory]
            assert all(np.all(b <= a + 1e-12) for a, b in zip(traj, traj[1:]))
            assert is_eps_solution(sys, res.r, res.certified_eps)
            grid = grid_oracle(sys, eps, GridSpec(delta))
            assert any(sup_distance(g, res.r) <= delta + eps for g in grid), sys
    assert t.elapsed < 120


# ---------------------------------------------------------------------------
# 9


def law_triples(n, seed=LAWS_SEED):
    """(system, r, eps) triples; about half are built to be eps-solutions."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        sys = random_general(rng)
        if i % 4 == 0:
            sys = sys.replace(alpha=1, beta=1)
        r = {b: Fr(rng.randint(0, 100), 100) for b in sys.banks}
        for _ in range(rng.randint(0, 6)):
            r = update_F(sys, r)
        if rng.random() < 0.5:
            eps = sup_distance(update_F(sys, r), r) + Fr(rng.randint(0, 3), 1000)
        else:
            eps = Fr(rng.randint(0, 200), 1000)
        out.append((sys, dict(r), eps))
    return out


def law_violations(sys, r, eps):
    """Names of the laws (as stated, literally) that the triple violates."""
    bad = []
    F = update_F(sys, r)
    rep = is_eps_solution(sys, r, eps)
    a, ap = assets(sys, r)
    liab = liabilities(sys, r).totals
    # 1: exact = 0-solution; monotone in eps
    if bool(is_eps_solution(sys, r, 0)) != (F == r):
        bad.append("1a")
    if rep and not is_eps_solution(sys, r, eps + Fr(1, 1000)):
        bad.append("1b")
    # 2: F(r) = r +- eps implies eps-solution
    if sup_distance(F, r) <= eps and not rep:
        bad.append("2")
    # 3: with alpha = beta = 1 the converse holds too
    if sys.alpha == sys.beta == 1 and bool(rep) != (sup_distance(F, r) <= eps):
        bad.append("3")
    if not rep:
        return bad
    for i in sys.banks:
        ri, ai, api, li = r[i], a[i], ap[i], liab[i]
        if ai >= (1 + eps) * li and abs(ri - 1) > eps:
            bad.append("4a")
        if ai < (1 - eps) * li and abs(ri - api / li) > eps:
            bad.append("4b")
        if li > 0 and ri > ai / li + eps:
            bad.append("5")
        if ri < 1 - eps:
            if ri > max(sys.alpha, sys.beta) + eps:
                bad.append("6a")
            if sys.e(i) == 0 and ri > sys.beta + eps:
                bad.append("6b")
    return bad


@pytest.mark.criterion(9)
def test_approximate_solution_laws():
    with Timer() as t:
        triples = law_triples(500)
        failures = []
        solutions = 0
        for k, (sys, r, eps) in enumerate(triples):
            solutions += bool(is_eps_solution(sys, r, eps))
            v = law_violations(sys, r, eps)
            if v:
                failures.append((k, sorted(set(v))))
    print(f"  triples=500 eps-solutions={solutions} violating={len(failures)} {failures[:5]}")
    assert solutions >= 100
    assert failures == []
    assert t.elapsed < 30


# ---------------------------------------------------------------------------
# 10


@pytest.mark.criterion(10)
def test_counterparty_free_gadget_suite():
    assert _gadget_suite(True) < 60


@pytest.mark.criterion(10)
def test_counterparty_free_gcircuit_round_trip():
    assert _gc_round_trip(True) < 10
