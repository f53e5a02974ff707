import random
from fractions import Fraction as Fr

import pytest
from gadget_suite import EPS, SAMPLERS, identities_at_zero, run_gadget, run_zero_one
from hypothesis import given
from hypothesis import strategies as st

from cdsclear.errors import ArgWritesNoDebt, NotForwardEvaluable, ParameterOutOfRange, PortArityMismatch
from cdsclear.gadgets import (
    AllowedSet,
    Builder,
    apply_gadget,
    bp_comparison,
    bp_constant,
    bp_cutoff,
    bp_difference,
    bp_inverter,
    bp_nand,
    bp_or,
    bp_reset,
    bp_scaling,
    bp_sum,
    bp_zero_one,
    comparison_level,
    enclose,
    enclose_split,
    eval_gadget_forward,
    instantiate_standalone,
    refute_region,
    sample_eps_solution,
)
from cdsclear.netcore import is_eps_solution, validate


def test_cutoff_forward_example():
    bp = bp_cutoff(Fr(2, 5), Fr(3, 5))
    u, v = bp.roles["u"], bp.roles["v"]
    sys, _, names = instantiate_standalone(bp)
    assert sys.notional("s", names[u], names["a"]) == Fr(5, 3)
    assert sys.notional("s", names[v], names[u]) == 3
    assert eval_gadget_forward(bp, [Fr(1, 5)]) == {u: 1, v: 0}
    assert eval_gadget_forward(bp, [Fr(4, 5)]) == {u: Fr(1, 3), v: 1}


def test_forward_examples():
    assert eval_gadget_forward(bp_constant(Fr(7, 10)), [])[bp_constant(Fr(7, 10)).output_port] == Fr(7, 10)
    nand = bp_nand()
    assert eval_gadget_forward(nand, [1, 1])[nand.output_port] == 0
    assert eval_gadget_forward(nand, [0, 1])[nand.output_port] == 1
    inv = bp_inverter()
    assert eval_gadget_forward(inv, [Fr(3, 10)])[inv.output_port] == Fr(7, 10)
    sm = bp_sum()
    assert eval_gadget_forward(sm, [Fr(3, 5), Fr(3, 5)])[sm.output_port] == 1
    with pytest.raises(NotForwardEvaluable):
        eval_gadget_forward(bp_zero_one(), [])


@pytest.mark.parametrize(
    "a,b,want",
    [(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, 0)],
)
def test_nand_and_or_truth_tables(a, b, want):
    assert eval_gadget_forward(bp_nand(), [a, b])[bp_nand().output_port] == want
    assert eval_gadget_forward(bp_or(), [a, b])[bp_or().output_port] == int(a or b)


def test_reset_is_a_cutoff_at_two_fifths():
    assert bp_reset().body == bp_cutoff(Fr(2, 5), Fr(3, 5)).body


def test_bank_counts_on_application():
    b = Builder()
    x = b.add_bank("x")
    b.add_contract(x, "t", None, 1)
    n0, c0 = len(b._banks), len(b.contracts())
    out = apply_gadget(b, bp_inverter(), [x])
    sys = b.finalize()
    assert len(sys.banks) == n0 + 1
    new = [c for c in sys.contracts if out in (c.writer, c.holder)]
    assert sorted((c.writer, c.holder, c.reference) for c in new) == sorted([("s", out, x), (out, "t", None)])
    assert len(sys.contracts) == c0 + 2
    n1 = len(sys.banks)
    apply_gadget(b, bp_nand(), [x, out])
    assert len(b.finalize().banks) == n1 + 5
    assert b.finalize().e("s") == 2 * b.tally


def test_application_errors():
    b = Builder()
    x = b.add_bank("x")
    with pytest.raises(ArgWritesNoDebt):
        apply_gadget(b, bp_inverter(), [x])
    apply_gadget(b, bp_inverter(), [x], relax=True)
    with pytest.raises(PortArityMismatch):
        apply_gadget(b, bp_nand(), [x], relax=True)
    half = Builder(Fr(1, 2), Fr(1, 2))
    y = half.add_bank("y")
    with pytest.raises(ParameterOutOfRange):
        apply_gadget(half, bp_sum(), [y, y], relax=True)
    apply_gadget(half, bp_nand(), [y, y], relax=True)


def test_parameter_ranges():
    for bad in ((Fr(3, 5), Fr(2, 5)), (0, Fr(1, 2)), (Fr(1, 2), 1)):
        with pytest.raises(ParameterOutOfRange):
            bp_cutoff(*bad)
    with pytest.raises(ParameterOutOfRange):
        bp_constant(Fr(3, 2))
    with pytest.raises(ParameterOutOfRange):
        bp_scaling(-1)
    with pytest.raises(ParameterOutOfRange):
        bp_zero_one(1, 2)


def test_zero_one_notional_depends_on_beta():
    for beta, delta in ((Fr(1, 2), 4), (Fr(3, 4), 8), (1, 2)):
        bp = bp_zero_one(1, beta)
        u, v = bp.roles["u"], bp.roles["v"]
        assert bp.body.notional("s", u, v) == delta
        assert bp.body.notional("s", v, u) == 1


def test_comparison_degenerates_near_the_ends():
    eps = Fr(1, 1000)
    assert comparison_level(bp_comparison(Fr(1, 2), eps)) is None
    assert comparison_level(bp_comparison(6 * eps, eps)) == 1
    assert comparison_level(bp_comparison(1 - 6 * eps, eps)) == 0
    low = bp_comparison(Fr(1, 1000), eps)
    assert eval_gadget_forward(low, [Fr(1, 2)])[low.output_port] == 1


def test_allowed_set_basics():
    s = AllowedSet.of([(Fr(0), Fr(1, 4)), (Fr(1, 5), Fr(1, 3)), (Fr(2, 3), Fr(1))])
    assert s.parts == ((0, Fr(1, 3)), (Fr(2, 3), 1))
    assert Fr(1, 2) not in s and Fr(3, 4) in s
    assert s.intersect(Fr(1, 2), Fr(3, 5)).empty
    assert s.hull == (0, 1)


# ---------------------------------------------------------------------------
# property suite (reduced sample; the acceptance run uses 1000 per gadget)


def test_zero_one_property():
    res = run_zero_one()
    assert res.ok, res.failures


@pytest.mark.parametrize("name", sorted(SAMPLERS))
@pytest.mark.parametrize("cpf", [False, True], ids=["standard", "counterparty_free"])
def test_gadget_property(name, cpf):
    res = run_gadget(name, 60, counterparty_free=cpf, seed=7)
    assert res.ok, res.failures[:3]


@pytest.mark.parametrize("cpf", [False, True], ids=["standard", "counterparty_free"])
def test_identities_exact_at_zero(cpf):
    assert identities_at_zero(random.Random(3), 40, cpf) == []


def test_zero_one_middle_band_refuted_but_solutions_survive():
    sys, _, names = instantiate_standalone(bp_zero_one(1, Fr(1, 2)), 1, Fr(1, 2))
    u, v = names["u"], names["v"]
    assert refute_region(sys, EPS, {}, {v: (3 * EPS, 1 - 3 * EPS)}, bisect=(u, v)) == []
    # soundness: a region holding the exact solution (r_u, r_v) = (1, 0) is never refuted
    assert refute_region(sys, EPS, {}, {v: (0, 3 * EPS)}, bisect=(u, v))
    leaves = enclose_split(sys, EPS, {})
    assert any(lf.boxes[v][0] <= 0 for lf in leaves) and any(lf.boxes[v][1] >= 1 for lf in leaves)


@given(st.sampled_from(sorted(SAMPLERS)), st.integers(0, 2**32 - 1))
def test_source_never_defaults(name, seed):
    rng = random.Random(seed)
    case = SAMPLERS[name](rng, EPS)
    sys, inputs, _ = instantiate_standalone(case.bp)
    enc = enclose(sys, EPS, dict(zip(inputs, case.inputs)))
    assert enc.boxes["s"][0] >= 1 - EPS
    assert enc.boxes["t"] == (1 - EPS, 1)


@given(st.sampled_from(sorted(SAMPLERS)), st.integers(0, 2**32 - 1))
def test_sampled_solutions_verify(name, seed):
    rng = random.Random(seed)
    case = SAMPLERS[name](rng, EPS)
    sys, inputs, names = instantiate_standalone(case.bp)
    fixed = dict(zip(inputs, case.inputs))
    r = sample_eps_solution(sys, EPS, fixed, rng)
    rep = is_eps_solution(sys, r, EPS)
    assert [b for b in rep.failing if b not in inputs] == []


@pytest.mark.parametrize(
    "bp",
    [bp_zero_one(), bp_cutoff(Fr(1, 3), Fr(1, 2)), bp_nand(), bp_or(), bp_constant(Fr(1, 3)), bp_inverter(),
     bp_sum(), bp_difference(), bp_scaling(Fr(1, 2)), bp_comparison(Fr(1, 2), EPS)],
    ids=lambda bp: bp.name,
)
def test_standalone_gadgets_have_no_fatal_violations(bp):
    sys, _, _ = instantiate_standalone(bp)
    assert not [v for v in validate(sys) if v.fatal]
    assert sys.e("s") >= 2 * sum(c.notional for c in sys.contracts if c.writer == "s" and c.reference is not None)
