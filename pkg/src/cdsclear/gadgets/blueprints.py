"""The gadget library.

Every interior bank owes 1 to the sink and holds contracts written by the
source; inputs enter only as CDS reference entities. Layouts follow the
algebra each gadget must satisfy (stated per function).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from ..errors import ParameterOutOfRange
from ..netcore import ONE, as_rational
from .builder import SINK, SOURCE, Builder, GadgetBlueprint

# comparison gadget: half-width of the first cutoff's window, in units of eps
COMPARISON_C = 6


def _leaf(b: Builder, name: str) -> str:
    b.add_bank(name)
    b.add_contract(name, SINK, None, ONE)
    return name


def _cutoff_layout(name, gamma, delta, doc, roles=("u", "v"), needs_no_default_costs=False) -> GadgetBlueprint:
    b = Builder()
    a = b.add_bank("a")
    u = _leaf(b, "u")
    v = _leaf(b, "v")
    b.add_contract(SOURCE, u, a, gamma)
    b.add_contract(SOURCE, v, u, delta)
    return b.to_blueprint(name, [a], v, doc, dict(zip(roles, (u, v))), needs_no_default_costs)


@lru_cache(maxsize=None)
def _zero_one(alpha: Fraction, beta: Fraction) -> GadgetBlueprint:
    delta = 2 / (1 - beta) if beta < 1 else Fraction(2)
    b = Builder()
    u = _leaf(b, "u")
    v = _leaf(b, "v")
    b.add_contract(SOURCE, u, v, delta)
    b.add_contract(SOURCE, v, u, ONE)
    return b.to_blueprint(
        "zero_one", [], v,
        "exact solutions (r_u, r_v) = (1, 0) and (0, 1); every eps-solution has r_v near 0 or near 1",
        {"u": u, "v": v},
    )


def bp_zero_one(alpha=1, beta=1) -> GadgetBlueprint:
    """u holds a CDS on v of notional 2/(1-beta) (2 when beta = 1); v holds a CDS on u of notional 1."""
    alpha, beta = as_rational(alpha), as_rational(beta)
    if not (0 <= alpha <= 1 and 0 <= beta <= 1):
        raise ParameterOutOfRange("alpha and beta must lie in [0, 1]")
    return _zero_one(alpha, beta)


@lru_cache(maxsize=None)
def _cutoff(K: Fraction, L: Fraction) -> GadgetBlueprint:
    return _cutoff_layout(
        "cutoff", 1 / (1 - K), (1 - K) / (L - K),
        f"input <= K - O(eps) gives output near 0, input >= L + O(eps) gives output near 1 (K={K}, L={L})",
    )


def bp_cutoff(K, L) -> GadgetBlueprint:
    """u holds a CDS on the input of notional 1/(1-K); v holds a CDS on u of notional (1-K)/(L-K)."""
    K, L = as_rational(K), as_rational(L)
    if not 0 < K < L < 1:
        raise ParameterOutOfRange("cutoff needs 0 < K < L < 1")
    return _cutoff(K, L)


@lru_cache(maxsize=None)
def bp_reset() -> GadgetBlueprint:
    """Cutoff with K = 2/5, L = 3/5: inputs <= 1/4 map near 0, inputs >= 3/4 near 1."""
    base = bp_cutoff(Fraction(2, 5), Fraction(3, 5))
    return GadgetBlueprint(
        "reset", base.body, base.input_ports, base.output_port,
        "input <= 1/4 gives output near 0; input >= 3/4 gives output near 1",
        base.roles,
    )


@lru_cache(maxsize=None)
def bp_nand() -> GadgetBlueprint:
    """Reset both inputs, then v holds CDSs of notional 2 on each reset output."""
    b = Builder()
    a = b.add_bank("a")
    c = b.add_bank("b")
    a2 = b.apply(bp_reset(), [a], relax=True)
    b2 = b.apply(bp_reset(), [c], relax=True)
    v = _leaf(b, "v")
    b.add_contract(SOURCE, v, a2, 2)
    b.add_contract(SOURCE, v, b2, 2)
    return b.to_blueprint(
        "nand", [a, c], v,
        "an input <= 1/4 gives output near 1; both inputs >= 3/4 give output near 0",
        {"a_reset": a2, "b_reset": b2, "v": v},
    )


@lru_cache(maxsize=None)
def bp_or() -> GadgetBlueprint:
    """NAND(NAND(a, a), NAND(b, b))."""
    b = Builder()
    a = b.add_bank("a")
    c = b.add_bank("b")
    na = b.apply(bp_nand(), [a, a], relax=True)
    nb = b.apply(bp_nand(), [c, c], relax=True)
    v = b.apply(bp_nand(), [na, nb])
    return b.to_blueprint(
        "or", [a, c], v,
        "an input >= 3/4 gives output near 1; both inputs <= 1/4 give output near 0",
        {"not_a": na, "not_b": nb, "v": v},
    )


@lru_cache(maxsize=None)
def _constant(zeta: Fraction) -> GadgetBlueprint:
    b = Builder()
    v = _leaf(b, "v")
    b.add_contract(SOURCE, v, None, zeta)
    return b.to_blueprint("const", [], v, f"output = {zeta} +- O(eps)", {"v": v}, True)


def bp_constant(zeta) -> GadgetBlueprint:
    """v holds debt of notional zeta from the source."""
    zeta = as_rational(zeta)
    if not 0 <= zeta <= 1:
        raise ParameterOutOfRange("zeta must lie in [0, 1]")
    return _constant(zeta)


@lru_cache(maxsize=None)
def bp_inverter() -> GadgetBlueprint:
    """v holds a CDS of notional 1 on the input."""
    b = Builder()
    a = b.add_bank("a")
    v = _leaf(b, "v")
    b.add_contract(SOURCE, v, a, ONE)
    return b.to_blueprint("inv", [a], v, "output = 1 - input +- O(eps)", {"v": v}, True)


@lru_cache(maxsize=None)
def bp_sum() -> GadgetBlueprint:
    """Invert both inputs; v holds CDSs of notional 1 on both inverted banks."""
    b = Builder()
    a = b.add_bank("a")
    c = b.add_bank("b")
    na = b.apply(bp_inverter(), [a], relax=True)
    nb = b.apply(bp_inverter(), [c], relax=True)
    v = _leaf(b, "v")
    b.add_contract(SOURCE, v, na, ONE)
    b.add_contract(SOURCE, v, nb, ONE)
    return b.to_blueprint("sum", [a, c], v, "output = [a + b] +- O(eps)", {"v": v}, True)


@lru_cache(maxsize=None)
def bp_difference() -> GadgetBlueprint:
    """u holds CDSs on a and on NOT b, so r_u = [1 - a + b]; the output inverts u."""
    b = Builder()
    a = b.add_bank("a")
    c = b.add_bank("b")
    nb = b.apply(bp_inverter(), [c], relax=True)
    u = _leaf(b, "u")
    b.add_contract(SOURCE, u, a, ONE)
    b.add_contract(SOURCE, u, nb, ONE)
    v = b.apply(bp_inverter(), [u])
    return b.to_blueprint("diff", [a, c], v, "output = [a - b] +- O(eps)", {"u": u, "v": v}, True)


@lru_cache(maxsize=None)
def _scaling(zeta: Fraction) -> GadgetBlueprint:
    return _cutoff_layout("scale", ONE, zeta, f"output = {zeta} * input +- O(eps)", needs_no_default_costs=True)


def bp_scaling(zeta) -> GadgetBlueprint:
    """Two chained inverters, the second with notional zeta."""
    zeta = as_rational(zeta)
    if not 0 <= zeta <= 1:
        raise ParameterOutOfRange("zeta must lie in [0, 1]")
    return _scaling(zeta)


@lru_cache(maxsize=None)
def _comparison(zeta: Fraction, eps: Fraction) -> GadgetBlueprint:
    c = COMPARISON_C
    b = Builder()
    a = b.add_bank("a")
    if zeta <= c * eps or zeta >= 1 - c * eps:
        # threshold too close to an end of [0, 1]: the output is a constant
        level = ONE if zeta <= c * eps else Fraction(0)
        v = b.apply(bp_constant(level), [])
        return b.to_blueprint(
            "cmp", [a], v, f"constant {level} (threshold {zeta} within {c}*eps of the boundary)",
            {"const": v}, True,
        )
    names = b.instantiate(bp_cutoff(zeta - c * eps, zeta + c * eps), [a], relax=True)
    u1, v1 = names["u"], names["v"]
    v = b.apply(bp_reset(), [v1])
    return b.to_blueprint(
        "cmp", [a], v, f"input below {zeta} - O(eps) gives ~0, above {zeta} + O(eps) gives ~1",
        {"u1": u1, "v1": v1, "v": v}, True,
    )


def bp_comparison(zeta, eps) -> GadgetBlueprint:
    """Cutoff with window zeta +- 6 eps followed by a reset; constant near the ends of [0, 1]."""
    zeta, eps = as_rational(zeta), as_rational(eps)
    if not 0 <= zeta <= 1:
        raise ParameterOutOfRange("zeta must lie in [0, 1]")
    if eps <= 0:
        raise ParameterOutOfRange("comparison gadget needs eps > 0")
    return _comparison(zeta, eps)


def comparison_level(bp: GadgetBlueprint):
    """For a comparison blueprint that degenerated to a constant, its output level; else None."""
    if "const" not in bp.roles:
        return None
    v = bp.roles["const"]
    return bp.body.notional(SOURCE, v, None)
