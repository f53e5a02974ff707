"""Small named systems and circuits used in tests, docs and the CLI examples."""

from fractions import Fraction

from .gcircuit import GCircuit, Gate, GateKind
from .gadgets.reductions import BooleanCircuit
from .netcore import Contract, FinancialSystem

HALF = Fraction(1, 2)


def cds_triangle() -> FinancialSystem:
    """Three banks, two debts and one CDS; alpha = beta = 1/2. Unique solution (1, 1/3, 1)."""
    return FinancialSystem(
        banks=("A", "B", "C"),
        external_assets={"A": 0, "B": 2, "C": 1},
        contracts=(
            Contract("B", "A", None, 2),
            Contract("B", "C", None, 1),
            Contract("A", "C", "B", 1),
        ),
        alpha=HALF,
        beta=HALF,
    )


def cds_triangle_solution() -> dict:
    return {"A": Fraction(1), "B": Fraction(1, 3), "C": Fraction(1)}


def sqrt_cycle() -> FinancialSystem:
    """r_A = r_B / 2 and r_B = 1 / (2 - r_A): the unique solution is r_A = 1 - 1/sqrt(2)."""
    return FinancialSystem(
        banks=("A", "B", "C", "t"),
        external_assets={"B": 1},
        contracts=(
            Contract("A", "C", None, 1),
            Contract("B", "A", None, HALF),
            Contract("B", "t", None, HALF),
            Contract("B", "C", "A", 1),
        ),
    )


def two_bank_cycle() -> FinancialSystem:
    return FinancialSystem(
        banks=("A", "B"),
        external_assets={},
        contracts=(Contract("A", "B", None, 1), Contract("B", "A", None, 1)),
    )


def self_loop_circuit() -> GCircuit:
    """x[v] = [x[c1] - x[v]] with x[c1] = 1; the unique exact solution has x[v] = 1/2."""
    return GCircuit(
        ("c1", "v"),
        (Gate(GateKind.CONST, (), "c1", Fraction(1)), Gate(GateKind.SUB, ("c1", "v"), "v")),
    )


def not_x() -> BooleanCircuit:
    return BooleanCircuit(("x",), (("x", "x", "g"),), "g")


def x_and_not_x() -> BooleanCircuit:
    """Unsatisfiable: NOT(NAND(x, NAND(x, x)))."""
    return BooleanCircuit(("x",), (("x", "x", "g1"), ("x", "g1", "g2"), ("g2", "g2", "g3")), "g3")
