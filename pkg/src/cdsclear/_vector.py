"""Float evaluation of F over batches of recovery vectors.

Used by the iterative solver's hot loop and by the grid oracle's screening
pass. Nothing here is trusted for a verdict; callers re-check in exact
arithmetic.
"""

from __future__ import annotations

import numpy as np

from .netcore import FinancialSystem


class VecSystem:
    def __init__(self, sys: FinancialSystem):
        self.sys = sys
        n = len(sys.banks)
        idx = sys.index
        self.n = n
        self.e = np.array([float(sys.e(b)) for b in sys.banks])
        self.alpha = float(sys.alpha)
        self.beta = float(sys.beta)
        self.cp_free = sys.counterparty_free
        C = len(sys.contracts)
        self.w = np.array([idx[c.writer] for c in sys.contracts], dtype=np.int64)
        self.h = np.array([idx[c.holder] for c in sys.contracts], dtype=np.int64)
        # debt contracts point at a phantom column that always holds rate 0
        self.k = np.array([n if c.reference is None else idx[c.reference] for c in sys.contracts], dtype=np.int64)
        self.notional = np.array([float(c.notional) for c in sys.contracts])
        self.W = np.zeros((C, n))
        self.H = np.zeros((C, n))
        if C:
            self.W[np.arange(C), self.w] = 1.0
            self.H[np.arange(C), self.h] = 1.0

    def state(self, R: np.ndarray):
        """Return (a, a_post, l), each shaped like R (batch, n)."""
        R = np.atleast_2d(R)
        M = R.shape[0]
        ext = np.concatenate([R, np.zeros((M, 1))], axis=1)
        liab = self.notional * (1.0 - ext[:, self.k])
        l = liab @ self.W
        if self.cp_free:
            inc = liab @ self.H
        else:
            inc = (liab * R[:, self.w]) @ self.H
        a = self.e + inc
        ap = self.alpha * self.e + self.beta * inc
        return a, ap, l

    def F(self, R: np.ndarray) -> np.ndarray:
        a, ap, l = self.state(R)
        out = np.ones_like(a)
        dflt = a < l
        np.divide(ap, l, out=out, where=dflt)
        return out

    def eps_mask(self, R: np.ndarray, eps: float, check: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Loose float version of the eps-solution test.

        Accepts a superset of the exact answer: every comparison is widened
        by ``tol``. ``check`` is a boolean mask of the banks to test.
        """
        R = np.atleast_2d(R)
        a, ap, l = self.state(R)
        b1 = (np.abs(R - 1.0) <= eps + tol) & (a >= (1.0 - eps) * l - tol * (1.0 + l))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(l > 0, ap / np.where(l > 0, l, 1.0), np.inf)
        b2 = (l > 0) & (np.abs(R - ratio) <= eps + tol) & (a < (1.0 + eps) * l + tol * (1.0 + l))
        ok = b1 | b2
        return np.all(ok[:, check], axis=1)

    def allowed_rates(self, R: np.ndarray, bank: int, eps: float, tol: float = 1e-9):
        """Per row, the (loosened) intervals of rates ``bank`` may take given the others.

        Returns arrays (lo1, hi1, lo2, hi2); an empty interval has lo > hi.
        """
        a, ap, l = self.state(R)
        a, ap, l = a[:, bank], ap[:, bank], l[:, bank]
        b1 = a >= (1.0 - eps) * l - tol * (1.0 + l)
        lo1 = np.where(b1, 1.0 - eps - tol, 2.0)
        hi1 = np.where(b1, 1.0, -1.0)
        b2 = (l > 0) & (a < (1.0 + eps) * l + tol * (1.0 + l))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(l > 0, ap / np.where(l > 0, l, 1.0), 0.0)
        lo2 = np.where(b2, ratio - eps - tol, 2.0)
        hi2 = np.where(b2, ratio + eps + tol, -1.0)
        return lo1, hi1, lo2, hi2
