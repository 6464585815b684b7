"""Approximation-ratio functions of the KNN reductions.

Phi(c) bounds the vanilla radius rule and Psi(c) the mid-range sum rule for robust k-Means
when every optimal cluster holds at least c*z points; zeta(c) bounds the mid-range rule for
robust k-Median. Phi and Psi have no closed form: each is a scaled square of the unique root
x* > 1 of a quartic, found here by bisection.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .types import ContractViolation

DEFAULT_TOL = 1e-12
BRACKET = (1.0 + 1e-9, 100.0)
# both reductions are 3-approximate for robust k-Center
KCENTER_RATIO = 3.0


class RootFindingError(RuntimeError):
    pass


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 500,
) -> float:
    """Bracketed bisection until |f(x)| <= tol."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo < 0) == (f_hi < 0):
        raise RootFindingError(f"No sign change on [{lo}, {hi}]: f={f_lo!r}, {f_hi!r}.")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            return mid
        if mid in (lo, hi):
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda x: abs(f(x)))
    if abs(f(best)) <= tol:
        return best
    raise RootFindingError(
        f"Bisection stalled at x={best!r} with residual {f(best)!r} > tol={tol!r}."
    )


def _quartic(a: float, b: float, x: float) -> float:
    return (a * x * x - b) * (x - 1.0) ** 2 - 2.0 * x + 1.0


def _coefficients(t: float) -> tuple[float, float]:
    return (1.0 + math.sqrt(t)) ** 2, t


def phi_quartic(c: float, x: float) -> float:
    a, b = _coefficients((c - 1.0) / 2.0)
    return _quartic(a, b, x)


def psi_quartic(c: float, x: float) -> float:
    a, b = _coefficients(c - 1.0)
    return _quartic(a, b, x)


def _solve(t: float, tol: float) -> tuple[float, float]:
    a, b = _coefficients(t)
    root = bisect_root(lambda x: _quartic(a, b, x), *BRACKET, tol=tol)
    return a / b * root * root, root


def _check(c: float, tol: float) -> None:
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")
    if not tol > 0:
        raise ContractViolation(f"tol={tol} must be > 0.")


def solve_phi(c: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(Phi(c), x*) for the vanilla radius rule."""
    _check(c, tol)
    return _solve((c - 1.0) / 2.0, tol)


def solve_psi(c: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(Psi(c), x*) for the mid-range sum rule. Equals Phi(2c - 1)."""
    _check(c, tol)
    return _solve(c - 1.0, tol)


def zeta_kmedian(c: float) -> float:
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")
    return max((2 * c - 1 + math.sqrt(4 * c + 1)) / (2 * (c - 1)), (c + 1) / (c - 1))


@dataclass(frozen=True)
class RatioRow:
    c: float
    phi: float
    psi: float
    zeta: float
    root_phi: float
    root_psi: float


@dataclass(frozen=True)
class RatioTable:
    rows: list[RatioRow] = field(default_factory=list)
    tolerance: float = DEFAULT_TOL

    COLUMNS = ("c", "phi", "psi", "zeta", "root_phi", "root_psi")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([f"{getattr(r, col):.10g}" for col in self.COLUMNS])
        return buf.getvalue()


def ratio_table(cs: Sequence[float], tol: float = DEFAULT_TOL) -> RatioTable:
    rows = []
    for c in cs:
        phi, root_phi = solve_phi(c, tol)
        psi, root_psi = solve_psi(c, tol)
        rows.append(RatioRow(c=c, phi=phi, psi=psi, zeta=zeta_kmedian(c), root_phi=root_phi, root_psi=root_psi))
    return RatioTable(rows=rows, tolerance=tol)
