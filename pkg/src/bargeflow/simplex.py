"""Bounded-variable revised simplex solver.

Solves LPs of the form

    min c'x  s.t.  A x {<=, =, >=} b,  lower <= x <= upper

with a two-phase revised simplex: a composite phase-1 that drives bound
violations of the basic variables to zero (no artificial columns, no big-M),
followed by a standard phase-2 with Devex-style pricing and a Bland fallback
after a configurable streak of degenerate pivots.

The solver exposes row duals and reduced costs (certificates for optimality),
a Farkas-type dual vector on infeasible problems, and an improving ray on
unbounded ones.  All tie-breaks are by index, so re-solving the same LP
reproduces the pivot path and the result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalFailure(RuntimeError):
    """Raised when factorization retries cannot stabilize the basis."""


_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE = 3


@dataclass
class StandardFormLP:
    """Algebraic LP container: sparse rows, senses, and variable bounds."""

    c: np.ndarray              # (n,) objective
    A: sp.csr_matrix           # (m, n) constraint matrix
    senses: np.ndarray         # (m,) of 'L' (<=), 'E' (=), 'G' (>=)
    b: np.ndarray              # (m,) right-hand side
    lower: np.ndarray          # (n,) lower bounds (-inf allowed)
    upper: np.ndarray          # (n,) upper bounds (+inf allowed)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        if not sp.issparse(self.A):
            self.A = sp.csr_matrix(np.atleast_2d(np.asarray(self.A, dtype=float)))
        else:
            self.A = self.A.tocsr()
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,) or self.senses.shape != (m,):
            raise ValueError("inconsistent LP dimensions")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("inconsistent bound dimensions")
        if np.any(self.lower > self.upper + 1e-12):
            raise ValueError("lower bound exceeds upper bound")
        bad = set(self.senses.tolist()) - {"L", "E", "G"}
        if bad:
            raise ValueError(f"unknown row senses: {sorted(bad)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None = None            # primal values (structural vars)
    duals: np.ndarray | None = None        # one multiplier per row
    reduced_costs: np.ndarray | None = None
    objective: float | None = None
    farkas: np.ndarray | None = None       # dual infeasibility certificate
    ray: np.ndarray | None = None          # improving direction when unbounded
    iterations: int = 0
    basis_status: np.ndarray | None = None  # warm-start handle (internal layout)


@dataclass
class SimplexOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    zero_tol: float = 1e-11
    refactor_every: int = 100
    bland_after: int = 50          # degenerate-pivot streak before Bland's rule
    max_iters: int = 200_000
    dense_rows_cutoff: int = 200   # dense LU below, sparse LU above


class _BasisFactor:
    """LU factors of the basis plus a product-form eta chain."""

    def __init__(self, A_csc: sp.csc_matrix, basis: np.ndarray, dense_cutoff: int):
        self.m = len(basis)
        self.dense = self.m <= dense_cutoff
        B = A_csc[:, basis]
        if self.dense:
            lu, piv = scipy.linalg.lu_factor(B.toarray(), check_finite=False)
            if self.m and np.min(np.abs(np.diag(lu))) < 1e-12:
                raise np.linalg.LinAlgError("singular basis")
            self._lu = (lu, piv)
        else:
            self._splu = splu(B.tocsc(), permc_spec="COLAMD")
            if np.min(np.abs(self._splu.U.diagonal())) < 1e-12:
                raise np.linalg.LinAlgError("singular basis")
        self.etas: list[tuple[int, np.ndarray]] = []

    def _base_ftran(self, a: np.ndarray) -> np.ndarray:
        if self.dense:
            return scipy.linalg.lu_solve(self._lu, a, check_finite=False)
        return self._splu.solve(a)

    def _base_btran(self, v: np.ndarray) -> np.ndarray:
        if self.dense:
            return scipy.linalg.lu_solve(self._lu, v, trans=1, check_finite=False)
        return self._splu.solve(v, trans="T")

    def ftran(self, a: np.ndarray) -> np.ndarray:
        z = self._base_ftran(np.asarray(a, dtype=float))
        for r, w in self.etas:
            zr = z[r] / w[r]
            if zr != 0.0:
                z = z - zr * w
            z[r] = zr
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        y = np.array(v, dtype=float, copy=True)
        for r, w in reversed(self.etas):
            y[r] = (y[r] * (1.0 + w[r]) - w @ y) / w[r]
        return self._base_btran(y)

    def push_eta(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w.copy()))


class _Simplex:
    def __init__(self, lp: StandardFormLP, opts: SimplexOptions):
        self.lp = lp
        self.opts = opts
        m, n = lp.shape
        self.m, self.n = m, n
        self.N = n + m  # structural + slack columns

        # Row senses fold into slack bounds: Ax + s = b.
        slack_lower = np.where(lp.senses == "G", -np.inf, 0.0)
        slack_upper = np.where(lp.senses == "L", np.inf, 0.0)
        self.lower = np.concatenate([lp.lower, slack_lower])
        self.upper = np.concatenate([lp.upper, slack_upper])
        self.c = np.concatenate([lp.c, np.zeros(m)])
        self.A = sp.hstack([lp.A, sp.identity(m, format="csr")], format="csc")
        self.b = lp.b
        self.fixed = self.upper - self.lower <= 0.0

        self.vstat = np.empty(self.N, dtype=np.int8)
        self.values = np.zeros(self.N)
        self.basis = np.arange(n, n + m)
        self.factor: _BasisFactor | None = None
        self.devex = np.ones(self.N)
        self.iterations = 0
        self.degen_streak = 0
        self.bland = False
        self._refactor_fails = 0

    # -- setup ----------------------------------------------------------

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lower[j]):
            return _AT_LOWER
        if np.isfinite(self.upper[j]):
            return _AT_UPPER
        return _FREE

    def _install_slack_basis(self) -> None:
        self.basis = np.arange(self.n, self.N)
        for j in range(self.n):
            self.vstat[j] = self._default_status(j)
        self.vstat[self.n:] = _BASIC

    def _try_warm_basis(self, warm: np.ndarray | None) -> bool:
        if warm is None or len(warm) != self.N:
            return False
        basic = np.flatnonzero(warm == _BASIC)
        if len(basic) != self.m:
            return False
        self.basis = basic.copy()
        self.vstat = warm.astype(np.int8).copy()
        # Nonbasic statuses must point at finite bounds of *this* LP.
        for j in np.flatnonzero(self.vstat != _BASIC):
            s = self.vstat[j]
            if s == _AT_LOWER and not np.isfinite(self.lower[j]):
                self.vstat[j] = self._default_status(j)
            elif s == _AT_UPPER and not np.isfinite(self.upper[j]):
                self.vstat[j] = self._default_status(j)
        try:
            self.factor = _BasisFactor(self.A, self.basis, self.opts.dense_rows_cutoff)
        except (np.linalg.LinAlgError, RuntimeError):
            return False
        return True

    def _refactorize(self) -> None:
        try:
            self.factor = _BasisFactor(self.A, self.basis, self.opts.dense_rows_cutoff)
            self._refactor_fails = 0
        except (np.linalg.LinAlgError, RuntimeError):
            self._refactor_fails += 1
            if self._refactor_fails > 2:
                raise NumericalFailure("basis factorization failed repeatedly")
            self._install_slack_basis()
            self.factor = _BasisFactor(self.A, self.basis, self.opts.dense_rows_cutoff)
        self._recompute_basics()

    def _recompute_basics(self) -> None:
        nonbasic = self.vstat != _BASIC
        vals = np.zeros(self.N)
        at_lo = nonbasic & (self.vstat == _AT_LOWER)
        at_up = nonbasic & (self.vstat == _AT_UPPER)
        vals[at_lo] = self.lower[at_lo]
        vals[at_up] = self.upper[at_up]
        rhs = self.b - self.A @ vals
        vals[self.basis] = self.factor.ftran(rhs)
        self.values = vals

    def _dense_col(self, q: int) -> np.ndarray:
        col = np.zeros(self.m)
        lo, hi = self.A.indptr[q], self.A.indptr[q + 1]
        col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return col

    # -- pricing --------------------------------------------------------

    def _phase1_gradient(self) -> np.ndarray:
        xb = self.values[self.basis]
        lo = self.lower[self.basis]
        hi = self.upper[self.basis]
        g = np.zeros(self.m)
        g[xb < lo - self.opts.feas_tol] = -1.0
        g[xb > hi + self.opts.feas_tol] = 1.0
        return g

    def _infeasibility(self) -> float:
        xb = self.values[self.basis]
        lo = self.lower[self.basis]
        hi = self.upper[self.basis]
        return float(np.sum(np.maximum(lo - xb, 0.0)) + np.sum(np.maximum(xb - hi, 0.0)))

    def _reduced_costs(self, phase1: bool) -> tuple[np.ndarray, np.ndarray]:
        if phase1:
            gb = self._phase1_gradient()
            y = self.factor.btran(gb)
            d = -(self.A.T @ y)
        else:
            y = self.factor.btran(self.c[self.basis])
            d = self.c - self.A.T @ y
        return d, y

    def _eligible(self, d: np.ndarray) -> np.ndarray:
        tol = self.opts.opt_tol
        lo_ok = (self.vstat == _AT_LOWER) & ~self.fixed & (d < -tol)
        up_ok = (self.vstat == _AT_UPPER) & ~self.fixed & (d > tol)
        fr_ok = (self.vstat == _FREE) & (np.abs(d) > tol)
        return np.flatnonzero(lo_ok | up_ok | fr_ok)

    def _choose_entering(self, d: np.ndarray, cands: np.ndarray) -> int:
        if self.bland:
            return int(cands[0])
        score = d[cands] ** 2 / self.devex[cands]
        return int(cands[int(np.argmax(score))])

    # -- ratio tests ----------------------------------------------------

    def _pick_leaving(self, t: np.ndarray, t_min: float, delta: np.ndarray) -> int:
        near = np.flatnonzero(t <= t_min + 1e-12)
        if self.bland:
            return int(near[int(np.argmin(self.basis[near]))])
        return int(near[int(np.argmax(np.abs(delta[near])))])

    def _ratio_phase2(self, q: int, direction: float, w: np.ndarray):
        """Returns (step, leaving_row_or_None, bound) or None when unbounded."""
        ztol = self.opts.zero_tol
        xb = self.values[self.basis]
        lo = self.lower[self.basis]
        hi = self.upper[self.basis]
        delta = -direction * w  # basic movement per unit step of x_q

        t = np.full(self.m, np.inf)
        sel = (delta > ztol) & np.isfinite(hi)
        t[sel] = (hi[sel] - xb[sel]) / delta[sel]
        sel = (delta < -ztol) & np.isfinite(lo)
        t[sel] = (xb[sel] - lo[sel]) / (-delta[sel])
        np.maximum(t, 0.0, out=t)

        t_basic = float(t.min()) if self.m else np.inf
        t_flip = float(self.upper[q] - self.lower[q])
        if not np.isfinite(t_basic):
            if np.isfinite(t_flip):
                return (t_flip, None, None)
            return None
        if np.isfinite(t_flip) and t_flip < t_basic - 1e-12:
            return (t_flip, None, None)
        r = self._pick_leaving(t, t_basic, delta)
        bound = _AT_UPPER if delta[r] > 0 else _AT_LOWER
        return (float(max(t[r], 0.0)), r, bound)

    def _ratio_phase1(self, q: int, direction: float, w: np.ndarray):
        ztol = self.opts.zero_tol
        ftol = self.opts.feas_tol
        xb = self.values[self.basis]
        lo = self.lower[self.basis]
        hi = self.upper[self.basis]
        delta = -direction * w

        below = xb < lo - ftol
        above = xb > hi + ftol
        inb = ~below & ~above
        t = np.full(self.m, np.inf)

        # Infeasible basics block where they regain their violated bound;
        # feasible basics block at whichever bound they approach.
        sel = below & (delta > ztol)
        t[sel] = (lo[sel] - xb[sel]) / delta[sel]
        sel = above & (delta < -ztol)
        t[sel] = (xb[sel] - hi[sel]) / (-delta[sel])
        sel = inb & (delta > ztol) & np.isfinite(hi)
        t[sel] = (hi[sel] - xb[sel]) / delta[sel]
        sel = inb & (delta < -ztol) & np.isfinite(lo)
        t[sel] = (xb[sel] - lo[sel]) / (-delta[sel])
        np.maximum(t, 0.0, out=t)

        t_basic = float(t.min()) if self.m else np.inf
        t_flip = float(self.upper[q] - self.lower[q])
        if not np.isfinite(t_basic):
            if np.isfinite(t_flip):
                return (t_flip, None, None)
            return None
        if np.isfinite(t_flip) and t_flip < t_basic - 1e-12:
            return (t_flip, None, None)
        r = self._pick_leaving(t, t_basic, delta)
        if below[r] or (inb[r] and delta[r] < 0):
            bound = _AT_LOWER
        else:
            bound = _AT_UPPER
        return (float(max(t[r], 0.0)), r, bound)

    # -- pivot ----------------------------------------------------------

    def _update_devex(self, q: int, r: int, w: np.ndarray) -> None:
        alpha_q = w[r]
        if abs(alpha_q) < self.opts.zero_tol:
            return
        e = np.zeros(self.m)
        e[r] = 1.0
        beta = self.factor.btran(e)
        alpha = self.A.T @ beta
        ref = self.devex[q]
        cand = (alpha / alpha_q) ** 2 * ref
        nonbasic = self.vstat != _BASIC
        np.maximum(self.devex, np.where(nonbasic, cand, self.devex), out=self.devex)
        self.devex[self.basis[r]] = max(ref / alpha_q**2, 1.0)

    def _pivot(self, q: int, direction: float, t: float, r: int | None,
               bound: int | None, w: np.ndarray) -> None:
        self.values[self.basis] -= direction * t * w
        if r is None:
            # Bound flip: q travels to its opposite bound, basis unchanged.
            self.vstat[q] = _AT_UPPER if self.vstat[q] == _AT_LOWER else _AT_LOWER
            self.values[q] = self.upper[q] if self.vstat[q] == _AT_UPPER else self.lower[q]
            return
        if not self.bland:
            self._update_devex(q, r, w)
        leaving = self.basis[r]
        self.values[q] = self.values[q] + direction * t
        self.vstat[leaving] = bound
        self.values[leaving] = self.lower[leaving] if bound == _AT_LOWER else self.upper[leaving]
        self.basis[r] = q
        self.vstat[q] = _BASIC
        self.factor.push_eta(r, w)
        if len(self.factor.etas) >= self.opts.refactor_every:
            self._refactorize()

    # -- main loop ------------------------------------------------------

    def solve(self, warm: np.ndarray | None = None) -> LpResult:
        if not self._try_warm_basis(warm):
            self._install_slack_basis()
            self.factor = _BasisFactor(self.A, self.basis, self.opts.dense_rows_cutoff)
        self._recompute_basics()

        phase1 = self._infeasibility() > self.opts.feas_tol
        self.devex[:] = 1.0

        while True:
            self.iterations += 1
            if self.iterations > self.opts.max_iters:
                raise NumericalFailure("iteration limit exceeded")

            if phase1 and self._infeasibility() <= self.opts.feas_tol:
                phase1 = False
                self.devex[:] = 1.0
                self.bland = False
                self.degen_streak = 0

            d, y = self._reduced_costs(phase1)
            cands = self._eligible(d)
            if len(cands) == 0:
                if phase1:
                    return self._infeasible_result(y)
                return self._optimal_result()

            q = self._choose_entering(d, cands)
            if self.vstat[q] == _AT_UPPER:
                direction = -1.0
            elif self.vstat[q] == _AT_LOWER:
                direction = 1.0
            else:
                direction = 1.0 if d[q] < 0 else -1.0

            w = self.factor.ftran(self._dense_col(q))
            w[np.abs(w) < self.opts.zero_tol] = 0.0

            res = self._ratio_phase1(q, direction, w) if phase1 \
                else self._ratio_phase2(q, direction, w)
            if res is not None and res[1] is not None and abs(w[res[1]]) < 1e-9 \
                    and self.factor.etas:
                # Tiny pivot element: refresh the factors and retry once.
                self._refactorize()
                w = self.factor.ftran(self._dense_col(q))
                w[np.abs(w) < self.opts.zero_tol] = 0.0
                res = self._ratio_phase1(q, direction, w) if phase1 \
                    else self._ratio_phase2(q, direction, w)
            if res is None:
                if phase1:
                    raise NumericalFailure("phase-1 ratio test found no blocking bound")
                return self._unbounded_result(q, direction, w)
            t, r, bound = res
            if r is not None and abs(w[r]) < 1e-11:
                raise NumericalFailure("pivot element below tolerance")

            if t <= 1e-10:
                self.degen_streak += 1
                if self.degen_streak > self.opts.bland_after:
                    self.bland = True
            else:
                self.degen_streak = 0
                self.bland = False

            self._pivot(q, direction, t, r, bound, w)

    # -- results --------------------------------------------------------

    def _optimal_result(self) -> LpResult:
        y = self.factor.btran(self.c[self.basis])
        d = self.c - self.A.T @ y
        x = self.values[: self.n].copy()
        obj = float(self.lp.c @ x)
        return LpResult(
            status=LpStatus.OPTIMAL,
            x=x,
            duals=np.asarray(y, dtype=float).copy(),
            reduced_costs=d[: self.n].copy(),
            objective=obj,
            iterations=self.iterations,
            basis_status=self.vstat.copy(),
        )

    def _infeasible_result(self, y: np.ndarray) -> LpResult:
        # y certifies: sup over the bound box of y'Az stays below y'b.
        return LpResult(
            status=LpStatus.INFEASIBLE,
            farkas=np.asarray(y, dtype=float).copy(),
            iterations=self.iterations,
            basis_status=self.vstat.copy(),
        )

    def _unbounded_result(self, q: int, direction: float, w: np.ndarray) -> LpResult:
        ray = np.zeros(self.N)
        ray[q] = direction
        ray[self.basis] -= direction * w
        return LpResult(
            status=LpStatus.UNBOUNDED,
            x=self.values[: self.n].copy(),
            ray=ray[: self.n].copy(),
            iterations=self.iterations,
            basis_status=self.vstat.copy(),
        )


def solve_lp(lp: StandardFormLP, *, warm_status: np.ndarray | None = None,
             opts: SimplexOptions | None = None) -> LpResult:
    """Solve an LP; returns status, primal/dual values, and certificates.

    `warm_status` accepts the `basis_status` of a previous result for an LP
    with the same shape (typically the same LP after a bound or rhs change);
    an unusable warm basis silently falls back to the all-slack start.
    """
    solver = _Simplex(lp, opts or SimplexOptions())
    return solver.solve(warm_status)


def dual_objective(lp: StandardFormLP, result: LpResult) -> float:
    """Value of the dual solution: b'y plus reduced costs times active bounds.

    At optimality this equals the primal objective (strong duality); the
    residual is the certificate-quality check.
    """
    if result.status != LpStatus.OPTIMAL:
        raise ValueError("dual objective requires an optimal result")
    if result.basis_status is None:
        raise ValueError("result carries no basis information")
    n = lp.shape[1]
    stat = result.basis_status[:n]
    d = result.reduced_costs
    val = float(lp.b @ result.duals)
    at_lo = (stat == _AT_LOWER) & np.isfinite(lp.lower)
    at_up = (stat == _AT_UPPER) & np.isfinite(lp.upper)
    val += float(d[at_lo] @ lp.lower[at_lo])
    val += float(d[at_up] @ lp.upper[at_up])
    return val
