"""Bounded-variable revised simplex.

Rows are turned into equalities ``A x + s = b`` with one slack per row
(slack bounds ``[0, inf)`` for <=, ``(-inf, 0]`` for >=, ``[0, 0]`` for =),
so the basis statuses {lower, basic, upper, zero} fall out of the method
directly for both variables and rows.  Feasibility is reached with an
artificial-variable phase 1; an explicit basis inverse is maintained with
rank-1 updates and periodic refactorization.

Duals are reported as the objective change per unit of right-hand side
(``y = c_B B^-1``), which makes the dual of ``x >= 5`` under ``min x``
equal to +1.  Maximization is handled by negating the costs and flipping
objective, duals, and reduced costs on the way out.

Warm starts support the one-bound-change pattern used by branch and
bound: the parent basis stays feasible under the parent's bound for the
changed variable, a short auxiliary phase walks that variable into its
new bound, and phase 2 resumes from there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .instance import GE, LE, MAXIMIZE, MilpInstance

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

AT_LOWER = "lower"
BASIC = "basic"
AT_UPPER = "upper"
AT_ZERO = "zero"


class NumericBreakdown(RuntimeError):
    """A tiny pivot persisted after refactorization."""


@dataclass(frozen=True)
class SimplexConfig:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9          # relative dual feasibility tolerance
    pivot_tol: float = 1e-12
    refactor_every: int = 64
    stall_factor: int = 3          # Bland's rule after stall_factor*(n+m) stalls


DEFAULT_CONFIG = SimplexConfig()


@dataclass
class LpLimits:
    max_iterations: int = 50000


@dataclass
class LpSolution:
    status: str
    objective: float
    primal: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    basis_var: list[str]
    basis_row: list[str]
    iterations: int

    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


# internal status codes
_LOWER, _BASIC, _UPPER, _ZERO = 0, 1, 2, 3
_STATUS_NAME = {_LOWER: AT_LOWER, _BASIC: BASIC, _UPPER: AT_UPPER, _ZERO: AT_ZERO}
_STATUS_CODE = {v: k for k, v in _STATUS_NAME.items()}


class _Engine:
    """Simplex core over the slack-extended (and artificial-extended) columns."""

    def __init__(self, inst: MilpInstance, cfg: SimplexConfig):
        self.cfg = cfg
        n, m = inst.n_vars, inst.n_cons
        self.n = n
        self.m = m
        self.nm = n + m

        rows_i, cols_j, vals = [], [], []
        for i, row in enumerate(inst.rows):
            rows_i.extend([i] * len(row.idx))
            cols_j.extend(int(j) for j in row.idx)
            vals.extend(float(v) for v in row.coef)
        self.A = scipy.sparse.csc_matrix(
            (vals, (rows_i, cols_j)), shape=(m, n), dtype=np.float64)

        self.b = np.array([row.rhs for row in inst.rows], dtype=np.float64)

        self.lo = np.empty(self.nm)
        self.up = np.empty(self.nm)
        self.lo[:n] = inst.lower
        self.up[:n] = inst.upper
        for i, row in enumerate(inst.rows):
            if row.relation == LE:
                self.lo[n + i], self.up[n + i] = 0.0, math.inf
            elif row.relation == GE:
                self.lo[n + i], self.up[n + i] = -math.inf, 0.0
            else:
                self.lo[n + i], self.up[n + i] = 0.0, 0.0

        self.n_art = 0
        self.art_row = np.empty(0, dtype=np.int64)
        self.art_sign = np.empty(0)

        self.status = np.full(self.nm, _LOWER, dtype=np.int8)
        self.value = np.zeros(self.nm)
        self.basic = np.empty(0, dtype=np.int64)
        self.binv = np.empty((m, m))
        self.iterations = 0
        self.bland = False
        self._stalled = 0
        self._pivots_since_factor = 0

    def total_cols(self) -> int:
        return self.nm + self.n_art

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j < self.n:
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            return self.A.indices[lo:hi], self.A.data[lo:hi]
        if j < self.nm:
            return (np.array([j - self.n], dtype=np.int64), np.array([1.0]))
        k = j - self.nm
        return (self.art_row[k:k + 1], self.art_sign[k:k + 1])

    # -- setup ---------------------------------------------------------

    def cold_start(self):
        """Slack basis, with artificials for rows whose slack cannot absorb b."""
        n, m = self.n, self.m
        status = np.empty(self.nm, dtype=np.int8)
        value = np.zeros(self.nm)
        for j in range(n):
            if math.isfinite(self.lo[j]):
                value[j], status[j] = self.lo[j], _LOWER
            elif math.isfinite(self.up[j]):
                value[j], status[j] = self.up[j], _UPPER
            else:
                value[j], status[j] = 0.0, _ZERO

        resid = self.b - self.A @ value[:n]
        basic = np.empty(m, dtype=np.int64)
        art_row, art_sign, art_val = [], [], []
        for i in range(m):
            s = n + i
            if self.lo[s] - 1e-30 <= resid[i] <= self.up[s] + 1e-30:
                basic[i] = s
                status[s] = _BASIC
                value[s] = resid[i]
            else:
                v = min(max(resid[i], self.lo[s]), self.up[s])
                value[s] = v
                status[s] = _LOWER if v == self.lo[s] else _UPPER
                gap = resid[i] - v
                basic[i] = self.nm + len(art_row)
                art_row.append(i)
                art_sign.append(1.0 if gap > 0 else -1.0)
                art_val.append(abs(gap))

        self.n_art = len(art_row)
        self.art_row = np.array(art_row, dtype=np.int64)
        self.art_sign = np.array(art_sign)
        self.basic = basic
        self.status = np.concatenate([status, np.full(self.n_art, _BASIC, dtype=np.int8)])
        self.value = np.concatenate([value, np.array(art_val)])
        self.lo = np.concatenate([self.lo, np.zeros(self.n_art)])
        self.up = np.concatenate([self.up, np.full(self.n_art, math.inf)])
        self.refactorize()

    def pin_artificials(self):
        """After phase 1, artificials may not re-enter or move off zero."""
        if self.n_art:
            self.up[self.nm:] = 0.0

    def warm_start(self, var_status: list[str], row_status: list[str]) -> bool:
        """Install a basis from statuses; returns False if unusable."""
        n, m = self.n, self.m
        codes = np.empty(self.nm, dtype=np.int8)
        for j in range(n):
            codes[j] = _STATUS_CODE[var_status[j]]
        for i in range(m):
            codes[n + i] = _STATUS_CODE[row_status[i]]
        basic = np.where(codes == _BASIC)[0]
        if len(basic) != m:
            return False
        self.basic = basic.astype(np.int64)
        self.status = codes
        value = np.zeros(self.nm)
        nb = codes != _BASIC
        at_lo = nb & (codes == _LOWER)
        at_up = nb & (codes == _UPPER)
        value[at_lo] = np.where(np.isfinite(self.lo[at_lo]), self.lo[at_lo],
                                np.where(np.isfinite(self.up[at_lo]), self.up[at_lo], 0.0))
        value[at_up] = np.where(np.isfinite(self.up[at_up]), self.up[at_up],
                                np.where(np.isfinite(self.lo[at_up]), self.lo[at_up], 0.0))
        self.value = value
        try:
            self.refactorize()
        except NumericBreakdown:
            return False
        return True

    def refactorize(self):
        m = self.m
        bmat = np.zeros((m, m))
        for k in range(m):
            idx, val = self.column(int(self.basic[k]))
            bmat[idx, k] = val
        try:
            binv = scipy.linalg.solve(bmat, np.eye(m))
        except (scipy.linalg.LinAlgError, ValueError):
            raise NumericBreakdown("singular basis matrix")
        if not np.all(np.isfinite(binv)):
            raise NumericBreakdown("singular basis matrix")
        self.binv = binv
        self._pivots_since_factor = 0
        self.recompute_basic_values()

    def recompute_basic_values(self):
        nb_struct = self.status[:self.n] != _BASIC
        x_nb = np.where(nb_struct, self.value[:self.n], 0.0)
        rhs = self.b - self.A @ x_nb
        slack_vals = self.value[self.n:self.nm].copy()
        slack_vals[self.status[self.n:self.nm] == _BASIC] = 0.0
        rhs -= slack_vals
        for k in range(self.n_art):
            j = self.nm + k
            if self.status[j] != _BASIC and self.value[j] != 0.0:
                rhs[self.art_row[k]] -= self.art_sign[k] * self.value[j]
        self.value[self.basic] = self.binv @ rhs

    # -- pricing -------------------------------------------------------

    def duals(self, costs: np.ndarray) -> np.ndarray:
        return costs[self.basic] @ self.binv

    def reduced_costs(self, costs: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = costs.copy()
        d[:self.n] -= self.A.T @ y
        d[self.n:self.nm] -= y
        if self.n_art:
            d[self.nm:] -= y[self.art_row] * self.art_sign
        return d

    # -- main loop -----------------------------------------------------

    def run(self, costs: np.ndarray, max_iterations: int) -> str:
        """Minimize costs over the current system from the current basis."""
        cfg = self.cfg
        dual_tol = max(cfg.opt_tol * (1.0 + float(np.max(np.abs(costs)))), 1e-12)
        stall_limit = cfg.stall_factor * self.nm
        last_obj = math.inf
        fixed = self.lo == self.up

        while True:
            if self.iterations >= max_iterations:
                return ITERATION_LIMIT
            y = self.duals(costs)
            d = self.reduced_costs(costs, y)

            entering = self._choose_entering(d, dual_tol, fixed)
            if entering < 0:
                return OPTIMAL

            st = self.status[entering]
            direction = -1.0 if (st == _UPPER or (st == _ZERO and d[entering] > 0)) else 1.0

            idx, val = self.column(entering)
            w = self.binv[:, idx] @ val

            step, leave_pos, leave_to_upper = self._ratio_test(entering, direction, w)
            if step is None:
                return UNBOUNDED

            self.iterations += 1
            obj = float(costs @ self.value)
            if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                self._stalled = 0
            else:
                self._stalled += 1
                if self._stalled >= stall_limit:
                    self.bland = True
            last_obj = obj

            if leave_pos is None:
                # bound flip: entering walks to its opposite bound
                self.value[self.basic] -= direction * step * w
                self.value[entering] += direction * step
                self.status[entering] = _UPPER if direction > 0 else _LOWER
                continue

            self._pivot(entering, direction, step, w, leave_pos, leave_to_upper)

            if self._pivots_since_factor >= cfg.refactor_every:
                self.refactorize()

    def _choose_entering(self, d: np.ndarray, tol: float, fixed: np.ndarray) -> int:
        status = self.status
        eligible = ((status == _LOWER) & (d < -tol)) | \
                   ((status == _UPPER) & (d > tol)) | \
                   ((status == _ZERO) & (np.abs(d) > tol))
        eligible &= ~fixed
        cand = np.where(eligible)[0]
        if len(cand) == 0:
            return -1
        if self.bland:
            return int(cand[0])
        return int(cand[np.argmax(np.abs(d[cand]))])

    def _ratio_test(self, entering: int, direction: float, w: np.ndarray):
        """Returns (step, leaving position or None for a bound flip, hits_upper).

        step of None means the LP is unbounded along this direction.
        """
        cfg = self.cfg
        elo, eup = self.lo[entering], self.up[entering]
        flip = eup - elo if (math.isfinite(eup) and math.isfinite(elo)) else math.inf

        delta = -direction * w
        xb = self.value[self.basic]
        lob = self.lo[self.basic]
        upb = self.up[self.basic]

        t = np.full(self.m, math.inf)
        inc = delta > cfg.pivot_tol
        dec = delta < -cfg.pivot_tol
        inc_fin = inc & np.isfinite(upb)
        dec_fin = dec & np.isfinite(lob)
        t[inc_fin] = (upb[inc_fin] - xb[inc_fin]) / delta[inc_fin]
        t[dec_fin] = (lob[dec_fin] - xb[dec_fin]) / delta[dec_fin]
        np.maximum(t, 0.0, out=t)

        tmin = float(t.min(initial=math.inf))
        if flip < tmin - 1e-12:
            return flip, None, False
        if not math.isfinite(tmin):
            if math.isfinite(flip):
                return flip, None, False
            return None, None, False

        near = t <= tmin + 1e-12
        cand = np.where(near)[0]
        if self.bland:
            pos = int(cand[np.argmin(self.basic[cand])])
        else:
            pos = int(cand[np.argmax(np.abs(delta[cand]))])
        return tmin, pos, bool(delta[pos] > 0)

    def _pivot(self, entering, direction, step, w, leave_pos, leave_to_upper):
        wr = w[leave_pos]
        if abs(wr) < self.cfg.pivot_tol:
            self.refactorize()
            idx, val = self.column(entering)
            w = self.binv[:, idx] @ val
            wr = w[leave_pos]
            if abs(wr) < self.cfg.pivot_tol:
                raise NumericBreakdown(
                    f"pivot magnitude {abs(wr):.2e} persists after refactorization")

        leaving = int(self.basic[leave_pos])
        self.value[self.basic] -= direction * step * w
        enter_val = self.value[entering] + direction * step
        self.value[leaving] = self.up[leaving] if leave_to_upper else self.lo[leaving]
        self.status[leaving] = _UPPER if leave_to_upper else _LOWER
        self.basic[leave_pos] = entering
        self.status[entering] = _BASIC
        self.value[entering] = enter_val

        row = self.binv[leave_pos, :] / wr
        self.binv -= np.outer(w, row)
        self.binv[leave_pos, :] = row
        self._pivots_since_factor += 1

    # -- extraction ------------------------------------------------------

    def primal_infeasibility(self) -> float:
        xb = self.value[self.basic]
        viol_lo = np.where(np.isfinite(self.lo[self.basic]),
                           self.lo[self.basic] - xb, -math.inf)
        viol_up = np.where(np.isfinite(self.up[self.basic]),
                           xb - self.up[self.basic], -math.inf)
        return float(max(viol_lo.max(initial=0.0), viol_up.max(initial=0.0), 0.0))

    def statuses(self) -> tuple[list[str], list[str]]:
        var_status = [_STATUS_NAME[int(s)] for s in self.status[:self.n]]
        row_status = [_STATUS_NAME[int(s)] for s in self.status[self.n:self.nm]]
        return var_status, row_status


def _finish(engine: _Engine, costs: np.ndarray, status: str, sign: float) -> LpSolution:
    n, m = engine.n, engine.m
    x = engine.value[:n].copy()
    y = engine.duals(costs)[:m].copy()
    d = engine.reduced_costs(costs, y)[:n].copy()
    obj = float(costs[:n] @ x)
    if status == INFEASIBLE:
        obj = math.inf
    elif status == UNBOUNDED:
        obj = -math.inf
    var_status, row_status = engine.statuses()
    return LpSolution(
        status=status,
        objective=sign * obj,
        primal=x,
        duals=sign * y,
        reduced_costs=sign * d,
        basis_var=var_status,
        basis_row=row_status,
        iterations=engine.iterations,
    )


def _pad(costs: np.ndarray, engine: _Engine) -> np.ndarray:
    if engine.total_cols() == len(costs):
        return costs
    out = np.zeros(engine.total_cols())
    out[:len(costs)] = costs
    return out


def solve_lp(instance: MilpInstance,
             limits: LpLimits | None = None,
             config: SimplexConfig | None = None,
             basis: tuple[list[str], list[str]] | None = None,
             bound_override: tuple[int, float, float] | None = None) -> LpSolution:
    """Solve the LP relaxation of an instance (variable kinds are ignored).

    With ``basis`` and ``bound_override = (var, parent_lo, parent_hi)`` the
    solve warm-starts from a basis that was feasible under the parent's
    bounds for that one variable.
    """
    if instance.n_vars < 1:
        raise ValueError("instance must have at least one variable")
    limits = limits or LpLimits()
    cfg = config or DEFAULT_CONFIG
    sign = -1.0 if instance.objective_sense == MAXIMIZE else 1.0

    if np.any(instance.lower > instance.upper):
        return _trivially_infeasible(instance, sign)

    engine = _Engine(instance, cfg)
    base_costs = np.zeros(engine.nm)
    base_costs[:engine.n] = sign * instance.c

    warm = False
    if basis is not None and bound_override is not None:
        j, plo, phi = bound_override
        child_lo, child_hi = engine.lo[j], engine.up[j]
        engine.lo[j], engine.up[j] = plo, phi
        warm = engine.warm_start(*basis)
        if warm and engine.primal_infeasibility() > cfg.feas_tol:
            warm = False
        if warm:
            aux = _walk_bound(engine, j, child_lo, child_hi, limits)
            if aux == ITERATION_LIMIT:
                return _finish(engine, _pad(base_costs, engine), ITERATION_LIMIT, sign)
            if aux == INFEASIBLE:
                return _finish(engine, _pad(base_costs, engine), INFEASIBLE, sign)
            if aux == "cold":
                warm = False
        if not warm:
            engine.lo[j], engine.up[j] = child_lo, child_hi

    if not warm:
        engine.cold_start()
        if engine.n_art > 0:
            p1 = np.zeros(engine.total_cols())
            p1[engine.nm:] = 1.0
            status = engine.run(p1, limits.max_iterations)
            if status == ITERATION_LIMIT:
                return _finish(engine, _pad(base_costs, engine), ITERATION_LIMIT, sign)
            art_sum = float(np.sum(np.abs(engine.value[engine.nm:])))
            scale = 1.0 + float(np.max(np.abs(engine.b), initial=0.0))
            if status != OPTIMAL or art_sum > cfg.feas_tol * scale:
                return _finish(engine, _pad(base_costs, engine), INFEASIBLE, sign)
            engine.pin_artificials()

    costs = _pad(base_costs, engine)
    status = engine.run(costs, limits.max_iterations)
    if status == OPTIMAL:
        engine.refactorize()  # tighten residuals before reporting
    return _finish(engine, costs, status, sign)


def _walk_bound(engine: _Engine, j: int, child_lo: float, child_hi: float,
                limits: LpLimits) -> str:
    """Drive variable j inside [child_lo, child_hi], then install those bounds."""
    cfg = engine.cfg
    v = float(engine.value[j])

    if engine.status[j] != _BASIC:
        if child_lo - cfg.feas_tol <= v <= child_hi + cfg.feas_tol:
            engine.lo[j], engine.up[j] = child_lo, child_hi
            _snap_nonbasic(engine, j)
            return OPTIMAL
        return "cold"

    if v > child_hi + cfg.feas_tol:
        engine.lo[j], engine.up[j] = child_hi, max(v, child_hi)
        aux = np.zeros(engine.total_cols())
        aux[j] = 1.0
        status = engine.run(aux, limits.max_iterations)
        if status == ITERATION_LIMIT:
            return status
        if engine.value[j] > child_hi + cfg.feas_tol:
            return INFEASIBLE
    elif v < child_lo - cfg.feas_tol:
        engine.lo[j], engine.up[j] = min(v, child_lo), child_lo
        aux = np.zeros(engine.total_cols())
        aux[j] = -1.0
        status = engine.run(aux, limits.max_iterations)
        if status == ITERATION_LIMIT:
            return status
        if engine.value[j] < child_lo - cfg.feas_tol:
            return INFEASIBLE

    engine.lo[j], engine.up[j] = child_lo, child_hi
    if engine.status[j] != _BASIC:
        _snap_nonbasic(engine, j)
    return OPTIMAL


def _snap_nonbasic(engine: _Engine, j: int):
    """Align a nonbasic variable's status/value with its (new) bounds."""
    v = engine.value[j]
    lo, up = engine.lo[j], engine.up[j]
    if math.isfinite(lo) and abs(v - lo) <= abs(v - up):
        engine.value[j] = lo
        engine.status[j] = _LOWER
    elif math.isfinite(up):
        engine.value[j] = up
        engine.status[j] = _UPPER
    else:
        engine.status[j] = _ZERO
    engine.recompute_basic_values()


def _trivially_infeasible(instance: MilpInstance, sign: float) -> LpSolution:
    n, m = instance.n_vars, instance.n_cons
    return LpSolution(
        status=INFEASIBLE,
        objective=sign * math.inf,
        primal=np.zeros(n),
        duals=np.zeros(m),
        reduced_costs=np.zeros(n),
        basis_var=[AT_LOWER] * n,
        basis_row=[BASIC] * m,
        iterations=0,
    )


def dual_objective(instance: MilpInstance, sol: LpSolution) -> float:
    """b'y plus reduced-cost bound terms; equals the primal objective at optimality."""
    sign = -1.0 if instance.objective_sense == MAXIMIZE else 1.0
    y = sign * sol.duals
    total = float(np.array([r.rhs for r in instance.rows]) @ y) if instance.n_cons else 0.0
    d = sign * sol.reduced_costs
    for j in range(instance.n_vars):
        if sol.basis_var[j] == AT_LOWER and math.isfinite(instance.lower[j]):
            total += d[j] * instance.lower[j]
        elif sol.basis_var[j] == AT_UPPER and math.isfinite(instance.upper[j]):
            total += d[j] * instance.upper[j]
    return sign * total
