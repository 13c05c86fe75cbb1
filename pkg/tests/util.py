"""Shared helpers: small instance builders and brute-force oracles."""

from __future__ import annotations

import itertools
import math

import numpy as np

from milplab.instance import (
    BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MAXIMIZE, MINIMIZE,
    MilpInstance, Row,
)


def build(c, rows, kinds=None, lower=None, upper=None, sense=MINIMIZE, name=""):
    """rows: list of (dict {j: coef}, relation, rhs)."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    row_objs = []
    for coefs, rel, rhs in rows:
        idx = sorted(coefs)
        row_objs.append(Row(np.array(idx, dtype=np.int64),
                            np.array([coefs[j] for j in idx], dtype=float),
                            rel, float(rhs)))
    kinds = list(kinds) if kinds is not None else [CONTINUOUS] * n
    lower = np.asarray(lower, dtype=float) if lower is not None else np.zeros(n)
    upper = (np.asarray(upper, dtype=float) if upper is not None
             else np.full(n, math.inf))
    return MilpInstance(c=c, rows=row_objs, var_kind=kinds, lower=lower,
                        upper=upper, objective_sense=sense, name=name)


def row_feasible(inst, x, tol=1e-7):
    for row in inst.rows:
        act = row.activity(np.asarray(x, dtype=float))
        if row.relation == LE and act > row.rhs + tol:
            return False
        if row.relation == GE and act < row.rhs - tol:
            return False
        if row.relation == EQ and abs(act - row.rhs) > tol:
            return False
    return True


def brute_force_binary(inst):
    """Exhaustive optimum over all 0/1 assignments (all vars binary).

    Returns (objective, x) or (None, None) when infeasible.
    """
    n = inst.n_vars
    best_obj, best_x = None, None
    sign = -1.0 if inst.objective_sense == MAXIMIZE else 1.0
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if np.any(x < inst.lower - 1e-9) or np.any(x > inst.upper + 1e-9):
            continue
        if not row_feasible(inst, x, tol=1e-9):
            continue
        obj = float(inst.c @ x)
        if best_obj is None or sign * obj < sign * best_obj:
            best_obj, best_x = obj, x
    return best_obj, best_x


def enumerate_lp_vertices(inst):
    """Brute-force LP optimum by enumerating basic solutions.

    Considers every choice of n active constraints among rows (as
    equalities) and bounds.  Only sane for a handful of variables.
    Returns (status, objective) with status in {optimal, infeasible,
    unbounded-or-optimal-at-vertex}; unboundedness is not detected, so
    use on problems known to be bounded.
    """
    n = inst.n_vars
    cons = []
    for row in inst.rows:
        a = np.zeros(n)
        a[row.idx] = row.coef
        cons.append((a, row.rhs))
    for j in range(n):
        if math.isfinite(inst.lower[j]):
            e = np.zeros(n)
            e[j] = 1.0
            cons.append((e, inst.lower[j]))
        if math.isfinite(inst.upper[j]):
            e = np.zeros(n)
            e[j] = 1.0
            cons.append((e, inst.upper[j]))

    sign = -1.0 if inst.objective_sense == MAXIMIZE else 1.0
    best = None
    feasible_point = False
    for combo in itertools.combinations(range(len(cons)), n):
        amat = np.array([cons[k][0] for k in combo])
        bvec = np.array([cons[k][1] for k in combo])
        if abs(np.linalg.det(amat)) < 1e-10:
            continue
        x = np.linalg.solve(amat, bvec)
        if np.any(x < inst.lower - 1e-8) or np.any(x > inst.upper + 1e-8):
            continue
        if not row_feasible(inst, x, tol=1e-8):
            continue
        feasible_point = True
        obj = float(inst.c @ x)
        if best is None or sign * obj < sign * best:
            best = obj
    if not feasible_point:
        return "infeasible", None
    return "optimal", best
