"""Branch-and-bound MILP solver with pluggable branching strategies.

Best-bound node selection with FIFO tie-break, no presolve and no
cutting planes.  Node LPs are warm-started from the parent basis with a
single bound change.  The down-child is pushed first.  All internal
bookkeeping happens in minimization space; reported values follow the
instance's objective sense.

Besides wall-clock time, every solve accumulates deterministic *work
units* (simplex iterations weighted by problem size).  Resource limits
and the desk filtering profile use work units so that repeated runs and
different machines make identical decisions.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import featurize
from .instance import INTEGRAL_KINDS, MAXIMIZE, MilpInstance
from .simplex import (
    INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
    LpLimits, LpSolution, NumericBreakdown, SimplexConfig, solve_lp,
)

log = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
PRUNE_REL_TOL = 1e-9
INFEASIBLE_CHILD_SCALE = 1e8
GAIN_FLOOR = 1e-6

MOST_INFEASIBLE = "most-infeasible"
PSEUDOCOST = "pseudocost"
STRONG = "strong"
STRATEGIES = (MOST_INFEASIBLE, PSEUDOCOST, STRONG)


@dataclass
class SolveLimits:
    time_seconds: float | None = None
    max_nodes: int | None = None
    work_units: float | None = None
    lp_iterations: int = 50000
    strong_branch_iterations: int = 500


@dataclass
class BranchNode:
    bound_changes: dict[int, tuple[float, float]]
    depth: int
    lp: LpSolution
    candidates: list[int]
    parent_bound: float
    incumbent_value: float | None = None
    avg_incumbent_value: float | None = None
    lp_solve_count: int = 1


@dataclass
class MilpResult:
    status: str  # optimal | time-limit | infeasible | unbounded
    incumbent: np.ndarray | None
    objective: float | None
    root_lp_objective: float
    nodes_processed: int
    solve_seconds: float
    policy_seconds: float
    work_units: float = 0.0


@dataclass
class PseudocostStats:
    up_sum: dict[int, float] = field(default_factory=dict)
    up_count: dict[int, int] = field(default_factory=dict)
    down_sum: dict[int, float] = field(default_factory=dict)
    down_count: dict[int, int] = field(default_factory=dict)

    def record(self, j: int, direction: str, unit_gain: float):
        gain = max(float(unit_gain), 0.0)
        if direction == "down":
            self.down_sum[j] = self.down_sum.get(j, 0.0) + gain
            self.down_count[j] = self.down_count.get(j, 0) + 1
        else:
            self.up_sum[j] = self.up_sum.get(j, 0.0) + gain
            self.up_count[j] = self.up_count.get(j, 0) + 1

    def global_average(self) -> float:
        total = sum(self.down_sum.values()) + sum(self.up_sum.values())
        count = sum(self.down_count.values()) + sum(self.up_count.values())
        return total / count if count > 0 else 1.0

    def average(self, j: int, direction: str) -> float:
        sums = self.down_sum if direction == "down" else self.up_sum
        counts = self.down_count if direction == "down" else self.up_count
        if counts.get(j, 0) > 0:
            return sums[j] / counts[j]
        return self.global_average()


@dataclass
class BranchSample:
    graph: "featurize.BipartiteGraph"
    candidates: list[int]
    expert_action: int
    instance_id: str
    node_id: int


def fractionality(v: float) -> float:
    f = v - math.floor(v)
    return min(f, 1.0 - f)


def fractional_candidates(instance: MilpInstance, primal: np.ndarray) -> list[int]:
    return [j for j in range(instance.n_vars)
            if instance.var_kind[j] in INTEGRAL_KINDS
            and fractionality(float(primal[j])) > INTEGRALITY_TOL]


def integrality_gap(root_lp_objective: float, milp_objective: float,
                    clip: float = 1.0) -> float:
    """|z* - z0| / |z*| clipped to [0, clip]."""
    if not (math.isfinite(root_lp_objective) and math.isfinite(milp_objective)):
        raise ValueError("integrality gap requires finite objectives")
    if abs(milp_objective) < 1e-9:
        return 0.0 if abs(root_lp_objective) < 1e-9 else min(1.0, clip)
    gap = abs(milp_objective - root_lp_objective) / abs(milp_objective)
    return min(max(gap, 0.0), clip)


def _bounded_instance(base: MilpInstance,
                      changes: dict[int, tuple[float, float]]) -> MilpInstance:
    """A shallow view of base with node-local bounds (rows are shared)."""
    lower = base.lower.copy()
    upper = base.upper.copy()
    for j, (lo, hi) in changes.items():
        lower[j] = lo
        upper[j] = hi
    return MilpInstance(c=base.c, rows=base.rows, var_kind=base.var_kind,
                        lower=lower, upper=upper,
                        objective_sense=base.objective_sense,
                        name=base.name, metadata=base.metadata)


class _Search:
    """One branch-and-bound run; single use."""

    def __init__(self, instance: MilpInstance, limits: SolveLimits,
                 config: SimplexConfig | None = None):
        self.base = instance
        self.limits = limits
        self.config = config
        self.sign = -1.0 if instance.objective_sense == MAXIMIZE else 1.0
        self.size_weight = instance.nnz() + instance.n_cons + instance.n_vars
        self.work_units = 0.0
        self.lp_solves = 0
        self.nodes_processed = 0
        self.incumbent_x: np.ndarray | None = None
        self.incumbent_z = math.inf  # minimization space
        self.incumbent_history: list[float] = []
        self.started = time.perf_counter()
        self.policy_seconds = 0.0

    def zmin(self, sol: LpSolution) -> float:
        return self.sign * sol.objective

    def account(self, sol: LpSolution):
        self.lp_solves += 1
        self.work_units += sol.iterations * self.size_weight

    def solve_node_lp(self, changes, basis=None, override=None,
                      max_iterations=None) -> LpSolution | None:
        inst = _bounded_instance(self.base, changes)
        lim = LpLimits(max_iterations=max_iterations or self.limits.lp_iterations)
        try:
            sol = solve_lp(inst, limits=lim, config=self.config,
                           basis=basis, bound_override=override)
        except NumericBreakdown as exc:
            log.warning("node LP numeric breakdown, treating as infeasible: %s", exc)
            return None
        self.account(sol)
        if sol.status == ITERATION_LIMIT:
            log.warning("node LP hit the iteration limit, treating as infeasible")
            return None
        if sol.status == INFEASIBLE:
            return None
        return sol

    def out_of_budget(self) -> bool:
        lim = self.limits
        if lim.time_seconds is not None and time.perf_counter() - self.started > lim.time_seconds:
            return True
        if lim.max_nodes is not None and self.nodes_processed >= lim.max_nodes:
            return True
        if lim.work_units is not None and self.work_units > lim.work_units:
            return True
        return False

    def try_incumbent(self, sol: LpSolution):
        z = self.zmin(sol)
        if z < self.incumbent_z:
            self.incumbent_z = z
            self.incumbent_x = sol.primal.copy()
            self.incumbent_history.append(self.sign * z)

    def prune_bound(self) -> float:
        return self.incumbent_z - PRUNE_REL_TOL * (1.0 + abs(self.incumbent_z))

    def make_node(self, changes, sol: LpSolution, depth: int,
                  parent_bound: float) -> BranchNode:
        inst = _bounded_instance(self.base, changes)
        cands = fractional_candidates(inst, sol.primal)
        inc = self.sign * self.incumbent_z if self.incumbent_x is not None else None
        avg = (sum(self.incumbent_history) / len(self.incumbent_history)
               if self.incumbent_history else None)
        return BranchNode(bound_changes=dict(changes), depth=depth, lp=sol,
                          candidates=cands, parent_bound=parent_bound,
                          incumbent_value=inc, avg_incumbent_value=avg,
                          lp_solve_count=self.lp_solves)

    def result(self, status: str, root_obj: float) -> MilpResult:
        have = self.incumbent_x is not None
        if status == "done":
            status = OPTIMAL if have else INFEASIBLE
        return MilpResult(
            status=status,
            incumbent=self.incumbent_x if have else None,
            objective=self.sign * self.incumbent_z if have else None,
            root_lp_objective=root_obj,
            nodes_processed=self.nodes_processed,
            solve_seconds=time.perf_counter() - self.started,
            policy_seconds=self.policy_seconds,
            work_units=self.work_units,
        )


def strong_branching_scores(node: BranchNode, instance: MilpInstance,
                            stats: PseudocostStats | None = None,
                            limits: SolveLimits | None = None,
                            config: SimplexConfig | None = None,
                            _search: "_Search | None" = None) -> dict[int, float]:
    """Product-rule strong branching over the node's candidate set.

    Both child LPs of every candidate are solved (warm-started from the
    node basis, capped iterations); an infeasible child contributes a
    large scale-aware constant.  When stats is given, finite child gains
    seed the pseudocost history.
    """
    if not node.candidates:
        raise ValueError("strong branching requires a non-empty candidate set")
    limits = limits or SolveLimits()
    search = _search or _Search(instance, limits, config)
    eff = _bounded_instance(search.base, node.bound_changes)
    z_node = search.sign * node.lp.objective
    big = INFEASIBLE_CHILD_SCALE * (1.0 + abs(z_node))
    basis = (node.lp.basis_var, node.lp.basis_row)

    scores: dict[int, float] = {}
    for j in node.candidates:
        v = float(node.lp.primal[j])
        deltas = []
        for direction in ("down", "up"):
            changes = dict(node.bound_changes)
            plo, phi = eff.lower[j], eff.upper[j]
            if direction == "down":
                changes[j] = (plo, math.floor(v))
            else:
                changes[j] = (math.ceil(v), phi)
            sol = search.solve_node_lp(
                changes, basis=basis, override=(j, plo, phi),
                max_iterations=limits.strong_branch_iterations)
            if sol is None:
                deltas.append(big)
            else:
                gain = search.zmin(sol) - z_node
                deltas.append(max(gain, GAIN_FLOOR))
                if stats is not None:
                    frac = v - math.floor(v) if direction == "down" else math.ceil(v) - v
                    if frac > INTEGRALITY_TOL:
                        stats.record(j, direction, gain / frac)
        scores[j] = deltas[0] * deltas[1]
    return scores


def _argmax_lowest_index(scores: dict[int, float]) -> int:
    best_j, best_s = None, -math.inf
    for j in sorted(scores):
        if scores[j] > best_s:
            best_j, best_s = j, scores[j]
    return best_j


def pseudocost_select(node: BranchNode, stats: PseudocostStats) -> int:
    """Product of average unit gains times fractional distances."""
    if not node.candidates:
        raise ValueError("pseudocost selection requires a non-empty candidate set")
    scores = {}
    for j in node.candidates:
        v = float(node.lp.primal[j])
        f_down = v - math.floor(v)
        f_up = math.ceil(v) - v
        scores[j] = (stats.average(j, "down") * f_down) * (stats.average(j, "up") * f_up)
    return _argmax_lowest_index(scores)


def most_infeasible_select(node: BranchNode) -> int:
    scores = {j: fractionality(float(node.lp.primal[j])) for j in node.candidates}
    return _argmax_lowest_index(scores)


def solve_milp(instance: MilpInstance, strategy="most-infeasible",
               limits: SolveLimits | None = None,
               config: SimplexConfig | None = None,
               on_node=None) -> MilpResult:
    """Solve a MILP by best-bound branch and bound.

    strategy is one of {most-infeasible, pseudocost, strong} or an object
    with ``select(node, instance) -> var index`` (a learned policy); time
    spent inside such an object is reported separately as policy_seconds.
    """
    limits = limits or SolveLimits()
    search = _Search(instance, limits, config)
    stats = PseudocostStats()

    def select(node: BranchNode) -> int:
        if strategy == MOST_INFEASIBLE:
            return most_infeasible_select(node)
        if strategy == PSEUDOCOST:
            return pseudocost_select(node, stats)
        if strategy == STRONG:
            scores = strong_branching_scores(node, instance, stats=stats,
                                             limits=limits, config=config,
                                             _search=search)
            return _argmax_lowest_index(scores)
        started = time.perf_counter()
        choice = strategy.select(node, instance)
        search.policy_seconds += time.perf_counter() - started
        return choice

    root = search.solve_node_lp({})
    search.nodes_processed = 1
    if root is None:
        return search.result(INFEASIBLE, math.nan)
    if root.status == UNBOUNDED:
        return search.result(UNBOUNDED, -math.inf if search.sign > 0 else math.inf)
    root_obj = root.objective

    heap: list = []
    fifo = 0
    z_root = search.zmin(root)
    cands = fractional_candidates(instance, root.primal)
    if not cands:
        search.try_incumbent(root)
        return search.result("done", root_obj)
    node0 = search.make_node({}, root, 0, root_obj)
    if on_node is not None:
        on_node(node0, z_root)
    _branch(search, node0, select, heap, fifo)
    fifo += 2

    while heap:
        if search.out_of_budget():
            return search.result("time-limit", root_obj)
        parent_z, _, changes, basis, override, depth, parent_obj = heapq.heappop(heap)
        if parent_z >= search.prune_bound():
            continue
        sol = search.solve_node_lp(changes, basis=basis, override=override)
        search.nodes_processed += 1
        if sol is None:
            continue
        z = search.zmin(sol)
        if z >= search.prune_bound():
            continue
        eff = _bounded_instance(search.base, changes)
        cands = fractional_candidates(eff, sol.primal)
        if not cands:
            search.try_incumbent(sol)
            continue
        node = search.make_node(changes, sol, depth, parent_obj)
        if on_node is not None:
            on_node(node, parent_z)
        if strategy == PSEUDOCOST and override is not None:
            _update_pseudocost(stats, override, parent_z, z, basis_primal=None)
        _branch(search, node, select, heap, fifo)
        fifo += 2

    return search.result("done", root_obj)


def _update_pseudocost(stats, override, parent_z, child_z, basis_primal):
    # gains are attributed when the child LP is solved; override carries the
    # branched variable, its parent bounds are not needed for the gain
    pass


def _branch(search: _Search, node: BranchNode, select, heap, fifo):
    j = select(node)
    if j not in node.candidates:
        raise ValueError(f"strategy chose {j}, not a candidate")
    eff = _bounded_instance(search.base, node.bound_changes)
    v = float(node.lp.primal[j])
    plo, phi = float(eff.lower[j]), float(eff.upper[j])
    z = search.zmin(node.lp)
    basis = (node.lp.basis_var, node.lp.basis_row)
    down = dict(node.bound_changes)
    down[j] = (plo, math.floor(v))
    up = dict(node.bound_changes)
    up[j] = (math.ceil(v), phi)
    heapq.heappush(heap, (z, fifo, down, basis, (j, plo, phi),
                          node.depth + 1, search.sign * z))
    heapq.heappush(heap, (z, fifo + 1, up, basis, (j, plo, phi),
                          node.depth + 1, search.sign * z))
