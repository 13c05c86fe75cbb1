"""Canonical MILP instance model.

An instance is ``min/max c'x`` subject to sparse linear rows with a
relation in {<=, >=, =}, variable kind markers, and per-variable bounds.
Identity is index based; any names read from a file are kept in
``metadata`` only.  Instances are treated as immutable after
construction and are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BINARY = "binary"
INTEGER = "integer"
IMPLIED_INTEGER = "implied_integer"
CONTINUOUS = "continuous"
VAR_KINDS = (BINARY, INTEGER, IMPLIED_INTEGER, CONTINUOUS)
INTEGRAL_KINDS = (BINARY, INTEGER)

LE, GE, EQ = "<=", ">=", "="
RELATIONS = (LE, GE, EQ)

MINIMIZE = "minimize"
MAXIMIZE = "maximize"


@dataclass
class Row:
    """One linear constraint: sparse coefficients, relation, right-hand side."""

    idx: np.ndarray
    coef: np.ndarray
    relation: str
    rhs: float

    def __post_init__(self):
        self.idx = np.asarray(self.idx, dtype=np.int64)
        self.coef = np.asarray(self.coef, dtype=np.float64)

    def activity(self, x: np.ndarray) -> float:
        return float(self.coef @ x[self.idx])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coef))

    def copy(self) -> "Row":
        return Row(self.idx.copy(), self.coef.copy(), self.relation, self.rhs)


@dataclass
class MilpInstance:
    c: np.ndarray
    rows: list[Row]
    var_kind: list[str]
    lower: np.ndarray
    upper: np.ndarray
    objective_sense: str = MINIMIZE
    name: str = ""
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_cons(self) -> int:
        return len(self.rows)

    def n_integral(self) -> int:
        return sum(1 for k in self.var_kind if k in INTEGRAL_KINDS)

    def copy(self) -> "MilpInstance":
        return MilpInstance(
            c=self.c.copy(),
            rows=[r.copy() for r in self.rows],
            var_kind=list(self.var_kind),
            lower=self.lower.copy(),
            upper=self.upper.copy(),
            objective_sense=self.objective_sense,
            name=self.name,
            metadata=dict(self.metadata),
        )

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_cons, self.n_vars))
        for i, row in enumerate(self.rows):
            a[i, row.idx] = row.coef
        return a

    def nnz(self) -> int:
        return sum(len(r.idx) for r in self.rows)

    def equals(self, other: "MilpInstance", ignore_names: bool = True) -> bool:
        """Structural equality; with ignore_names, name metadata is dropped."""
        if self.n_vars != other.n_vars or self.n_cons != other.n_cons:
            return False
        if self.objective_sense != other.objective_sense:
            return False
        if not np.array_equal(self.c, other.c):
            return False
        if self.var_kind != other.var_kind:
            return False
        if not np.array_equal(self.lower, other.lower):
            return False
        if not np.array_equal(self.upper, other.upper):
            return False
        for ra, rb in zip(self.rows, other.rows):
            if ra.relation != rb.relation or ra.rhs != rb.rhs:
                return False
            if not np.array_equal(ra.idx, rb.idx) or not np.array_equal(ra.coef, rb.coef):
                return False
        if not ignore_names:
            if self.name != other.name or self.metadata != other.metadata:
                return False
        else:
            skip = {"var_names", "row_names"}
            ma = {k: v for k, v in self.metadata.items() if k not in skip}
            mb = {k: v for k, v in other.metadata.items() if k not in skip}
            if ma != mb:
                return False
        return True


@dataclass
class Issue:
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass
class ValidationReport:
    ok: bool
    issues: list[Issue]

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]


def validate(instance: MilpInstance) -> ValidationReport:
    """Check type invariants; problems are reported, never raised."""
    issues: list[Issue] = []
    n = instance.n_vars

    def err(code, msg):
        issues.append(Issue("error", code, msg))

    def warn(code, msg):
        issues.append(Issue("warning", code, msg))

    if n == 0:
        err("empty-model", "instance has no variables")
    if len(instance.var_kind) != n or instance.lower.shape[0] != n or instance.upper.shape[0] != n:
        err("shape-mismatch", "c, var_kind, and bounds must have equal length")
        return ValidationReport(False, issues)

    if not np.all(np.isfinite(instance.c)):
        err("nonfinite", "objective contains non-finite values")
    if np.any(np.isnan(instance.lower)) or np.any(np.isnan(instance.upper)):
        err("nonfinite", "bounds contain NaN")

    for j, kind in enumerate(instance.var_kind):
        if kind not in VAR_KINDS:
            err("bad-kind", f"variable {j} has unknown kind {kind!r}")
        if instance.lower[j] > instance.upper[j]:
            err("empty-domain", f"variable {j} has lower bound above upper bound")
        if kind == BINARY and not (instance.lower[j] >= 0.0 and instance.upper[j] <= 1.0):
            err("bad-binary-bounds", f"binary variable {j} has bounds outside [0, 1]")
        if instance.lower[j] == instance.upper[j]:
            warn("fixed-var", f"variable {j} is fixed at {instance.lower[j]}")

    for i, row in enumerate(instance.rows):
        if row.relation not in RELATIONS:
            err("bad-relation", f"row {i} has unknown relation {row.relation!r}")
        if not math.isfinite(row.rhs) or not np.all(np.isfinite(row.coef)):
            err("nonfinite", f"row {i} contains non-finite values")
        if len(row.idx) == 0:
            warn("empty-row", f"row {i} has no coefficients")
        if len(row.idx) != len(row.coef):
            err("shape-mismatch", f"row {i} index/coefficient length mismatch")
            continue
        if np.any(row.idx < 0) or np.any(row.idx >= n):
            err("bad-index", f"row {i} references a variable index outside [0, {n})")
        if len(np.unique(row.idx)) != len(row.idx):
            err("dup-index", f"row {i} has duplicate variable indices")

    if n > 0 and not np.any(instance.c):
        warn("zero-objective", "objective vector is all zero")

    ok = not any(i.severity == "error" for i in issues)
    return ValidationReport(ok, issues)


def lp_relaxation(instance: MilpInstance) -> MilpInstance:
    """Same instance with every variable kind set continuous, bounds kept."""
    relaxed = instance.copy()
    relaxed.var_kind = [CONTINUOUS] * relaxed.n_vars
    return relaxed
