"""Free-format MPS reading and writing.

Supported sections: NAME, OBJSENSE, ROWS, COLUMNS (with ``'MARKER'``
``'INTORG'``/``'INTEND'`` lines), RHS, RANGES, BOUNDS, ENDATA.  RANGES
entries are expanded into a second explicit row so the rest of the code
never deals with two-sided rows.  Fixed-column files usually tokenize the
same way and are read best effort.

Writing always emits canonical names (``x{j}``, ``r{i}``, ``obj``);
original names survive in ``metadata['var_names']`` / ``['row_names']``.
Implied-integer kinds have no MPS encoding, so the writer records them in
an annotation comment that the parser understands (other tools see a
plain comment).
"""

from __future__ import annotations

import math

import numpy as np

from .instance import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    IMPLIED_INTEGER,
    INTEGER,
    LE,
    MAXIMIZE,
    MINIMIZE,
    MilpInstance,
    Row,
    validate,
)

_IMPLIED_COMMENT = "* MILPLAB IMPLIED-INTEGER:"


class MpsParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MpsWriteError(ValueError):
    pass


_SECTIONS = {"NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"}
_ROW_TYPES = {"N", "L", "G", "E"}
_RELATION_OF = {"L": LE, "G": GE, "E": EQ}


def _parse_number(tok: str, line_no: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise MpsParseError(f"expected a number, got {tok!r}", line_no)
    return value


def parse_mps(text: str) -> MilpInstance:
    """Parse free-format MPS text into a MilpInstance."""
    name = ""
    sense = MINIMIZE
    obj_row: str | None = None
    row_order: list[str] = []
    row_rel: dict[str, str] = {}
    col_order: list[str] = []
    col_index: dict[str, int] = {}
    obj_coef: dict[int, float] = {}
    integer_cols: set[int] = set()
    implied_names: set[str] = set()
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bound_lo: dict[int, float] = {}
    bound_up: dict[int, float] = {}
    bv_cols: set[int] = set()
    obj_rhs_note: float | None = None

    section = None
    in_integer = False
    expect_objsense_value = False

    def col_id(tok: str) -> int:
        if tok not in col_index:
            col_index[tok] = len(col_order)
            col_order.append(tok)
            col_entries_per_col.append({})
        return col_index[tok]

    col_entries_per_col: list[dict[str, float]] = []  # per col: row name -> coef

    lines = text.splitlines()
    for line_no, raw in enumerate(lines, start=1):
        if raw.startswith("*"):
            if raw.startswith(_IMPLIED_COMMENT):
                implied_names.update(raw[len(_IMPLIED_COMMENT):].split())
            continue
        if not raw.strip():
            continue
        is_header = not raw[0].isspace()
        toks = raw.split()

        if is_header:
            head = toks[0].upper()
            if head not in _SECTIONS:
                raise MpsParseError(f"unknown section header {toks[0]!r}", line_no)
            section = head
            expect_objsense_value = False
            if head == "NAME":
                name = toks[1] if len(toks) > 1 else ""
            elif head == "OBJSENSE":
                if len(toks) > 1:
                    sense = _read_sense(toks[1], line_no)
                else:
                    expect_objsense_value = True
            elif head == "ENDATA":
                break
            continue

        if section is None:
            raise MpsParseError("data line before any section header", line_no)

        if section == "OBJSENSE":
            if not expect_objsense_value:
                raise MpsParseError("unexpected extra OBJSENSE line", line_no)
            sense = _read_sense(toks[0], line_no)
            expect_objsense_value = False

        elif section == "ROWS":
            if len(toks) != 2:
                raise MpsParseError("ROWS line must be '<type> <name>'", line_no)
            rtype = toks[0].upper()
            if rtype not in _ROW_TYPES:
                raise MpsParseError(f"unknown row type {toks[0]!r}", line_no)
            rname = toks[1]
            if rname in row_rel or rname == obj_row:
                raise MpsParseError(f"duplicate row name {rname!r}", line_no)
            if rtype == "N":
                if obj_row is None:
                    obj_row = rname
                # additional free rows are tolerated; their coefficients are dropped
                row_rel[rname] = "N"
            else:
                row_rel[rname] = rtype
                row_order.append(rname)

        elif section == "COLUMNS":
            if "'MARKER'" in toks:
                if "'INTORG'" in toks:
                    in_integer = True
                elif "'INTEND'" in toks:
                    in_integer = False
                else:
                    raise MpsParseError("MARKER line without 'INTORG'/'INTEND'", line_no)
                continue
            if len(toks) < 3 or len(toks) % 2 == 0:
                raise MpsParseError("COLUMNS line must be '<col> (<row> <value>)+'", line_no)
            j = col_id(toks[0])
            if in_integer:
                integer_cols.add(j)
            for k in range(1, len(toks), 2):
                rname, value = toks[k], _parse_number(toks[k + 1], line_no)
                if rname == obj_row:
                    if j in obj_coef:
                        raise MpsParseError(
                            f"duplicate objective entry for column {toks[0]!r}", line_no)
                    obj_coef[j] = value
                elif rname in row_rel:
                    if row_rel[rname] == "N":
                        continue  # secondary free row, discarded
                    per_col = col_entries_per_col[j]
                    if rname in per_col:
                        raise MpsParseError(
                            f"duplicate entry for column {toks[0]!r} in row {rname!r}", line_no)
                    per_col[rname] = value
                else:
                    raise MpsParseError(f"column entry for unknown row {rname!r}", line_no)

        elif section == "RHS":
            # '<set> (<row> <value>)+'; the set name is sometimes omitted
            start = 1 if len(toks) % 2 == 1 else 0
            if len(toks) - start < 2:
                raise MpsParseError("RHS line must be '[set] (<row> <value>)+'", line_no)
            for k in range(start, len(toks), 2):
                rname, value = toks[k], _parse_number(toks[k + 1], line_no)
                if rname == obj_row:
                    obj_rhs_note = value
                    continue
                if rname not in row_rel or row_rel[rname] == "N":
                    raise MpsParseError(f"RHS entry for unknown row {rname!r}", line_no)
                rhs[rname] = value

        elif section == "RANGES":
            start = 1 if len(toks) % 2 == 1 else 0
            if len(toks) - start < 2:
                raise MpsParseError("RANGES line must be '[set] (<row> <value>)+'", line_no)
            for k in range(start, len(toks), 2):
                rname, value = toks[k], _parse_number(toks[k + 1], line_no)
                if rname not in row_rel or row_rel[rname] == "N":
                    raise MpsParseError(f"RANGES entry for unknown row {rname!r}", line_no)
                ranges[rname] = value

        elif section == "BOUNDS":
            btype = toks[0].upper()
            if btype in ("FR", "MI", "PL", "BV"):
                if len(toks) < 2:
                    raise MpsParseError("bound line is missing a column name", line_no)
                cname = toks[-1]
                if cname not in col_index:
                    raise MpsParseError(f"bound for unknown column {cname!r}", line_no)
                j = col_index[cname]
                if btype == "FR":
                    bound_lo[j] = -math.inf
                    bound_up[j] = math.inf
                elif btype == "MI":
                    bound_lo[j] = -math.inf
                elif btype == "BV":
                    bv_cols.add(j)
                    bound_lo[j] = 0.0
                    bound_up[j] = 1.0
                # PL is the default upper bound, nothing to do
            elif btype in ("LO", "UP", "FX", "LI", "UI"):
                if len(toks) < 4:
                    raise MpsParseError(
                        "bound line must be '<type> <set> <col> <value>'", line_no)
                cname = toks[2]
                if cname not in col_index:
                    raise MpsParseError(f"bound for unknown column {cname!r}", line_no)
                j = col_index[cname]
                value = _parse_number(toks[3], line_no)
                if btype in ("LO", "LI"):
                    bound_lo[j] = value
                elif btype in ("UP", "UI"):
                    bound_up[j] = value
                else:
                    bound_lo[j] = value
                    bound_up[j] = value
                if btype in ("LI", "UI"):
                    integer_cols.add(j)
            else:
                raise MpsParseError(f"unknown bound type {toks[0]!r}", line_no)

    if obj_row is None:
        raise MpsParseError("file has no objective (N) row")
    if not col_order:
        raise MpsParseError("file has no COLUMNS section data")
    if not row_order:
        raise MpsParseError("file has no constraint rows")

    n = len(col_order)
    c = np.zeros(n)
    for j, v in obj_coef.items():
        c[j] = v

    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    for j, v in bound_lo.items():
        lower[j] = v
    for j, v in bound_up.items():
        upper[j] = v

    kinds = []
    for j, cname in enumerate(col_order):
        if j in integer_cols or j in bv_cols:
            if lower[j] >= 0.0 and upper[j] <= 1.0:
                kinds.append(BINARY)
            else:
                kinds.append(INTEGER)
        elif cname in implied_names:
            kinds.append(IMPLIED_INTEGER)
        else:
            kinds.append(CONTINUOUS)

    # assemble rows in declaration order, expanding RANGES into a twin row
    by_row: dict[str, list[tuple[int, float]]] = {rname: [] for rname in row_order}
    for j in range(n):
        for rname, value in col_entries_per_col[j].items():
            by_row[rname].append((j, value))

    rows: list[Row] = []
    row_names: list[str] = []
    for rname in row_order:
        entries = sorted(by_row[rname])
        idx = np.array([e[0] for e in entries], dtype=np.int64)
        coef = np.array([e[1] for e in entries], dtype=np.float64)
        rel = _RELATION_OF[row_rel[rname]]
        b = rhs.get(rname, 0.0)
        rows.append(Row(idx, coef, rel, b))
        row_names.append(rname)
        if rname in ranges:
            r = ranges[rname]
            if rel == LE:
                twin = Row(idx.copy(), coef.copy(), GE, b - abs(r))
            elif rel == GE:
                twin = Row(idx.copy(), coef.copy(), LE, b + abs(r))
            else:
                rows[-1] = Row(idx, coef, GE, min(b, b + r))
                twin = Row(idx.copy(), coef.copy(), LE, max(b, b + r))
            rows.append(twin)
            row_names.append(rname + "__range")

    metadata = {
        "var_names": " ".join(col_order),
        "row_names": " ".join(row_names),
    }
    if obj_rhs_note is not None:
        metadata["objective_rhs"] = repr(obj_rhs_note)

    return MilpInstance(
        c=c,
        rows=rows,
        var_kind=kinds,
        lower=lower,
        upper=upper,
        objective_sense=sense,
        name=name,
        metadata=metadata,
    )


def _read_sense(tok: str, line_no: int) -> str:
    t = tok.upper()
    if t in ("MAX", "MAXIMIZE"):
        return MAXIMIZE
    if t in ("MIN", "MINIMIZE"):
        return MINIMIZE
    raise MpsParseError(f"unknown objective sense {tok!r}", line_no)


def _fmt(x: float) -> str:
    # repr round-trips doubles exactly and stays within 17 significant digits
    return repr(float(x))


def write_mps(instance: MilpInstance) -> str:
    """Serialize to free-format MPS with canonical index-based names."""
    if instance.n_vars == 0:
        raise MpsWriteError("empty model")
    report = validate(instance)
    if not report.ok:
        first = report.errors()[0]
        raise MpsWriteError(f"invalid instance ({first.code}): {first.message}")

    out: list[str] = []
    out.append(f"NAME {instance.name}" if instance.name else "NAME")
    implied = [f"x{j}" for j, k in enumerate(instance.var_kind) if k == IMPLIED_INTEGER]
    if implied:
        out.append(f"{_IMPLIED_COMMENT} " + " ".join(implied))
    if instance.objective_sense == MAXIMIZE:
        out.append("OBJSENSE")
        out.append("    MAX")

    out.append("ROWS")
    out.append(" N obj")
    rel_code = {LE: "L", GE: "G", EQ: "E"}
    for i, row in enumerate(instance.rows):
        out.append(f" {rel_code[row.relation]} r{i}")

    # column-major entries: objective first, then rows in order
    entries_by_col: list[list[tuple[str, float]]] = [[] for _ in range(instance.n_vars)]
    for j in range(instance.n_vars):
        if instance.c[j] != 0.0:
            entries_by_col[j].append(("obj", instance.c[j]))
    for i, row in enumerate(instance.rows):
        for j, v in zip(row.idx, row.coef):
            entries_by_col[int(j)].append((f"r{i}", float(v)))

    out.append("COLUMNS")
    in_integer = False
    marker_count = 0
    for j in range(instance.n_vars):
        is_int = instance.var_kind[j] in (BINARY, INTEGER)
        if is_int and not in_integer:
            out.append(f"    MARKER{marker_count} 'MARKER' 'INTORG'")
            marker_count += 1
            in_integer = True
        elif not is_int and in_integer:
            out.append(f"    MARKER{marker_count} 'MARKER' 'INTEND'")
            marker_count += 1
            in_integer = False
        entries = entries_by_col[j]
        if not entries:
            # a column must appear at least once to exist in the file
            entries = [("obj", 0.0)]
        for rname, value in entries:
            out.append(f"    x{j} {rname} {_fmt(value)}")
    if in_integer:
        out.append(f"    MARKER{marker_count} 'MARKER' 'INTEND'")

    out.append("RHS")
    for i, row in enumerate(instance.rows):
        if row.rhs != 0.0:
            out.append(f"    rhs r{i} {_fmt(row.rhs)}")

    out.append("BOUNDS")
    for j in range(instance.n_vars):
        lo, up = instance.lower[j], instance.upper[j]
        if lo == 0.0 and math.isinf(up) and up > 0:
            continue  # MPS default
        if lo == up:
            out.append(f" FX bnd x{j} {_fmt(lo)}")
            continue
        if math.isinf(lo) and math.isinf(up):
            out.append(f" FR bnd x{j}")
            continue
        if math.isinf(lo):
            out.append(f" MI bnd x{j}")
        elif lo != 0.0:
            out.append(f" LO bnd x{j} {_fmt(lo)}")
        if not math.isinf(up):
            out.append(f" UP bnd x{j} {_fmt(up)}")

    out.append("ENDATA")
    return "\n".join(out) + "\n"
