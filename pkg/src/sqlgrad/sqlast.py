"""AST for the supported SQL subset, plus a pretty printer.

A script is a sequence of CREATE TABLE / CREATE VIEW statements. Each view
body is a select with comma joins, a conjunction of column equalities, an
optional GROUP BY, and exactly one numeric projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# --- numeric expressions -------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class ColumnRef:
    table: str | None   # None until resolved against the tables in scope
    column: str

    def __str__(self):
        return f"{self.table}.{self.column}" if self.table else self.column


@dataclass(frozen=True)
class Neg:
    operand: "NumericExpr"


@dataclass(frozen=True)
class Binary:
    op: str             # one of + - * /
    left: "NumericExpr"
    right: "NumericExpr"


@dataclass(frozen=True)
class Func:
    name: str           # SUM COUNT AVG EXP LN POW (normalized upper case)
    args: tuple["NumericExpr", ...]


NumericExpr = Union[Const, ColumnRef, Neg, Binary, Func]

AGGREGATES = frozenset({"SUM", "COUNT", "AVG"})


def contains_aggregate(expr: NumericExpr) -> bool:
    if isinstance(expr, Func) and expr.name in AGGREGATES:
        return True
    for child in children(expr):
        if contains_aggregate(child):
            return True
    return False


def children(expr: NumericExpr) -> tuple[NumericExpr, ...]:
    if isinstance(expr, Neg):
        return (expr.operand,)
    if isinstance(expr, Binary):
        return (expr.left, expr.right)
    if isinstance(expr, Func):
        return expr.args
    return ()


# --- statements -----------------------------------------------------------

@dataclass(frozen=True)
class ColumnAlias:
    ref: ColumnRef
    alias: str


@dataclass(frozen=True)
class ExprAlias:
    expr: NumericExpr
    alias: str


Projection = Union[ColumnAlias, ExprAlias]


@dataclass(frozen=True)
class SelectQuery:
    projections: tuple[Projection, ...]
    from_tables: tuple[str, ...]
    join_predicates: tuple[tuple[ColumnRef, ColumnRef], ...]
    group_by: tuple[ColumnRef, ...] | None

    def numeric_projection(self) -> ExprAlias:
        for p in self.projections:
            if isinstance(p, ExprAlias):
                return p
        raise AssertionError("parser guarantees one numeric projection")


@dataclass(frozen=True)
class CreateTable:
    name: str
    columns: tuple[tuple[str, str], ...]       # (name, type in {int,double,string})
    primary_key: tuple[str, ...] | None

    def column_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    def column_type(self, name: str) -> str | None:
        for c, t in self.columns:
            if c == name:
                return t
        return None


@dataclass(frozen=True)
class CreateView:
    name: str
    query: SelectQuery


Statement = Union[CreateTable, CreateView]


@dataclass(frozen=True)
class SqlScript:
    statements: tuple[Statement, ...]

    def views(self) -> list[CreateView]:
        return [s for s in self.statements if isinstance(s, CreateView)]

    def tables(self) -> list[CreateTable]:
        return [s for s in self.statements if isinstance(s, CreateTable)]

    def find(self, name: str) -> Statement | None:
        for s in self.statements:
            if s.name == name:
                return s
        return None


# --- pretty printer --------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def print_expr(expr: NumericExpr, parent_prec: int = 0) -> str:
    if isinstance(expr, Const):
        return format_number(expr.value)
    if isinstance(expr, ColumnRef):
        return str(expr)
    if isinstance(expr, Neg):
        inner = print_expr(expr.operand, 3)
        if inner.startswith("-"):
            inner = f"({inner})"   # `--` would re-lex as a line comment
        return f"-{inner}"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        text = f"{print_expr(expr.left, prec)} {expr.op} {print_expr(expr.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, Func):
        return f"{expr.name}({', '.join(print_expr(a) for a in expr.args)})"
    raise AssertionError(f"unknown expr {expr!r}")


def print_query(q: SelectQuery) -> str:
    parts = []
    for p in q.projections:
        if isinstance(p, ColumnAlias):
            parts.append(f"{p.ref} AS {p.alias}")
        else:
            parts.append(f"{print_expr(p.expr)} AS {p.alias}")
    lines = ["SELECT " + ", ".join(parts), "FROM " + ", ".join(q.from_tables)]
    if q.join_predicates:
        preds = " AND ".join(f"{l} = {r}" for l, r in q.join_predicates)
        lines.append("WHERE " + preds)
    if q.group_by:
        lines.append("GROUP BY " + ", ".join(str(c) for c in q.group_by))
    return "\n".join(lines)


def print_script(script: SqlScript) -> str:
    out = []
    for stmt in script.statements:
        if isinstance(stmt, CreateTable):
            cols = [f"{c} {t}" for c, t in stmt.columns]
            if stmt.primary_key:
                cols.append(f"PRIMARY KEY ({', '.join(stmt.primary_key)})")
            out.append(f"CREATE TABLE {stmt.name} ({', '.join(cols)});")
        else:
            out.append(f"CREATE VIEW {stmt.name} AS\n{print_query(stmt.query)};")
    return "\n\n".join(out) + "\n"
