"""In-memory evaluator for the generated export/import SQL.

Stands in for a live RDBMS: executes the pivot queries (SELECT with
SUM(CASE WHEN ...) arms, comma joins, subqueries in FROM, GROUP BY) and
the weight INSERT statements against named relations. Counts CASE-arm
evaluations so feature-computation reuse can be measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import AmbiguousColumn, ParseError, UnknownColumn, UnknownTable
from .lexer import Token, tokenize
from .relation import Relation
from .sqlast import ColumnRef

# --- query forms -----------------------------------------------------------------


@dataclass(frozen=True)
class CaseArm:
    """SUM(CASE WHEN cond_col = cond_value THEN then_expr ELSE else_expr END)"""
    cond_col: ColumnRef
    cond_value: Union[str, float]
    then_expr: Union[ColumnRef, float]
    else_expr: Union[ColumnRef, float]
    alias: str


@dataclass(frozen=True)
class PlainColumn:
    ref: ColumnRef
    alias: str


@dataclass(frozen=True)
class TableSource:
    name: str


@dataclass(frozen=True)
class SubquerySource:
    query: "ExportQuery"
    alias: str


@dataclass(frozen=True)
class ExportQuery:
    projections: tuple[Union[PlainColumn, CaseArm], ...]
    sources: tuple[Union[TableSource, SubquerySource], ...]
    predicates: tuple[tuple[ColumnRef, ColumnRef], ...]
    group_by: tuple[ColumnRef, ...]


@dataclass(frozen=True)
class InsertStatement:
    table: str
    columns: tuple[str, ...]
    values: tuple


# --- parsing -----------------------------------------------------------------------


class _ExportParser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[min(self.pos, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            raise ParseError(f"unexpected {tok.kind} {tok.text!r}", tok.line, tok.column, kinds)
        return self.next()

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.next()
        return None

    def parse_query(self) -> ExportQuery:
        self.expect("SELECT")
        projections = [self.parse_projection()]
        while self.accept("COMMA"):
            projections.append(self.parse_projection())
        self.expect("FROM")
        sources = [self.parse_source()]
        while self.accept("COMMA"):
            sources.append(self.parse_source())
        predicates: list[tuple[ColumnRef, ColumnRef]] = []
        if self.accept("WHERE"):
            predicates.append(self.parse_equality())
            while self.accept("AND"):
                predicates.append(self.parse_equality())
        group_by: tuple = ()
        if self.accept("GROUP"):
            self.expect("BY")
            cols = [self.parse_column_ref()]
            while self.accept("COMMA"):
                cols.append(self.parse_column_ref())
            group_by = tuple(cols)
        return ExportQuery(tuple(projections), tuple(sources), tuple(predicates), group_by)

    def parse_projection(self):
        if self.peek().kind == "SUM":
            return self.parse_case_arm()
        ref = self.parse_column_ref()
        alias = self.expect("IDENT").text if self.accept("AS") else ref.column
        return PlainColumn(ref, alias)

    def parse_case_arm(self) -> CaseArm:
        self.expect("SUM")
        self.expect("LPAREN")
        self.expect("CASE")
        self.expect("WHEN")
        cond_col = self.parse_column_ref()
        self.expect("EQ")
        cond_value = self.parse_literal()
        self.expect("THEN")
        then_expr = self.parse_value_expr()
        self.expect("ELSE")
        else_expr = self.parse_value_expr()
        self.expect("END")
        self.expect("RPAREN")
        self.expect("AS")
        alias = self.expect("IDENT").text
        return CaseArm(cond_col, cond_value, then_expr, else_expr, alias)

    def parse_literal(self):
        tok = self.expect("STRING", "NUMBER")
        return tok.text if tok.kind == "STRING" else float(tok.text)

    def parse_value_expr(self):
        if self.peek().kind == "NUMBER":
            return float(self.next().text)
        if self.peek().kind == "MINUS":
            self.next()
            return -float(self.expect("NUMBER").text)
        return self.parse_column_ref()

    def parse_source(self):
        if self.accept("LPAREN"):
            query = self.parse_query()
            self.expect("RPAREN")
            self.expect("AS")
            alias = self.expect("IDENT").text
            return SubquerySource(query, alias)
        return TableSource(self.expect("IDENT").text)

    def parse_equality(self) -> tuple[ColumnRef, ColumnRef]:
        left = self.parse_column_ref()
        self.expect("EQ")
        right = self.parse_column_ref()
        return left, right

    def parse_column_ref(self) -> ColumnRef:
        first = self.expect("IDENT").text
        if self.accept("DOT"):
            return ColumnRef(first, self.expect("IDENT").text)
        return ColumnRef(None, first)

    def parse_inserts(self) -> list[InsertStatement]:
        statements = []
        while self.peek().kind != "EOF":
            self.expect("INSERT")
            self.expect("INTO")
            table = self.expect("IDENT").text
            self.expect("LPAREN")
            columns = [self.expect("IDENT").text]
            while self.accept("COMMA"):
                columns.append(self.expect("IDENT").text)
            self.expect("RPAREN")
            self.expect("VALUES")
            self.expect("LPAREN")
            values = [self.parse_insert_value()]
            while self.accept("COMMA"):
                values.append(self.parse_insert_value())
            self.expect("RPAREN")
            self.expect("SEMI")
            statements.append(InsertStatement(table, tuple(columns), tuple(values)))
        return statements

    def parse_insert_value(self):
        tok = self.peek()
        if tok.kind == "STRING":
            return self.next().text
        if tok.kind == "MINUS":
            self.next()
            return -float(self.expect("NUMBER").text)
        return float(self.expect("NUMBER").text)


def parse_export_query(text: str) -> ExportQuery:
    tokens = tokenize(text)
    parser = _ExportParser(tokens)
    query = parser.parse_query()
    parser.accept("SEMI")
    parser.expect("EOF")
    return query


def parse_insert_script(text: str) -> list[InsertStatement]:
    return _ExportParser(tokenize(text)).parse_inserts()


# --- evaluation ------------------------------------------------------------------


@dataclass
class EvalStats:
    """Per-feature count of CASE-arm evaluations (one per input row)."""
    case_evaluations: dict[str, int] = field(default_factory=dict)

    def bump(self, alias: str):
        self.case_evaluations[alias] = self.case_evaluations.get(alias, 0) + 1

    def total(self) -> int:
        return sum(self.case_evaluations.values())


class _Frame:
    """Joined rows: each row maps a source alias to its tuple."""

    def __init__(self, columns: dict[str, tuple[str, ...]], rows: list[dict[str, tuple]]):
        self.columns = columns
        self.rows = rows

    def resolve(self, ref: ColumnRef) -> tuple[str, int]:
        if ref.table is not None:
            if ref.table not in self.columns:
                raise UnknownColumn(f"{ref}: source not in scope")
            cols = self.columns[ref.table]
            if ref.column not in cols:
                raise UnknownColumn(f"{ref}: no such column")
            return ref.table, cols.index(ref.column)
        owners = [a for a, cols in self.columns.items() if ref.column in cols]
        if not owners:
            raise UnknownColumn(f"column {ref.column!r} not found")
        if len(owners) > 1:
            raise AmbiguousColumn(f"column {ref.column!r} is ambiguous")
        return owners[0], self.columns[owners[0]].index(ref.column)


def evaluate_query(query: ExportQuery, relations: dict[str, Relation],
                   stats: EvalStats | None = None) -> Relation:
    """Run an export query against named relations; returns the result."""
    stats = stats if stats is not None else EvalStats()

    # materialize sources
    materialized: list[tuple[str, Relation]] = []
    for source in query.sources:
        if isinstance(source, TableSource):
            if source.name not in relations:
                raise UnknownTable(f"unknown relation {source.name!r}")
            materialized.append((source.name, relations[source.name]))
        else:
            materialized.append((source.alias, evaluate_query(source.query, relations, stats)))

    frame = _join(materialized, query.predicates)

    def value_of(row: dict[str, tuple], expr) -> float:
        if isinstance(expr, float):
            return expr
        alias, idx = frame.resolve(expr)
        return float(row[alias][idx])

    def case_value(row: dict[str, tuple], arm: CaseArm) -> float:
        stats.bump(arm.alias)
        alias, idx = frame.resolve(arm.cond_col)
        matched = row[alias][idx] == arm.cond_value
        return value_of(row, arm.then_expr if matched else arm.else_expr)

    out_columns = tuple(
        (p.alias, "double" if isinstance(p, CaseArm) else "string")
        for p in query.projections)

    if query.group_by:
        key_slots = [frame.resolve(c) for c in query.group_by]
        group_cols = {(a, i) for a, i in key_slots}
        groups: dict[tuple, list[dict[str, tuple]]] = {}
        order: list[tuple] = []
        for row in frame.rows:
            key = tuple(row[a][i] for a, i in key_slots)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(row)
        out_rows = []
        for key in order:
            rows = groups[key]
            record = []
            for p in query.projections:
                if isinstance(p, CaseArm):
                    record.append(sum(case_value(r, p) for r in rows))
                else:
                    slot = frame.resolve(p.ref)
                    if slot not in group_cols:
                        raise UnknownColumn(
                            f"{p.ref}: non-aggregated projection must be grouped")
                    record.append(rows[0][slot[0]][slot[1]])
            out_rows.append(tuple(record))
    else:
        if any(isinstance(p, CaseArm) for p in query.projections):
            raise UnknownColumn("aggregate projections require GROUP BY here")
        out_rows = []
        for row in frame.rows:
            record = []
            for p in query.projections:
                alias, idx = frame.resolve(p.ref)
                record.append(row[alias][idx])
            out_rows.append(tuple(record))

    return Relation("result", out_columns, out_rows)


def _join(materialized: list[tuple[str, Relation]],
          predicates: tuple[tuple[ColumnRef, ColumnRef], ...]) -> _Frame:
    columns = {alias: rel.column_names() for alias, rel in materialized}

    def owner(ref: ColumnRef) -> str:
        if ref.table is not None:
            if ref.table not in columns:
                raise UnknownColumn(f"{ref}: source not in scope")
            return ref.table
        owners = [a for a, cols in columns.items() if ref.column in cols]
        if len(owners) != 1:
            raise AmbiguousColumn(f"column {ref.column!r} is ambiguous or unknown")
        return owners[0]

    pending = [(owner(l), l.column, owner(r), r.column) for l, r in predicates]

    first_alias, first_rel = materialized[0]
    rows = [{first_alias: row} for row in first_rel.rows]
    bound = {first_alias}

    for alias, rel in materialized[1:]:
        applicable = []
        for la, lc, ra, rc in pending:
            if la in bound and ra == alias:
                applicable.append((la, lc, rc))
            elif ra in bound and la == alias:
                applicable.append((ra, rc, lc))
        pending = [p for p in pending
                   if not ((p[0] in bound and p[2] == alias)
                           or (p[2] in bound and p[0] == alias))]
        if applicable:
            new_idx = [rel.column_names().index(c) for _, _, c in applicable]
            table: dict[tuple, list[tuple]] = {}
            for row in rel.rows:
                table.setdefault(tuple(row[i] for i in new_idx), []).append(row)
            joined = []
            for env in rows:
                key = tuple(env[a][columns[a].index(c)] for a, c, _ in applicable)
                for row in table.get(key, ()):
                    joined.append({**env, alias: row})
            rows = joined
        else:
            rows = [{**env, alias: row} for env in rows for row in rel.rows]
        bound.add(alias)

    if pending:   # predicates spanning already-joined sources
        frame = _Frame(columns, rows)
        filtered = []
        for env in rows:
            ok = True
            for la, lc, ra, rc in pending:
                left = env[la][columns[la].index(lc)]
                right = env[ra][columns[ra].index(rc)]
                if left != right:
                    ok = False
                    break
            if ok:
                filtered.append(env)
        rows = filtered

    return _Frame(columns, rows)


def run_export_query(sql: str, relations: dict[str, Relation],
                     stats: EvalStats | None = None) -> Relation:
    return evaluate_query(parse_export_query(sql), relations, stats)


def result_to_matrix(result: Relation, key_count: int) -> np.ndarray:
    """Sort by the leading key columns, strip them, return the value matrix."""
    rows = sorted(result.rows, key=lambda r: r[:key_count])
    return np.array([[float(v) for v in row[key_count:]] for row in rows],
                    dtype=np.float64).reshape(len(rows), len(result.columns) - key_count)


def apply_inserts(statements: list[InsertStatement],
                  relations: dict[str, Relation]):
    for stmt in statements:
        if stmt.table not in relations:
            raise UnknownTable(f"unknown relation {stmt.table!r}")
        rel = relations[stmt.table]
        if stmt.columns != rel.column_names():
            raise UnknownColumn(
                f"INSERT columns {stmt.columns} do not match {rel.column_names()}")
        rel.rows.append(stmt.values)
