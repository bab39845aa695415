"""Recursive-descent parser for the supported SQL subset.

Accepted statements: CREATE TABLE and CREATE VIEW ... SELECT with comma
joins, WHERE as a conjunction of column equalities, and an optional GROUP
BY. Out-of-subset constructs (subqueries, ORDER BY, HAVING, JOIN syntax,
non-equi predicates) raise UnsupportedFeature; malformed input raises
ParseError with a source position.
"""

from __future__ import annotations

from .errors import ParseError, UnsupportedFeature
from .lexer import Token, tokenize
from .sqlast import (
    AGGREGATES,
    Binary,
    ColumnAlias,
    ColumnRef,
    Const,
    CreateTable,
    CreateView,
    ExprAlias,
    Func,
    Neg,
    NumericExpr,
    Projection,
    SelectQuery,
    SqlScript,
    children,
)

COLUMN_TYPES = {"INT": "int", "DOUBLE": "double", "STRING": "string"}
FUNCTIONS = frozenset({"SUM", "COUNT", "AVG", "EXP", "LN", "POW"})

# Pure-aliasing views (no computed projection) mark their value column by
# this conventional name, as in all the bundled model fixtures.
VALUE_COLUMN_CONVENTION = "v"


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # --- token helpers ---

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

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

    def error(self, message: str, expected: tuple[str, ...] = ()) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.column, expected)

    # --- statements ---

    def parse_script(self) -> SqlScript:
        statements = []
        names = set()
        while self.peek().kind != "EOF":
            stmt = self.parse_statement()
            if stmt.name in names:
                raise self.error(f"duplicate table/view name {stmt.name!r}")
            names.add(stmt.name)
            statements.append(stmt)
            self.expect("SEMI")
        return SqlScript(tuple(statements))

    def parse_statement(self):
        self.expect("CREATE")
        tok = self.expect("TABLE", "VIEW")
        if tok.kind == "TABLE":
            return self.parse_create_table()
        return self.parse_create_view()

    def parse_create_table(self) -> CreateTable:
        name = self.expect("IDENT").text
        self.expect("LPAREN")
        columns: list[tuple[str, str]] = []
        primary_key = None
        while True:
            if self.peek().kind == "PRIMARY":
                self.next()
                self.expect("KEY")
                self.expect("LPAREN")
                pk = [self.expect("IDENT").text]
                while self.accept("COMMA"):
                    pk.append(self.expect("IDENT").text)
                self.expect("RPAREN")
                primary_key = tuple(pk)
            else:
                col = self.expect("IDENT").text
                type_tok = self.expect("INT", "DOUBLE", "STRING")
                if any(c == col for c, _ in columns):
                    raise self.error(f"duplicate column {col!r} in table {name!r}")
                columns.append((col, COLUMN_TYPES[type_tok.kind]))
            if not self.accept("COMMA"):
                break
        self.expect("RPAREN")
        if primary_key:
            known = {c for c, _ in columns}
            for col in primary_key:
                if col not in known:
                    raise self.error(f"primary key column {col!r} not in table {name!r}")
        return CreateTable(name, tuple(columns), primary_key)

    def parse_create_view(self) -> CreateView:
        name = self.expect("IDENT").text
        self.expect("AS")
        query = self.parse_select()
        return CreateView(name, query)

    # --- select ---

    def parse_select(self) -> SelectQuery:
        self.expect("SELECT")
        raw = [self.parse_projection()]
        while self.accept("COMMA"):
            raw.append(self.parse_projection())
        projections = self.classify_projections(raw)

        self.expect("FROM")
        from_tables = [self.parse_from_item()]
        while self.accept("COMMA"):
            from_tables.append(self.parse_from_item())

        join_predicates: tuple = ()
        if self.accept("WHERE"):
            join_predicates = tuple(self.parse_conjunction())

        group_by = None
        if self.peek().kind == "GROUP":
            self.next()
            self.expect("BY")
            cols = [self.parse_column_ref()]
            while self.accept("COMMA"):
                cols.append(self.parse_column_ref())
            group_by = tuple(cols)

        tok = self.peek()
        if tok.kind in ("ORDER", "HAVING"):
            raise UnsupportedFeature(f"{tok.kind} is not supported (line {tok.line})")

        query = SelectQuery(tuple(projections), tuple(from_tables), join_predicates, group_by)
        self.check_aggregate_nesting(query)
        return query

    def parse_from_item(self) -> str:
        tok = self.peek()
        if tok.kind == "LPAREN":
            raise UnsupportedFeature(f"subqueries are not supported (line {tok.line})")
        name = self.expect("IDENT").text
        nxt = self.peek()
        if nxt.kind in ("JOIN", "ON"):
            raise UnsupportedFeature(
                f"explicit JOIN syntax is not supported, use comma joins (line {nxt.line})")
        return name

    def parse_projection(self) -> tuple[NumericExpr, str | None]:
        expr = self.parse_expr()
        alias = None
        if self.accept("AS"):
            alias = self.expect("IDENT").text
        return expr, alias

    def classify_projections(self, raw: list[tuple[NumericExpr, str | None]]) -> list[Projection]:
        """Split projections into plain column aliases and the single numeric one."""
        items: list[Projection] = []
        numeric_count = 0
        for expr, alias in raw:
            if isinstance(expr, ColumnRef):
                items.append(ColumnAlias(expr, alias or expr.column))
            else:
                if alias is None:
                    raise self.error("computed projection requires an AS alias")
                items.append(ExprAlias(expr, alias))
                numeric_count += 1
        if numeric_count == 0:
            # A pure-aliasing view: its value column is the conventional `v`.
            for i, p in enumerate(items):
                if isinstance(p, ColumnAlias) and p.ref.column == VALUE_COLUMN_CONVENTION:
                    items[i] = ExprAlias(p.ref, p.alias)
                    numeric_count += 1
        if numeric_count != 1:
            raise self.error("exactly one numeric expression per query is required")
        return items

    def parse_conjunction(self) -> list[tuple[ColumnRef, ColumnRef]]:
        predicates = [self.parse_equality()]
        while self.accept("AND"):
            predicates.append(self.parse_equality())
        return predicates

    def parse_equality(self) -> tuple[ColumnRef, ColumnRef]:
        left = self.parse_column_ref()
        tok = self.peek()
        if tok.kind in ("LT", "GT"):
            raise UnsupportedFeature(
                f"only equality join predicates are supported, got {tok.text!r} (line {tok.line})")
        self.expect("EQ")
        tok = self.peek()
        if tok.kind in ("NUMBER", "STRING"):
            raise UnsupportedFeature(
                f"non-join filter predicates are not supported (line {tok.line})")
        right = self.parse_column_ref()
        return left, right

    def parse_column_ref(self) -> ColumnRef:
        first = self.expect("IDENT").text
        if self.accept("DOT"):
            column = self.expect("IDENT").text
            return ColumnRef(first, column)
        return ColumnRef(None, first)

    # --- numeric expressions ---

    def parse_expr(self) -> NumericExpr:
        return self.parse_additive()

    def parse_additive(self) -> NumericExpr:
        expr = self.parse_multiplicative()
        while self.peek().kind in ("PLUS", "MINUS"):
            op = self.next().text
            expr = Binary(op, expr, self.parse_multiplicative())
        return expr

    def parse_multiplicative(self) -> NumericExpr:
        expr = self.parse_unary()
        while self.peek().kind in ("STAR", "SLASH"):
            op = self.next().text
            right = self.parse_unary()
            expr = self.normalize_product(op, expr, right)
        return expr

    def normalize_product(self, op: str, left: NumericExpr, right: NumericExpr) -> NumericExpr:
        # (-1) * e and e * (-1) normalize to the unary-negation node.
        if op == "*":
            if self.is_minus_one(left):
                return Neg(right)
            if self.is_minus_one(right):
                return Neg(left)
        return Binary(op, left, right)

    @staticmethod
    def is_minus_one(expr: NumericExpr) -> bool:
        return (isinstance(expr, Neg) and isinstance(expr.operand, Const)
                and expr.operand.value == 1.0) or (
                    isinstance(expr, Const) and expr.value == -1.0)

    def parse_unary(self) -> NumericExpr:
        if self.accept("MINUS"):
            operand = self.parse_unary()
            if isinstance(operand, Const):
                # fold the sign but keep -1 recognizable for normalization
                return Neg(operand) if operand.value == 1.0 else Const(-operand.value)
            return Neg(operand)
        return self.parse_primary()

    def parse_primary(self) -> NumericExpr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Const(float(tok.text))
        if tok.kind == "LPAREN":
            self.next()
            if self.peek().kind == "SELECT":
                raise UnsupportedFeature(f"subqueries are not supported (line {tok.line})")
            expr = self.parse_expr()
            self.expect("RPAREN")
            return expr
        if tok.kind in FUNCTIONS:
            self.next()
            self.expect("LPAREN")
            args = [self.parse_expr()]
            while self.accept("COMMA"):
                args.append(self.parse_expr())
            self.expect("RPAREN")
            return self.build_func(tok, args)
        if tok.kind == "IDENT":
            return self.parse_column_ref()
        raise self.error(f"unexpected {tok.kind} {tok.text!r} in expression",
                         ("NUMBER", "IDENT", "LPAREN", *sorted(FUNCTIONS)))

    def build_func(self, tok: Token, args: list[NumericExpr]) -> Func:
        name = tok.kind
        if name == "POW":
            if len(args) != 2:
                raise ParseError("POW takes exactly two arguments", tok.line, tok.column)
            if not (isinstance(args[1], Const) and args[1].value == 2.0):
                raise UnsupportedFeature(
                    f"POW supports only the constant exponent 2 (line {tok.line})")
        elif name in AGGREGATES or name in ("EXP", "LN"):
            if len(args) != 1:
                raise ParseError(f"{name} takes exactly one argument", tok.line, tok.column)
        return Func(name, tuple(args))

    def check_aggregate_nesting(self, query: SelectQuery):
        def walk(expr: NumericExpr, inside_aggregate: bool):
            if isinstance(expr, Func) and expr.name in AGGREGATES:
                if inside_aggregate:
                    raise self.error("aggregates may not be nested inside aggregates")
                inside_aggregate = True
            for child in children(expr):
                walk(child, inside_aggregate)

        for p in query.projections:
            if isinstance(p, ExprAlias):
                walk(p.expr, False)


def parse_script(source: str | list[Token]) -> SqlScript:
    """Parse SQL text (or a token stream) into a SqlScript."""
    tokens = tokenize(source) if isinstance(source, str) else source
    return _Parser(tokens).parse_script()


def extract_numeric_expr(query: SelectQuery) -> NumericExpr:
    """Return the unique numeric expression of a parsed select."""
    return query.numeric_projection().expr
