"""Translate SQL model views into tensor-IR assignments.

Views are ordered by their dependency DAG, each view's single numeric
expression is mapped compositionally onto tensor operators, the reduce
axis is inferred from GROUP BY key-ness, and per-table feature/weight
references can be rewritten onto the global feature matrix and weight
vector.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import sqlast
from .catalog import Catalog, FeaturesRole, PlainRole, WeightsRole
from .errors import (
    AmbiguousColumn,
    ConfigError,
    CyclicDependency,
    UnknownColumn,
    UnmappedTable,
    UnsupportedFeature,
    UnsupportedOperator,
)
from .sqlast import (
    Binary,
    ColumnAlias,
    ColumnRef,
    Const,
    CreateView,
    ExprAlias,
    Func,
    Neg,
    NumericExpr,
    SelectQuery,
    SqlScript,
    contains_aggregate,
)
from .tensor_ir import (
    Assignment,
    Elementwise,
    Reduce,
    ReduceAxis,
    ScalarConst,
    Slice,
    TensorDot,
    TensorExpr,
    TensorProgram,
    Unary,
    Var,
    VarKind,
    free_vars,
)

# SQL operator -> elementwise tensor operator (Hadamard semantics)
BINARY_OPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}

# SQL function -> tensor operator
REDUCE_FUNCS = {"SUM": "sum", "AVG": "mean", "COUNT": "size"}
UNARY_FUNCS = {"EXP": "exp", "LN": "log"}


# --- view ordering -----------------------------------------------------------

def view_dependencies(view: CreateView, view_names: set[str]) -> list[str]:
    return [t for t in view.query.from_tables if t in view_names]


def order_views(script: SqlScript) -> list[CreateView]:
    """Topological order of the view DAG, input order among independents."""
    views = script.views()
    names = {v.name for v in views}
    deps = {v.name: view_dependencies(v, names) for v in views}

    ordered: list[CreateView] = []
    emitted: set[str] = set()
    remaining = list(views)
    while remaining:
        progressed = False
        still = []
        for view in remaining:
            if all(d in emitted for d in deps[view.name]):
                ordered.append(view)
                emitted.add(view.name)
                progressed = True
            else:
                still.append(view)
        remaining = still
        if remaining and not progressed:
            raise CyclicDependency(_find_cycle({v.name: deps[v.name] for v in remaining}))
    return ordered


def _find_cycle(deps: dict[str, list[str]]) -> list[str]:
    # Every remaining node sits on or leads into a cycle; walk until repeat.
    node = next(iter(deps))
    path, seen = [], {}
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = next(d for d in deps[node] if d in deps)
    return path[seen[node]:] + [node]


# --- name resolution -----------------------------------------------------------

def _source_columns(name: str, cat: Catalog) -> tuple[str, ...]:
    stmt = cat.script.find(name)
    if stmt is None:
        raise UnknownColumn(f"unknown table or view {name!r}")
    if isinstance(stmt, sqlast.CreateTable):
        return stmt.column_names()
    return tuple(p.alias for p in stmt.query.projections)


def resolve_query(q: SelectQuery, cat: Catalog) -> SelectQuery:
    """Qualify every unqualified column against the tables in scope."""
    scope = {t: _source_columns(t, cat) for t in q.from_tables}

    def resolve(ref: ColumnRef) -> ColumnRef:
        if ref.table is not None:
            if ref.table not in scope:
                raise UnknownColumn(f"{ref}: table not in FROM clause")
            if ref.column not in scope[ref.table]:
                raise UnknownColumn(f"{ref}: no such column")
            return ref
        owners = [t for t, cols in scope.items() if ref.column in cols]
        if not owners:
            raise UnknownColumn(f"column {ref.column!r} not found in {sorted(scope)}")
        if len(owners) > 1:
            raise AmbiguousColumn(f"column {ref.column!r} is ambiguous: {sorted(owners)}")
        return ColumnRef(owners[0], ref.column)

    def resolve_expr(expr: NumericExpr) -> NumericExpr:
        if isinstance(expr, ColumnRef):
            return resolve(expr)
        if isinstance(expr, Neg):
            return Neg(resolve_expr(expr.operand))
        if isinstance(expr, Binary):
            return Binary(expr.op, resolve_expr(expr.left), resolve_expr(expr.right))
        if isinstance(expr, Func):
            return Func(expr.name, tuple(resolve_expr(a) for a in expr.args))
        return expr

    projections = tuple(
        ColumnAlias(resolve(p.ref), p.alias) if isinstance(p, ColumnAlias)
        else ExprAlias(resolve_expr(p.expr), p.alias)
        for p in q.projections)
    joins = tuple((resolve(l), resolve(r)) for l, r in q.join_predicates)
    group_by = tuple(resolve(c) for c in q.group_by) if q.group_by else None
    return SelectQuery(projections, q.from_tables, joins, group_by)


# --- axis inference -----------------------------------------------------------

def infer_reduce_axis(q: SelectQuery, cat: Catalog) -> ReduceAxis:
    """GROUP BY on an (inherited) key -> COLUMNS, non-key -> ROWS, none -> ALL."""
    if not q.group_by:
        return ReduceAxis.ALL
    resolved = resolve_query(q, cat)
    grouped: dict[str, set[str]] = {}
    for col in resolved.group_by:
        grouped.setdefault(col.table, set()).add(col.column)
    for table in resolved.from_tables:
        key = cat.tensor_key(table)
        if key and set(key) <= grouped.get(table, set()):
            return ReduceAxis.COLUMNS
    return ReduceAxis.ROWS


# --- expression translation -----------------------------------------------------

@dataclass(frozen=True)
class _ViewScope:
    """Join/grouping context needed for tensordot detection and var kinds."""
    cat: Catalog
    query: SelectQuery | None

    def var_for(self, ref: ColumnRef) -> Var:
        cat = self.cat
        stmt = cat.script.find(ref.table)
        if stmt is None:
            raise UnknownColumn(f"unknown table or view {ref.table!r}")
        if isinstance(stmt, CreateView):
            value_alias = stmt.query.numeric_projection().alias
            if ref.column != value_alias:
                raise UnsupportedFeature(
                    f"{ref}: only the value column {value_alias!r} of a view may "
                    "appear in numeric expressions")
            return Var(stmt.name, VarKind.DERIVED)
        role = cat.role(ref.table)
        if ref.column != cat.value_column(ref.table):
            raise UnsupportedFeature(
                f"{ref}: only value columns may appear in numeric expressions")
        kind = VarKind.PARAMETER if isinstance(role, WeightsRole) else VarKind.INPUT
        return Var(ref.table, kind)

    def is_feature_weight_dot(self, a: ColumnRef, b: ColumnRef) -> bool:
        """SUM(a*b) contracts to a tensordot when a features table and a
        weights table are joined on the feature-name column and grouped by
        the features table's key."""
        if self.query is None or a.table == b.table:
            return False
        cat = self.cat
        pairs = [(a, b), (b, a)]
        for feat, weight in pairs:
            if not isinstance(cat.role(feat.table), FeaturesRole):
                continue
            if not isinstance(cat.role(weight.table), WeightsRole):
                continue
            feat_name_col = cat.name_column(feat.table)
            weight_name_col = cat.name_column(weight.table)
            joined = any(
                {(l.table, l.column), (r.table, r.column)} ==
                {(feat.table, feat_name_col), (weight.table, weight_name_col)}
                for l, r in self.query.join_predicates)
            if not joined:
                continue
            grouped = {(c.table, c.column) for c in (self.query.group_by or ())}
            key = cat.tensor_key(feat.table) or ()
            if key and {(feat.table, c) for c in key} <= grouped:
                return True
        return False


def translate_numeric_expr(
    expr: NumericExpr,
    axis: ReduceAxis,
    cat: Catalog,
    query: SelectQuery | None = None,
) -> TensorExpr:
    """Compositional mapping of a SQL numeric expression onto tensor ops."""
    scope = _ViewScope(cat, query)
    return _translate(expr, axis, scope)


def _translate(expr: NumericExpr, axis: ReduceAxis, scope: _ViewScope) -> TensorExpr:
    if isinstance(expr, Const):
        return ScalarConst(expr.value)
    if isinstance(expr, ColumnRef):
        return scope.var_for(expr)
    if isinstance(expr, Neg):
        return Unary("neg", _translate(expr.operand, axis, scope))
    if isinstance(expr, Binary):
        op = BINARY_OPS.get(expr.op)
        if op is None:
            raise UnsupportedOperator(f"no tensor operator for {expr.op!r}")
        return Elementwise(op, _translate(expr.left, axis, scope),
                           _translate(expr.right, axis, scope))
    if isinstance(expr, Func):
        return _translate_func(expr, axis, scope)
    raise UnsupportedOperator(f"cannot translate {expr!r}")


def _translate_func(expr: Func, axis: ReduceAxis, scope: _ViewScope) -> TensorExpr:
    name = expr.name
    if name == "POW":
        return Unary("square", _translate(expr.args[0], axis, scope))
    if name in UNARY_FUNCS:
        return Unary(UNARY_FUNCS[name], _translate(expr.args[0], axis, scope))
    if name in REDUCE_FUNCS:
        if name == "COUNT" and axis is not ReduceAxis.ALL:
            raise UnsupportedOperator("COUNT is only supported without GROUP BY")
        arg = expr.args[0]
        if (name == "SUM"
                and isinstance(arg, Binary) and arg.op == "*"
                and isinstance(arg.left, ColumnRef) and isinstance(arg.right, ColumnRef)
                and scope.is_feature_weight_dot(arg.left, arg.right)):
            return TensorDot(scope.var_for(arg.left), scope.var_for(arg.right))
        return Reduce(REDUCE_FUNCS[name], axis, _translate(arg, axis, scope))
    raise UnsupportedOperator(f"no tensor operator for function {name!r}")


# --- view / script translation ---------------------------------------------------

def translate_view(view: CreateView, cat: Catalog) -> Assignment:
    query = resolve_query(view.query, cat)
    axis = (infer_reduce_axis(query, cat) if contains_aggregate(
        query.numeric_projection().expr) else ReduceAxis.ALL)
    expr = translate_numeric_expr(query.numeric_projection().expr, axis, cat, query)
    return Assignment(view.name, expr)


def translate_script(script: SqlScript, cat: Catalog) -> TensorProgram:
    """Order and translate every view; the objective is the unique sink view."""
    ordered = order_views(script)
    if not ordered:
        raise ConfigError("the SQL script defines no views")
    assignments = tuple(translate_view(v, cat) for v in ordered)

    referenced: set[str] = set()
    for view in ordered:
        referenced.update(view_dependencies(view, {v.name for v in ordered}))
    sinks = [v.name for v in ordered if v.name not in referenced]
    if len(sinks) != 1:
        raise ConfigError(f"expected exactly one objective view, found sinks: {sinks}")

    parameters: list[str] = []
    inputs: list[str] = []
    assigned = {a.name for a in assignments}
    for a in assignments:
        for name in sorted(free_vars(a.expr)):
            if name in assigned or name in parameters or name in inputs:
                continue
            if isinstance(cat.role(name), WeightsRole):
                parameters.append(name)
            else:
                inputs.append(name)
    return TensorProgram(assignments, sinks[0], tuple(parameters), tuple(inputs))


# --- global rewrite ---------------------------------------------------------------

def _pick_global_name(preferred: str, fallback: str, script: SqlScript) -> str:
    return preferred if script.find(preferred) is None else fallback


def rewrite_to_global(prog: TensorProgram, mapping, cat: Catalog) -> TensorProgram:
    """Rewrite per-table feature/weight tensors onto the global matrix/vector.

    With a single features table the rewrite is the identity. With several,
    each table becomes a column slice of the global feature matrix and its
    paired weights table a slice of the global weight vector.
    """
    feature_tables = list(mapping.tables())
    if len(feature_tables) == 1:
        _check_mapped(prog, cat, set(feature_tables))
        return prog

    features_name = _pick_global_name("features", "global_features", cat.script)
    weights_name = _pick_global_name("weights", "global_weights", cat.script)
    ranges = {t: mapping.table_range(t) for t in feature_tables}
    weight_ranges = {cat.weights_for_features(t): r for t, r in ranges.items()}

    def rewrite(expr: TensorExpr) -> TensorExpr:
        if isinstance(expr, Var):
            if expr.name in ranges:
                lo, hi = ranges[expr.name]
                return Slice(Var(features_name, VarKind.INPUT), lo, hi)
            if expr.name in weight_ranges:
                lo, hi = weight_ranges[expr.name]
                return Slice(Var(weights_name, VarKind.PARAMETER), lo, hi)
            if expr.kind is VarKind.INPUT and isinstance(cat.role(expr.name), PlainRole):
                raise UnmappedTable(f"table {expr.name!r} has no role annotation")
            return expr
        if isinstance(expr, Elementwise):
            return Elementwise(expr.op, rewrite(expr.left), rewrite(expr.right))
        if isinstance(expr, Unary):
            return Unary(expr.op, rewrite(expr.operand))
        if isinstance(expr, Reduce):
            return Reduce(expr.op, expr.axis, rewrite(expr.operand))
        if isinstance(expr, TensorDot):
            return TensorDot(rewrite(expr.left), rewrite(expr.right))
        if isinstance(expr, Slice):
            return Slice(rewrite(expr.operand), expr.start, expr.stop)
        return expr

    assignments = tuple(Assignment(a.name, rewrite(a.expr)) for a in prog.assignments)
    inputs = [features_name]
    inputs += [n for n in prog.inputs if n not in ranges and n != features_name]
    return TensorProgram(assignments, prog.objective, (weights_name,), tuple(inputs))


def _check_mapped(prog: TensorProgram, cat: Catalog, mapped: set[str]):
    for a in prog.assignments:
        for name in free_vars(a.expr):
            if cat.script.find(name) is None:
                continue
            if isinstance(cat.script.find(name), CreateView):
                continue
            role = cat.role(name)
            if isinstance(role, PlainRole):
                raise UnmappedTable(f"table {name!r} has no role annotation")
