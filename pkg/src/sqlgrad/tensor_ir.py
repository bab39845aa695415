"""Rank-<=2 tensor expression IR: nodes, shape inference, validation.

Shared vocabulary of the translator, the interpreter, and the code
emitter. Expression trees are immutable; shape inference is a pure
function of the program and the input shapes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

from .errors import ShapeMismatch

Shape = tuple[int, ...]   # (), (n,), or (n, m)

SCALAR: Shape = ()


class ReduceAxis(enum.Enum):
    COLUMNS = 1    # reduce across columns: one value per row
    ROWS = 0       # reduce across rows: one value per column
    ALL = None     # reduce every dimension to a scalar

    @property
    def printed(self) -> str:
        return "None" if self.value is None else str(self.value)


class VarKind(enum.Enum):
    PARAMETER = "parameter"   # optimized by training (weights)
    INPUT = "input"           # bound from pivoted data (features, targets)
    DERIVED = "derived"       # a previous assignment


@dataclass(frozen=True)
class ScalarConst:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    kind: VarKind


@dataclass(frozen=True)
class Elementwise:
    op: str                   # add sub mul div
    left: "TensorExpr"
    right: "TensorExpr"


@dataclass(frozen=True)
class Unary:
    op: str                   # neg exp log square
    operand: "TensorExpr"


@dataclass(frozen=True)
class Reduce:
    op: str                   # sum mean size
    axis: ReduceAxis
    operand: "TensorExpr"


@dataclass(frozen=True)
class TensorDot:
    left: "TensorExpr"        # axes is always 1 (matrix-vector / dot product)
    right: "TensorExpr"


@dataclass(frozen=True)
class Slice:
    """Contiguous range of the trailing axis: rows stay, columns lo..hi."""
    operand: "TensorExpr"
    start: int
    stop: int


TensorExpr = Union[ScalarConst, Var, Elementwise, Unary, Reduce, TensorDot, Slice]

ELEMENTWISE_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("neg", "exp", "log", "square")
REDUCE_OPS = ("sum", "mean", "size")


def expr_children(expr: TensorExpr) -> tuple[TensorExpr, ...]:
    if isinstance(expr, Elementwise):
        return (expr.left, expr.right)
    if isinstance(expr, (Unary,)):
        return (expr.operand,)
    if isinstance(expr, Reduce):
        return (expr.operand,)
    if isinstance(expr, TensorDot):
        return (expr.left, expr.right)
    if isinstance(expr, Slice):
        return (expr.operand,)
    return ()


def free_vars(expr: TensorExpr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    out: set[str] = set()
    for child in expr_children(expr):
        out |= free_vars(child)
    return out


@dataclass(frozen=True)
class Assignment:
    name: str
    expr: TensorExpr


@dataclass(frozen=True)
class TensorProgram:
    assignments: tuple[Assignment, ...]
    objective: str
    parameters: tuple[str, ...]
    inputs: tuple[str, ...]

    def assignment(self, name: str) -> Assignment:
        for a in self.assignments:
            if a.name == name:
                return a
        raise KeyError(name)


# --- pretty printer ---------------------------------------------------------

def print_tensor_expr(expr: TensorExpr) -> str:
    if isinstance(expr, ScalarConst):
        if expr.value == int(expr.value) and abs(expr.value) < 1e16:
            return f"const({int(expr.value)})"
        return f"const({expr.value!r})"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Elementwise):
        return f"{expr.op}({print_tensor_expr(expr.left)}, {print_tensor_expr(expr.right)})"
    if isinstance(expr, Unary):
        return f"{expr.op}({print_tensor_expr(expr.operand)})"
    if isinstance(expr, Reduce):
        if expr.op == "size":
            return f"size({print_tensor_expr(expr.operand)})"
        return f"reduce_{expr.op}({print_tensor_expr(expr.operand)}, axis={expr.axis.printed})"
    if isinstance(expr, TensorDot):
        return f"tensordot({print_tensor_expr(expr.left)}, {print_tensor_expr(expr.right)}, axes=1)"
    if isinstance(expr, Slice):
        return f"slice({print_tensor_expr(expr.operand)}, {expr.start}, {expr.stop})"
    raise AssertionError(f"unknown expr {expr!r}")


def print_program(prog: TensorProgram) -> str:
    return "\n".join(f"{a.name} = {print_tensor_expr(a.expr)}" for a in prog.assignments)


# --- shape inference ---------------------------------------------------------

def infer_expr_shape(expr: TensorExpr, env: dict[str, Shape]) -> Shape:
    """Shape of one expression under `env` (var name -> shape)."""
    if isinstance(expr, ScalarConst):
        return SCALAR
    if isinstance(expr, Var):
        if expr.name not in env:
            raise ShapeMismatch(f"no shape known for {expr.name!r}")
        return env[expr.name]
    if isinstance(expr, Elementwise):
        left = infer_expr_shape(expr.left, env)
        right = infer_expr_shape(expr.right, env)
        if left == SCALAR:
            return right
        if right == SCALAR:
            return left
        if left != right:
            raise ShapeMismatch(
                f"{print_tensor_expr(expr)}: operand shapes {left} vs {right} "
                "(only scalar broadcasting is supported)")
        return left
    if isinstance(expr, Unary):
        return infer_expr_shape(expr.operand, env)
    if isinstance(expr, Reduce):
        inner = infer_expr_shape(expr.operand, env)
        if expr.op == "size":
            return SCALAR
        if expr.axis is ReduceAxis.ALL:
            return SCALAR
        if len(inner) == 2:
            return (inner[0],) if expr.axis is ReduceAxis.COLUMNS else (inner[1],)
        if len(inner) == 1:
            if expr.axis is ReduceAxis.ROWS:
                return SCALAR
            raise ShapeMismatch(
                f"{print_tensor_expr(expr)}: axis 1 reduction needs a matrix, got {inner}")
        raise ShapeMismatch(f"{print_tensor_expr(expr)}: cannot reduce a scalar by axis")
    if isinstance(expr, TensorDot):
        left = infer_expr_shape(expr.left, env)
        right = infer_expr_shape(expr.right, env)
        if len(left) == 2 and len(right) == 1 and left[1] == right[0]:
            return (left[0],)
        if len(left) == 1 and len(right) == 1 and left == right:
            return SCALAR
        raise ShapeMismatch(
            f"{print_tensor_expr(expr)}: incompatible shapes {left} . {right}")
    if isinstance(expr, Slice):
        inner = infer_expr_shape(expr.operand, env)
        if not inner:
            raise ShapeMismatch(f"{print_tensor_expr(expr)}: cannot slice a scalar")
        width = expr.stop - expr.start
        if not (0 <= expr.start <= expr.stop <= inner[-1]):
            raise ShapeMismatch(
                f"{print_tensor_expr(expr)}: range [{expr.start}, {expr.stop}) "
                f"outside dimension {inner[-1]}")
        return inner[:-1] + (width,)
    raise AssertionError(f"unknown expr {expr!r}")


def infer_shapes(prog: TensorProgram, input_shapes: dict[str, Shape]) -> dict[str, Shape]:
    """Resolve the shape of every assignment; returns name -> shape.

    `input_shapes` must cover all Input and Parameter variables.
    """
    env = dict(input_shapes)
    for a in prog.assignments:
        env[a.name] = infer_expr_shape(a.expr, env)
    return {a.name: env[a.name] for a in prog.assignments}


# --- validation ---------------------------------------------------------------

def validate(prog: TensorProgram, input_shapes: dict[str, Shape]) -> list[str]:
    """Check program invariants; returns all diagnostics (empty = ok)."""
    diagnostics: list[str] = []

    seen: set[str] = set()
    known = set(input_shapes)
    for a in prog.assignments:
        if a.name in seen:
            diagnostics.append(f"duplicate assignment name {a.name!r}")
        for ref in free_vars(a.expr):
            if ref not in known and ref not in seen:
                diagnostics.append(
                    f"assignment {a.name!r} references unknown name {ref!r}")
        seen.add(a.name)

    if prog.objective not in seen:
        diagnostics.append(f"objective {prog.objective!r} is not assigned")
        return diagnostics

    try:
        shapes = infer_shapes(prog, input_shapes)
    except ShapeMismatch as exc:
        diagnostics.append(str(exc))
        return diagnostics

    if shapes[prog.objective] != SCALAR:
        diagnostics.append(
            f"objective must be scalar, got shape {shapes[prog.objective]}")

    # Parameters must influence the objective, else training is vacuous.
    reachable: set[str] = set()
    pending = [prog.objective]
    by_name = {a.name: a for a in prog.assignments}
    while pending:
        name = pending.pop()
        if name in reachable:
            continue
        reachable.add(name)
        if name in by_name:
            pending.extend(free_vars(by_name[name].expr))
    for param in prog.parameters:
        if param not in reachable:
            diagnostics.append(f"parameter {param!r} is unreachable from the objective")

    return diagnostics
