"""Evaluate tensor programs, differentiate them in reverse mode, and run
plain full-batch gradient descent.

This is the in-process stand-in for an external training engine: dense
float64 arrays, a Wengert-list tape for gradients, a fixed learning rate.
Arguments to log are clamped to [1e-12, 1] so logistic losses stay finite;
this is a documented deviation from raw SQL semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import Hyperparams
from .errors import (
    DivergenceDetected,
    NonFiniteGradient,
    NonFiniteValue,
    ShapeMismatch,
)
from .tensor_ir import (
    Elementwise,
    Reduce,
    ReduceAxis,
    ScalarConst,
    Shape,
    Slice,
    TensorDot,
    TensorExpr,
    TensorProgram,
    Unary,
    Var,
    print_tensor_expr,
)

LOG_CLAMP_MIN = 1e-12
LOG_CLAMP_MAX = 1.0

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class TensorValue:
    shape: Shape
    data: tuple[float, ...]    # row-major

    def to_numpy(self) -> np.ndarray:
        return np.array(self.data, dtype=np.float64).reshape(self.shape)

    @staticmethod
    def from_numpy(array: np.ndarray) -> "TensorValue":
        array = np.asarray(array, dtype=np.float64)
        return TensorValue(tuple(array.shape), tuple(float(x) for x in array.reshape(-1)))


@dataclass
class TrainResult:
    weights: dict[str, np.ndarray]
    loss_trace: list[tuple[int, float]]
    iterations_run: int


def _as_array(value) -> np.ndarray:
    if isinstance(value, TensorValue):
        return value.to_numpy()
    return np.asarray(value, dtype=np.float64)


# --- forward evaluation with a tape ---------------------------------------------


class _Tape:
    """Wengert list: one slot per evaluated node, inputs by slot index."""

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.nodes: list[TensorExpr | None] = []
        self.inputs: list[tuple[int, ...]] = []

    def push(self, value: np.ndarray, node: TensorExpr | None,
             inputs: tuple[int, ...] = ()) -> int:
        self.values.append(value)
        self.nodes.append(node)
        self.inputs.append(inputs)
        return len(self.values) - 1


def _record(expr: TensorExpr, slots: dict[str, int], tape: _Tape) -> int:
    if isinstance(expr, ScalarConst):
        return tape.push(np.float64(expr.value), expr)
    if isinstance(expr, Var):
        if expr.name not in slots:
            raise ShapeMismatch(f"no binding for {expr.name!r}")
        return tape.push(tape.values[slots[expr.name]], expr, (slots[expr.name],))
    if isinstance(expr, Elementwise):
        left = _record(expr.left, slots, tape)
        right = _record(expr.right, slots, tape)
        a, b = tape.values[left], tape.values[right]
        if expr.op == "add":
            value = a + b
        elif expr.op == "sub":
            value = a - b
        elif expr.op == "mul":
            value = a * b
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                value = a / b
        return _checked(tape, value, expr, (left, right))
    if isinstance(expr, Unary):
        operand = _record(expr.operand, slots, tape)
        x = tape.values[operand]
        if expr.op == "neg":
            value = -x
        elif expr.op == "exp":
            with np.errstate(over="ignore"):
                value = np.exp(x)
        elif expr.op == "log":
            value = np.log(np.clip(x, LOG_CLAMP_MIN, LOG_CLAMP_MAX))
        else:
            value = np.square(x)
        return _checked(tape, value, expr, (operand,))
    if isinstance(expr, Reduce):
        operand = _record(expr.operand, slots, tape)
        x = tape.values[operand]
        if expr.op == "size":
            value = np.float64(x.size)
        elif expr.axis is ReduceAxis.ALL:
            value = x.sum() if expr.op == "sum" else x.mean()
        else:
            axis = expr.axis.value
            if x.ndim == 1 and axis == 0:
                value = x.sum() if expr.op == "sum" else x.mean()
            elif x.ndim == 2:
                value = x.sum(axis=axis) if expr.op == "sum" else x.mean(axis=axis)
            else:
                raise ShapeMismatch(
                    f"{print_tensor_expr(expr)}: cannot reduce shape {x.shape} "
                    f"along axis {axis}")
        return _checked(tape, value, expr, (operand,))
    if isinstance(expr, TensorDot):
        left = _record(expr.left, slots, tape)
        right = _record(expr.right, slots, tape)
        a, b = tape.values[left], tape.values[right]
        value = a @ b
        return _checked(tape, value, expr, (left, right))
    if isinstance(expr, Slice):
        operand = _record(expr.operand, slots, tape)
        x = tape.values[operand]
        value = x[..., expr.start:expr.stop]
        return tape.push(value, expr, (operand,))
    raise AssertionError(f"unknown expr {expr!r}")


def _checked(tape: _Tape, value: np.ndarray, node: TensorExpr,
             inputs: tuple[int, ...]) -> int:
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(print_tensor_expr(node))
    return tape.push(value, node, inputs)


def _run_forward(prog: TensorProgram, bindings: dict) -> tuple[_Tape, dict[str, int]]:
    tape = _Tape()
    slots: dict[str, int] = {}
    for name in list(prog.inputs) + list(prog.parameters):
        if name not in bindings:
            raise ShapeMismatch(f"missing binding for {name!r}")
        value = _as_array(bindings[name])
        if not np.all(np.isfinite(value)):
            raise NonFiniteValue(name)
        slots[name] = tape.push(value, None)
    for assignment in prog.assignments:
        slots[assignment.name] = _record(assignment.expr, slots, tape)
    return tape, slots


def evaluate(prog: TensorProgram, bindings: dict) -> dict[str, TensorValue]:
    """Evaluate every assignment once, in order; returns name -> value."""
    tape, slots = _run_forward(prog, bindings)
    return {a.name: TensorValue.from_numpy(np.asarray(tape.values[slots[a.name]]))
            for a in prog.assignments}


def objective_value(prog: TensorProgram, bindings: dict) -> float:
    tape, slots = _run_forward(prog, bindings)
    return float(tape.values[slots[prog.objective]])


# --- reverse-mode gradients --------------------------------------------------------


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if shape == ():
        return np.asarray(grad).sum()
    return grad


def gradients(prog: TensorProgram, bindings: dict) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradient of the scalar objective per parameter."""
    tape, slots = _run_forward(prog, bindings)
    objective_slot = slots[prog.objective]
    if np.asarray(tape.values[objective_slot]).shape != ():
        raise ShapeMismatch("gradients require a scalar objective")

    adjoint: list = [None] * len(tape.values)
    adjoint[objective_slot] = np.float64(1.0)

    def accumulate(slot: int, grad: np.ndarray):
        if adjoint[slot] is None:
            adjoint[slot] = np.array(grad, dtype=np.float64)
        else:
            adjoint[slot] = adjoint[slot] + grad

    for slot in range(len(tape.values) - 1, -1, -1):
        grad = adjoint[slot]
        node = tape.nodes[slot]
        if grad is None or node is None:
            continue
        inputs = tape.inputs[slot]
        if isinstance(node, ScalarConst):
            continue
        if isinstance(node, Var):
            accumulate(inputs[0], grad)
        elif isinstance(node, Elementwise):
            left_slot, right_slot = inputs
            a, b = tape.values[left_slot], tape.values[right_slot]
            a_shape, b_shape = np.asarray(a).shape, np.asarray(b).shape
            if node.op == "add":
                accumulate(left_slot, _unbroadcast(grad, a_shape))
                accumulate(right_slot, _unbroadcast(grad, b_shape))
            elif node.op == "sub":
                accumulate(left_slot, _unbroadcast(grad, a_shape))
                accumulate(right_slot, _unbroadcast(-grad, b_shape))
            elif node.op == "mul":
                accumulate(left_slot, _unbroadcast(grad * b, a_shape))
                accumulate(right_slot, _unbroadcast(grad * a, b_shape))
            else:
                accumulate(left_slot, _unbroadcast(grad / b, a_shape))
                accumulate(right_slot, _unbroadcast(-grad * a / (b * b), b_shape))
        elif isinstance(node, Unary):
            (operand_slot,) = inputs
            x = tape.values[operand_slot]
            if node.op == "neg":
                accumulate(operand_slot, -grad)
            elif node.op == "exp":
                accumulate(operand_slot, grad * tape.values[slot])
            elif node.op == "log":
                inside = (x >= LOG_CLAMP_MIN) & (x <= LOG_CLAMP_MAX)
                clamped = np.clip(x, LOG_CLAMP_MIN, LOG_CLAMP_MAX)
                accumulate(operand_slot, np.where(inside, grad / clamped, 0.0))
            else:
                accumulate(operand_slot, grad * 2.0 * x)
        elif isinstance(node, Reduce):
            (operand_slot,) = inputs
            x = np.asarray(tape.values[operand_slot])
            if node.op == "size":
                continue
            if node.axis is ReduceAxis.ALL or x.ndim == 1:
                scale = 1.0 / x.size if node.op == "mean" else 1.0
                accumulate(operand_slot, np.full_like(x, 1.0) * grad * scale)
            else:
                axis = node.axis.value
                count = x.shape[axis]
                scale = 1.0 / count if node.op == "mean" else 1.0
                expanded = np.expand_dims(np.asarray(grad), axis=axis)
                accumulate(operand_slot, np.broadcast_to(expanded, x.shape) * scale)
        elif isinstance(node, TensorDot):
            left_slot, right_slot = inputs
            a, b = np.asarray(tape.values[left_slot]), np.asarray(tape.values[right_slot])
            if a.ndim == 2:
                accumulate(left_slot, np.outer(np.asarray(grad), b))
                accumulate(right_slot, a.T @ np.asarray(grad))
            else:
                accumulate(left_slot, np.asarray(grad) * b)
                accumulate(right_slot, np.asarray(grad) * a)
        elif isinstance(node, Slice):
            (operand_slot,) = inputs
            x = np.asarray(tape.values[operand_slot])
            full = np.zeros_like(x)
            full[..., node.start:node.stop] = grad
            accumulate(operand_slot, full)

    out: dict[str, np.ndarray] = {}
    for param in prog.parameters:
        grad = adjoint[slots[param]]
        value = np.asarray(tape.values[slots[param]])
        if grad is None:
            grad = np.zeros_like(value)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != value.shape:
            grad = np.broadcast_to(grad, value.shape).copy()
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"gradient of {param!r} is not finite")
        out[param] = grad
    return out


# --- finite-difference verification ---------------------------------------------------


def finite_diff_check(prog: TensorProgram, bindings: dict, h: float = 1e-6) -> float:
    """Max over parameter coordinates of |ad - fd| / max(1, |ad|, |fd|),
    with fd the central difference of the objective."""
    ad = gradients(prog, bindings)
    worst = 0.0
    for param in prog.parameters:
        theta = _as_array(bindings[param]).copy()
        flat = theta.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = objective_value(prog, {**bindings, param: theta})
            flat[i] = keep - h
            down = objective_value(prog, {**bindings, param: theta})
            flat[i] = keep
            fd = (up - down) / (2.0 * h)
            a = float(ad[param].reshape(-1)[i])
            worst = max(worst, abs(a - fd) / max(1.0, abs(a), abs(fd)))
    return worst


# --- gradient descent ---------------------------------------------------------------


def _batch_slices(bindings: dict, batch_size: int | None):
    """Yield per-iteration bindings; sequential fixed-size batches that wrap."""
    if batch_size is None:
        while True:
            yield bindings
    arrays = {k: _as_array(v) for k, v in bindings.items()}
    leading = [v.shape[0] for v in arrays.values() if v.ndim >= 1]
    n = max(leading) if leading else 0
    if n == 0 or batch_size >= n:
        while True:
            yield bindings
    start = 0
    while True:
        stop = min(start + batch_size, n)
        yield {k: (v[start:stop] if v.ndim >= 1 and v.shape[0] == n else v)
               for k, v in arrays.items()}
        start = 0 if stop >= n else stop


def gd_train(
    prog: TensorProgram,
    data: dict,
    hp: Hyperparams,
    init: dict[str, np.ndarray],
) -> TrainResult:
    """Fixed-learning-rate descent: theta <- theta - lr * grad, hp.iterations
    times; the objective is recorded after every update."""
    params = {name: _as_array(value).copy() for name, value in init.items()}
    batches = _batch_slices(data, hp.batch_size)
    trace: list[tuple[int, float]] = []
    for iteration in range(hp.iterations):
        batch = next(batches)
        bindings = {**batch, **params}
        try:
            grads = gradients(prog, bindings)
            for name in params:
                params[name] = params[name] - hp.learning_rate * grads[name]
            loss = objective_value(prog, {**batch, **params})
        except (NonFiniteValue, NonFiniteGradient) as exc:
            raise DivergenceDetected(iteration, float("nan")) from exc
        if not np.isfinite(loss) or abs(loss) > DIVERGENCE_LIMIT:
            raise DivergenceDetected(iteration, loss)
        trace.append((iteration, float(loss)))
    return TrainResult(params, trace, hp.iterations)


def initial_weights(
    prog: TensorProgram,
    shapes: dict[str, tuple],
    seed: int = 0,
    scale: float = 0.0,
) -> dict[str, np.ndarray]:
    """All-zeros by default; uniform(-scale, scale) when scale > 0."""
    rng = np.random.default_rng(seed)
    out = {}
    for param in prog.parameters:
        shape = shapes[param]
        if scale > 0.0:
            out[param] = rng.uniform(-scale, scale, size=shape)
        else:
            out[param] = np.zeros(shape, dtype=np.float64)
    return out
