import pytest

from sqlgrad.errors import ShapeMismatch
from sqlgrad.tensor_ir import (
    Assignment,
    Elementwise,
    Reduce,
    ReduceAxis,
    ScalarConst,
    Slice,
    TensorDot,
    TensorProgram,
    Unary,
    Var,
    VarKind,
    infer_expr_shape,
    infer_shapes,
    print_program,
    print_tensor_expr,
    validate,
)


def feat(name="features"):
    return Var(name, VarKind.INPUT)


def param(name="weights"):
    return Var(name, VarKind.PARAMETER)


class TestShapeInference:
    def test_matrix_vector_product(self):
        # a realistic regression shape: 506 observations x 13 features
        env = {"features": (506, 13), "weights": (13,)}
        assert infer_expr_shape(TensorDot(feat(), param()), env) == (506,)

    def test_vector_dot(self):
        env = {"a": (4,), "b": (4,)}
        assert infer_expr_shape(TensorDot(feat("a"), feat("b")), env) == ()

    def test_reduce_all_scalar(self):
        env = {"v": (17,)}
        assert infer_expr_shape(Reduce("sum", ReduceAxis.ALL, feat("v")), env) == ()

    def test_reduce_columns_on_matrix(self):
        env = {"m": (5, 3)}
        assert infer_expr_shape(Reduce("sum", ReduceAxis.COLUMNS, feat("m")), env) == (5,)
        assert infer_expr_shape(Reduce("mean", ReduceAxis.ROWS, feat("m")), env) == (3,)

    def test_no_row_or_column_broadcast(self):
        env = {"m": (3, 2), "v": (3,)}
        with pytest.raises(ShapeMismatch):
            infer_expr_shape(Elementwise("add", feat("m"), feat("v")), env)

    def test_scalar_broadcast_allowed(self):
        env = {"v": (3,)}
        shape = infer_expr_shape(Elementwise("add", ScalarConst(1.0), feat("v")), env)
        assert shape == (3,)

    def test_tensordot_inner_mismatch(self):
        env = {"features": (5, 3), "weights": (4,)}
        with pytest.raises(ShapeMismatch):
            infer_expr_shape(TensorDot(feat(), param()), env)

    def test_slice_shapes(self):
        env = {"m": (5, 4), "v": (4,)}
        assert infer_expr_shape(Slice(feat("m"), 1, 3), env) == (5, 2)
        assert infer_expr_shape(Slice(feat("v"), 0, 2), env) == (2,)
        with pytest.raises(ShapeMismatch):
            infer_expr_shape(Slice(feat("m"), 2, 5), env)

    def test_size_is_scalar(self):
        env = {"m": (5, 4)}
        assert infer_expr_shape(Reduce("size", ReduceAxis.ALL, feat("m")), env) == ()

    def test_program_inference_deterministic(self):
        prog = TensorProgram(
            (Assignment("p", TensorDot(feat(), param())),
             Assignment("loss", Reduce("mean", ReduceAxis.ALL,
                                       Unary("square", Var("p", VarKind.DERIVED))))),
            "loss", ("weights",), ("features",))
        env = {"features": (7, 2), "weights": (2,)}
        first = infer_shapes(prog, env)
        second = infer_shapes(prog, env)
        assert first == second == {"p": (7,), "loss": ()}


class TestValidate:
    def make_program(self, objective_expr):
        return TensorProgram(
            (Assignment("objective", objective_expr),),
            "objective", ("weights",), ("features",))

    def test_valid_program(self):
        prog = self.make_program(
            Reduce("sum", ReduceAxis.ALL, TensorDot(feat(), param())))
        assert validate(prog, {"features": (3, 2), "weights": (2,)}) == []

    def test_non_scalar_objective(self):
        prog = self.make_program(TensorDot(feat(), param()))
        diags = validate(prog, {"features": (3, 2), "weights": (2,)})
        assert any("must be scalar" in d for d in diags)

    def test_unreachable_parameter(self):
        prog = self.make_program(Reduce("sum", ReduceAxis.ALL, feat()))
        diags = validate(prog, {"features": (3, 2), "weights": (2,)})
        assert any("unreachable" in d for d in diags)

    def test_unknown_reference(self):
        prog = self.make_program(Reduce("sum", ReduceAxis.ALL, feat("mystery")))
        diags = validate(prog, {"features": (3, 2), "weights": (2,)})
        assert any("mystery" in d for d in diags)

    def test_all_diagnostics_reported(self):
        # non-scalar objective AND unreachable parameter in one pass
        prog = self.make_program(feat())
        diags = validate(prog, {"features": (3, 2), "weights": (2,)})
        assert len(diags) >= 2


class TestPrinter:
    def test_one_assignment_per_line_prefix_form(self):
        prog = TensorProgram(
            (Assignment("product", TensorDot(feat(), param())),
             Assignment("objective",
                        Unary("neg", Reduce("sum", ReduceAxis.ALL,
                                            Var("product", VarKind.DERIVED))))),
            "objective", ("weights",), ("features",))
        assert print_program(prog) == (
            "product = tensordot(features, weights, axes=1)\n"
            "objective = neg(reduce_sum(product, axis=None))")

    def test_axis_rendering(self):
        assert "axis=1" in print_tensor_expr(
            Reduce("sum", ReduceAxis.COLUMNS, feat("m")))
        assert "axis=0" in print_tensor_expr(
            Reduce("mean", ReduceAxis.ROWS, feat("m")))

    def test_const_rendering(self):
        assert print_tensor_expr(ScalarConst(1.0)) == "const(1)"
        assert print_tensor_expr(ScalarConst(2.5)) == "const(2.5)"
