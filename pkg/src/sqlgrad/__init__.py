"""sqlgrad: declare supervised ML models in SQL, train them on tensors.

The pipeline: a SQL script of CREATE TABLE / CREATE VIEW statements is
parsed, the views are translated into a rank-<=2 tensor program, the
entity-attribute-value feature relations are pivoted into a dense matrix,
and the model is trained in process by reverse-mode autodiff and gradient
descent (or emitted as a standalone training script). Learned weights flow
back as INSERT statements.
"""

from .autodiff import TensorValue, TrainResult, evaluate, finite_diff_check, gd_train, gradients
from .catalog import Catalog, DbConfig, Hyperparams, build_catalog, load_config
from .parser import extract_numeric_expr, parse_script
from .pipeline import ModelBundle, prepare, train
from .pivot import DenseMatrix, FeatureMapping, build_feature_mapping, pivot_in_memory
from .tensor_ir import ReduceAxis, TensorProgram, infer_shapes, print_program, validate
from .translator import (
    infer_reduce_axis,
    order_views,
    rewrite_to_global,
    translate_numeric_expr,
    translate_script,
    translate_view,
)

__all__ = [
    "Catalog", "DbConfig", "DenseMatrix", "FeatureMapping", "Hyperparams",
    "ModelBundle", "ReduceAxis", "TensorProgram", "TensorValue", "TrainResult",
    "build_catalog", "build_feature_mapping", "evaluate", "extract_numeric_expr",
    "finite_diff_check", "gd_train", "gradients", "infer_reduce_axis",
    "infer_shapes", "load_config", "order_views", "parse_script",
    "pivot_in_memory", "prepare", "print_program", "rewrite_to_global",
    "train", "translate_numeric_expr", "translate_script", "translate_view",
    "validate",
]

__version__ = "0.1.0"
