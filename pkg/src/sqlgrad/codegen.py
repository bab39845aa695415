"""Emit an executable training script from a tensor program.

The reference dialect is TF1-style Python: one line per IR assignment
using the fixed mnemonics (tf.add, tf.multiply, tf.tensordot, ...), a
GradientDescentOptimizer loop that prints the objective, CSV data loading,
and a trailing section that writes the learned weights back as INSERT
statements. Emission is deterministic: identical inputs give identical
bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import Catalog
from .errors import ConfigError, UnsupportedNode
from .pivot import (
    FeatureMapping,
    gen_multi_table_pivot,
    gen_pivot_query,
    gen_targets_export,
)
from .tensor_ir import (
    Elementwise,
    Reduce,
    ScalarConst,
    Slice,
    TensorDot,
    TensorExpr,
    TensorProgram,
    Unary,
    Var,
)

SECTIONS = ("DataLoading", "Declarations", "ModelAssignments",
            "TrainingLoop", "WeightExport")

FEATURES_FILE = "features_matrix.csv"
TARGETS_FILE = "targets_matrix.csv"
IMPORT_FILE = "import_weights.sql"


@dataclass(frozen=True)
class EmitPlan:
    sections: tuple[str, ...] = SECTIONS
    dialect: str = "tf1"

    def __post_init__(self):
        if self.sections != SECTIONS:
            raise ConfigError(f"sections must be exactly {SECTIONS}, in order")
        if self.dialect not in DIALECTS:
            raise ConfigError(f"unknown dialect {self.dialect!r}")


class Tf1Dialect:
    """The operator spellings of the TF1-style target dialect."""

    name = "tf1"
    extension = ".py"

    ELEMENTWISE = {"add": "tf.add", "sub": "tf.subtract",
                   "mul": "tf.multiply", "div": "tf.div"}
    UNARY = {"neg": "tf.negative", "exp": "tf.exp",
             "log": "tf.log", "square": "tf.square"}
    REDUCE = {"sum": "tf.reduce_sum", "mean": "tf.reduce_mean"}

    def constant(self, value: float) -> str:
        if value == int(value) and abs(value) < 1e16:
            return f"tf.to_double({int(value)})"
        return f"tf.to_double({value!r})"

    def expr(self, node: TensorExpr, ranks: dict[str, int]) -> str:
        if isinstance(node, ScalarConst):
            return self.constant(node.value)
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Elementwise):
            op = self.ELEMENTWISE.get(node.op)
            if op is None:
                raise UnsupportedNode(f"no {self.name} mnemonic for {node.op!r}")
            return f"{op}({self.expr(node.left, ranks)}, {self.expr(node.right, ranks)})"
        if isinstance(node, Unary):
            op = self.UNARY.get(node.op)
            if op is None:
                raise UnsupportedNode(f"no {self.name} mnemonic for {node.op!r}")
            return f"{op}({self.expr(node.operand, ranks)})"
        if isinstance(node, Reduce):
            if node.op == "size":
                return f"tf.size({self.expr(node.operand, ranks)})"
            op = self.REDUCE.get(node.op)
            if op is None:
                raise UnsupportedNode(f"no {self.name} mnemonic for {node.op!r}")
            return f"{op}({self.expr(node.operand, ranks)}, {node.axis.printed})"
        if isinstance(node, TensorDot):
            return (f"tf.tensordot({self.expr(node.left, ranks)}, "
                    f"{self.expr(node.right, ranks)}, axes=1)")
        if isinstance(node, Slice):
            rank = expr_rank(node.operand, ranks)
            inner = self.expr(node.operand, ranks)
            if rank == 2:
                return f"{inner}[:, {node.start}:{node.stop}]"
            return f"{inner}[{node.start}:{node.stop}]"
        raise UnsupportedNode(f"no {self.name} mnemonic for node {node!r}")


DIALECTS = {"tf1": Tf1Dialect()}


def expr_rank(node: TensorExpr, ranks: dict[str, int]) -> int:
    """Tensor rank of a node given variable ranks (no concrete dims needed)."""
    if isinstance(node, ScalarConst):
        return 0
    if isinstance(node, Var):
        if node.name not in ranks:
            raise UnsupportedNode(f"unknown rank for {node.name!r}")
        return ranks[node.name]
    if isinstance(node, Elementwise):
        return max(expr_rank(node.left, ranks), expr_rank(node.right, ranks))
    if isinstance(node, Unary):
        return expr_rank(node.operand, ranks)
    if isinstance(node, Reduce):
        if node.op == "size" or node.axis.value is None:
            return 0
        return max(expr_rank(node.operand, ranks) - 1, 0)
    if isinstance(node, TensorDot):
        return expr_rank(node.left, ranks) - 1
    if isinstance(node, Slice):
        return expr_rank(node.operand, ranks)
    raise UnsupportedNode(f"cannot infer rank of {node!r}")


def variable_ranks(prog: TensorProgram, cat: Catalog) -> dict[str, int]:
    targets = cat.targets_table()
    ranks: dict[str, int] = {}
    for name in prog.inputs:
        ranks[name] = 1 if name == targets else 2
    for name in prog.parameters:
        ranks[name] = 1
    for assignment in prog.assignments:
        ranks[assignment.name] = expr_rank(assignment.expr, ranks)
    return ranks


def model_section(prog: TensorProgram, cat: Catalog, dialect: Tf1Dialect) -> list[str]:
    ranks = variable_ranks(prog, cat)
    lines = []
    for assignment in prog.assignments:
        ranks[assignment.name] = expr_rank(assignment.expr, ranks)
        lines.append(f"{assignment.name} = {dialect.expr(assignment.expr, ranks)}")
    return lines


def _feature_input(prog: TensorProgram, cat: Catalog) -> str:
    targets = cat.targets_table()
    candidates = [name for name in prog.inputs if name != targets]
    if len(candidates) != 1:
        raise ConfigError(f"expected one feature tensor input, got {candidates}")
    return candidates[0]


def import_templates(cat: Catalog, mapping: FeatureMapping) -> list[str]:
    templates = []
    for table in mapping.tables():
        weights_table = cat.weights_for_features(table)
        name_col = cat.name_column(weights_table)
        value_col = cat.value_column(weights_table)
        for feature in mapping.features_of(table):
            templates.append(
                f"INSERT INTO {weights_table}({name_col}, {value_col}) "
                f"VALUES ('{feature}', %.17g);")
    return templates


def emit_program(
    prog: TensorProgram,
    cat: Catalog,
    mapping: FeatureMapping,
    print_every: int = 1,
    plan: EmitPlan = EmitPlan(),
) -> str:
    """Full training script: loading, declarations, model, loop, write-back."""
    dialect = DIALECTS[plan.dialect]
    if len(prog.parameters) != 1:
        raise ConfigError(
            f"script emission expects one weight vector, got {prog.parameters}")
    weights_name = prog.parameters[0]
    features_name = _feature_input(prog, cat)
    targets_name = cat.targets_table()
    key_count = len(mapping.observation_key)
    target_keys = len(cat.key_columns(targets_name))

    loading = [
        "import csv",
        "import os",
        "",
        "import numpy as np",
        "import tensorflow.compat.v1 as tf",
        "",
        "tf.disable_eager_execution()",
        "",
        'DATA_DIR = os.environ.get("DATA_DIR", os.path.dirname(os.path.abspath(__file__)))',
        "",
        "def load_values(filename, key_columns):",
        '    with open(os.path.join(DATA_DIR, filename), newline="") as handle:',
        "        rows = [row[key_columns:] for row in list(csv.reader(handle))[1:]]",
        "    return np.array(rows, dtype=np.float64)",
        "",
        f'{features_name}_values = load_values("{FEATURES_FILE}", {key_count})',
        f'{targets_name}_values = load_values("{TARGETS_FILE}", {target_keys})[:, 0]',
    ]
    if cat.db.connected:
        loading.insert(8, f"# source database: {cat.db.user}@{cat.db.url}")

    declarations = [
        f"{features_name} = tf.constant({features_name}_values, dtype=tf.float64)",
        f"{targets_name} = tf.constant({targets_name}_values, dtype=tf.float64)",
        f"{weights_name} = tf.Variable(tf.zeros([{mapping.size}], dtype=tf.float64))",
    ]

    model = model_section(prog, cat, dialect)

    lr = repr(float(cat.hyperparams.learning_rate))
    if print_every <= 1:
        print_line = f'        print("objective:", session.run({prog.objective}))'
    else:
        print_line = (
            f"        if (step + 1) % {print_every} == 0 or step == "
            f"{cat.hyperparams.iterations} - 1:\n"
            f'            print("objective:", session.run({prog.objective}))')
    loop = [
        f"optimizer = tf.train.GradientDescentOptimizer({lr})",
        f"train = optimizer.minimize({prog.objective})",
        "",
        "with tf.Session() as session:",
        "    session.run(tf.global_variables_initializer())",
        f"    for step in range({cat.hyperparams.iterations}):",
        "        session.run(train)",
        print_line,
        f"    learned_{weights_name} = session.run({weights_name})",
    ]

    templates = ", ".join(repr(t) for t in import_templates(cat, mapping))
    export = [
        f"import_templates = [{templates}]",
        f'with open(os.path.join(DATA_DIR, "{IMPORT_FILE}"), "w") as out:',
        f"    for template, value in zip(import_templates, learned_{weights_name}):",
        '        out.write(template % value + "\\n")',
    ]

    blocks = [loading, declarations, model, loop, export]
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


def emit_export_queries(cat: Catalog, mapping: FeatureMapping) -> dict[str, str]:
    """The SQL side of the bundle: pivot query and targets select."""
    if cat.observations_table() is not None:
        features_sql = gen_multi_table_pivot(cat, mapping)
    else:
        table = mapping.tables()[0]
        features_sql = gen_pivot_query(
            table, cat.name_column(table), cat.value_column(table),
            cat.key_columns(table), mapping.features_of(table))
    return {
        "export_features.sql": features_sql + "\n",
        "export_targets.sql": gen_targets_export(cat) + "\n",
    }


def emit_import_template(cat: Catalog, mapping: FeatureMapping) -> str:
    """Placeholder write-back statements; training fills in the values."""
    lines = ["-- weight values are written by the emitted training script"]
    for template in import_templates(cat, mapping):
        lines.append(template.replace("%.17g", "$(value)"))
    return "\n".join(lines) + "\n"
