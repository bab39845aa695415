"""End-to-end orchestration: parse, configure, translate, pivot, train.

Shared by the CLI and by tests; every step is deterministic given the
inputs and the configured seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff, catalog as catalog_mod, pivot, tensor_ir, translator
from .catalog import Catalog
from .errors import ConfigError, MissingInput
from .parser import parse_script
from .pivot import DenseMatrix, FeatureMapping
from .relation import Relation, load_csv
from .sqlast import SqlScript
from .tensor_ir import Shape, TensorProgram


@dataclass
class ModelBundle:
    script: SqlScript
    catalog: Catalog
    program: TensorProgram         # rewritten onto the global tensors
    mapping: FeatureMapping
    relations: dict[str, Relation]
    features: DenseMatrix
    targets: np.ndarray
    observation_keys: list[tuple]

    @property
    def features_name(self) -> str:
        targets = self.catalog.targets_table()
        names = [n for n in self.program.inputs if n != targets]
        if len(names) != 1:
            raise ConfigError(f"expected one feature tensor input, got {names}")
        return names[0]

    @property
    def weights_name(self) -> str:
        return self.program.parameters[0]

    def input_shapes(self) -> dict[str, Shape]:
        n = self.features.rows
        return {
            self.features_name: (n, self.features.cols),
            self.catalog.targets_table(): (n,),
            self.weights_name: (self.features.cols,),
        }

    def data_bindings(self) -> dict[str, np.ndarray]:
        return {
            self.features_name: self.features.to_numpy(),
            self.catalog.targets_table(): self.targets,
        }

    def initial_weights(self, scale: float = 0.0) -> dict[str, np.ndarray]:
        return autodiff.initial_weights(
            self.program, self.input_shapes(), seed=self.catalog.hyperparams.seed,
            scale=scale)


def load_model(sql_path: str | Path, config_path: str | Path,
               overrides: dict | None = None) -> tuple[SqlScript, Catalog]:
    sql_path, config_path = Path(sql_path), Path(config_path)
    for path in (sql_path, config_path):
        if not path.is_file():
            raise MissingInput(f"input file not found: {path}")
    script = parse_script(sql_path.read_text(encoding="utf-8"))
    cat = catalog_mod.load_config(config_path, script)
    if overrides:
        cat = dataclasses.replace(
            cat, hyperparams=dataclasses.replace(cat.hyperparams, **overrides))
    return script, cat


def load_relations(cat: Catalog, data_dir: str | Path) -> dict[str, Relation]:
    """Load <table>.csv for every features/targets/observations table."""
    data_dir = Path(data_dir)
    needed = list(cat.features_tables()) + [cat.targets_table()]
    obs = cat.observations_table()
    if obs is not None:
        needed.append(obs)
    relations = {}
    for name in needed:
        path = data_dir / f"{name}.csv"
        if not path.is_file():
            raise MissingInput(f"missing data file: {path}")
        relations[name] = load_csv(path, cat.table(name))
    return relations


def prepare(sql_path: str | Path, config_path: str | Path, data_dir: str | Path,
            overrides: dict | None = None) -> ModelBundle:
    script, cat = load_model(sql_path, config_path, overrides)
    relations = load_relations(cat, data_dir)

    mapping = pivot.build_feature_mapping(cat, relations)
    catalog_mod.validate_feature_counts(
        cat, pivot.feature_count_by_table(cat, relations))

    program = translator.translate_script(script, cat)
    program = translator.rewrite_to_global(program, mapping, cat)

    features, targets = pivot.pivot_in_memory(
        relations, mapping, cat.targets_table(), cat)
    keys = pivot.observation_rows(cat, relations)

    bundle = ModelBundle(script, cat, program, mapping, relations,
                         features, targets, keys)
    diagnostics = tensor_ir.validate(program, bundle.input_shapes())
    if diagnostics:
        raise ConfigError("invalid tensor program: " + "; ".join(diagnostics))
    return bundle


def train(bundle: ModelBundle, init_scale: float = 0.0) -> autodiff.TrainResult:
    return autodiff.gd_train(
        bundle.program,
        bundle.data_bindings(),
        bundle.catalog.hyperparams,
        bundle.initial_weights(scale=init_scale),
    )


def weights_csv_rows(bundle: ModelBundle, values: np.ndarray) -> list[tuple]:
    """weights.csv rows in mapping order: (source table, feature name, value)."""
    return [
        (table, feature, pivot.format_weight(values[i]))
        for i, (table, feature) in enumerate(bundle.mapping.entries)
    ]


def loss_trace_rows(result: autodiff.TrainResult) -> list[tuple]:
    return [(it, pivot.format_weight(loss)) for it, loss in result.loss_trace]


def features_matrix_rows(bundle: ModelBundle) -> tuple[list[str], list[tuple]]:
    header = list(bundle.mapping.observation_key) + bundle.mapping.feature_names()
    matrix = bundle.features.to_numpy()
    rows = [
        tuple(key) + tuple(pivot.format_weight(v) for v in matrix[i])
        for i, key in enumerate(bundle.observation_keys)
    ]
    return header, rows


def targets_matrix_rows(bundle: ModelBundle) -> tuple[list[str], list[tuple]]:
    cat = bundle.catalog
    targets = cat.targets_table()
    key_cols = cat.key_columns(targets)
    obs_key = bundle.mapping.observation_key
    positions = [obs_key.index(c) for c in key_cols]
    header = list(key_cols) + [cat.value_column(targets)]
    rows = [
        tuple(key[p] for p in positions) + (pivot.format_weight(bundle.targets[i]),)
        for i, key in enumerate(bundle.observation_keys)
    ]
    return header, rows
