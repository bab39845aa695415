"""Relational <-> tensor bridge.

Builds the feature/weight index mapping, generates pivot (denormalization)
and weight write-back SQL, and executes the pivot semantics in memory on
loaded relations. Row order is the sorted observation key; missing
(observation, feature) pairs fill 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .errors import (
    ConfigError,
    DuplicateFeatureName,
    DuplicateKey,
    LengthMismatch,
    MissingJoinKey,
    MissingTarget,
    NonNumericValue,
)
from .relation import Relation


@dataclass(frozen=True)
class DenseMatrix:
    rows: int
    cols: int
    data: tuple[float, ...]   # row-major

    def __post_init__(self):
        if len(self.data) != self.rows * self.cols:
            raise ValueError("data length must equal rows * cols")

    def to_numpy(self) -> np.ndarray:
        return np.array(self.data, dtype=np.float64).reshape(self.rows, self.cols)

    @staticmethod
    def from_numpy(array: np.ndarray) -> "DenseMatrix":
        rows, cols = array.shape
        return DenseMatrix(rows, cols, tuple(float(x) for x in array.reshape(-1)))


@dataclass(frozen=True)
class FeatureMapping:
    """Bijection (source table, feature name) -> global column/weight index."""
    entries: tuple[tuple[str, str], ...]   # position = column index = weight index
    observation_key: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.entries)

    def tables(self) -> list[str]:
        seen: list[str] = []
        for table, _ in self.entries:
            if table not in seen:
                seen.append(table)
        return seen

    def index_of(self, table: str, feature: str) -> int:
        return self.entries.index((table, feature))

    def table_range(self, table: str) -> tuple[int, int]:
        positions = [i for i, (t, _) in enumerate(self.entries) if t == table]
        if not positions:
            raise KeyError(f"no features mapped for table {table!r}")
        return positions[0], positions[-1] + 1

    def features_of(self, table: str) -> list[str]:
        return [f for t, f in self.entries if t == table]

    def feature_names(self) -> list[str]:
        return [f for _, f in self.entries]


def build_feature_mapping(cat: Catalog, relations: dict[str, Relation]) -> FeatureMapping:
    """Deterministic global ordering: catalog table order, then lexicographic
    feature names within each table."""
    entries: list[tuple[str, str]] = []
    owner: dict[str, str] = {}
    for table in cat.features_tables():
        if table not in relations:
            raise ConfigError(f"features table {table!r} has no loaded relation")
        names = relations[table].distinct(cat.name_column(table))
        for name in names:
            if name in owner:
                raise DuplicateFeatureName(
                    f"feature {name!r} appears in both {owner[name]!r} and {table!r}")
            owner[name] = table
            entries.append((table, name))

    obs_table = cat.observations_table()
    if obs_table is not None:
        observation_key = cat.table(obs_table).column_names()
    else:
        observation_key = cat.key_columns(cat.targets_table())
    return FeatureMapping(tuple(entries), observation_key)


# --- pivot query generation ---------------------------------------------------

def _pivot_arms(name_column: str, value_column: str, feature_names: list[str],
                qualifier: str = "") -> list[str]:
    prefix = f"{qualifier}." if qualifier else ""
    return [
        f"SUM(CASE WHEN {prefix}{name_column}='{feature}' "
        f"THEN {prefix}{value_column} ELSE 0.0 END) AS {feature}"
        for feature in feature_names
    ]


def gen_pivot_query(features_table: str, name_column: str, value_column: str,
                    key_columns: tuple[str, ...], feature_names: list[str]) -> str:
    """One wide row per key: SUM(CASE WHEN name=... THEN v ELSE 0.0 END) arms."""
    if not feature_names:
        raise ConfigError(f"no feature names to pivot for {features_table!r}")
    keys = ", ".join(key_columns)
    arms = _pivot_arms(name_column, value_column, feature_names)
    lines = [f"SELECT {keys},"]
    lines += [f"  {arm}," for arm in arms[:-1]]
    lines.append(f"  {arms[-1]}")
    lines.append(f"FROM {features_table}")
    lines.append(f"GROUP BY {keys};")
    return "\n".join(lines)


def _check_join_keys(cat: Catalog, obs_columns: tuple[str, ...]):
    for table in cat.features_tables():
        for key in cat.key_columns(table):
            if key not in obs_columns:
                raise MissingJoinKey(
                    f"feature table {table!r} keys on {key!r}, which the "
                    "observations relation lacks")


def gen_multi_table_pivot(cat: Catalog, mapping: FeatureMapping) -> str:
    """Pivot each feature table by its own dimension key in a subquery, then
    join the subqueries to observations on those keys."""
    obs = cat.observations_table()
    if obs is None:
        raise ConfigError("multi-table pivot requires an observations table")
    obs_columns = cat.table(obs).column_names()
    _check_join_keys(cat, obs_columns)

    header = [f"{obs}.{c}" for c in obs_columns] + mapping.feature_names()
    lines = [f"SELECT {', '.join(header)}", f"FROM {obs},"]
    sources = []
    predicates = []
    for table in mapping.tables():
        sub = gen_pivot_query(
            table, cat.name_column(table), cat.value_column(table),
            cat.key_columns(table), mapping.features_of(table)).rstrip(";")
        indented = "\n".join("  " + line for line in sub.splitlines())
        sources.append(f"(\n{indented}\n) AS {table}_temp")
        for key in cat.key_columns(table):
            predicates.append(f"{obs}.{key}={table}_temp.{key}")
    lines.append(",\n".join(sources))
    lines.append("WHERE " + "\n  AND ".join(predicates) + ";")
    return "\n".join(lines)


def gen_naive_export(cat: Catalog, mapping: FeatureMapping) -> str:
    """One-pass export with CASE arms inline over the joined observations.

    Correct only when each feature table contributes at most one row per key
    value (one-hot dimension features); the subquery form is the safe one.
    """
    obs = cat.observations_table()
    if obs is None:
        raise ConfigError("the naive export requires an observations table")
    obs_columns = cat.table(obs).column_names()
    _check_join_keys(cat, obs_columns)

    keys = [f"{obs}.{c}" for c in obs_columns]
    arms: list[str] = []
    predicates: list[str] = []
    for table in mapping.tables():
        arms += _pivot_arms(cat.name_column(table), cat.value_column(table),
                            mapping.features_of(table), qualifier=table)
        for key in cat.key_columns(table):
            predicates.append(f"{obs}.{key}={table}.{key}")
    lines = [f"SELECT {', '.join(keys)},"]
    lines += [f"  {arm}," for arm in arms[:-1]]
    lines.append(f"  {arms[-1]}")
    lines.append(f"FROM {', '.join([obs] + mapping.tables())}")
    lines.append("WHERE " + "\n  AND ".join(predicates))
    lines.append(f"GROUP BY {', '.join(keys)};")
    return "\n".join(lines)


def gen_targets_export(cat: Catalog) -> str:
    targets = cat.targets_table()
    keys = cat.key_columns(targets)
    value = cat.value_column(targets)
    return f"SELECT {', '.join(list(keys) + [value])}\nFROM {targets};"


# --- in-memory pivot -------------------------------------------------------------

def observation_rows(cat: Catalog, relations: dict[str, Relation]) -> list[tuple]:
    """Observation universe, sorted: the observations relation when one is
    configured, otherwise the distinct target keys."""
    obs_table = cat.observations_table()
    if obs_table is not None:
        rel = relations[obs_table]
        return sorted(set(rel.rows))
    targets = relations[cat.targets_table()]
    keys = cat.key_columns(cat.targets_table())
    return sorted(set(targets.project(keys)))


def pivot_in_memory(
    relations: dict[str, Relation],
    mapping: FeatureMapping,
    targets_table: str,
    cat: Catalog,
) -> tuple[DenseMatrix, np.ndarray]:
    """Build the global feature matrix and aligned target vector.

    M[i][j] = value of feature j for observation i, 0.0 when absent.
    """
    observations = observation_rows(cat, relations)
    obs_columns = mapping.observation_key
    index = {key: i for i, key in enumerate(observations)}

    matrix = np.zeros((len(observations), mapping.size), dtype=np.float64)
    for table in mapping.tables():
        rel = relations[table]
        name_col = rel.column_index(cat.name_column(table))
        value_col = rel.column_index(cat.value_column(table))
        key_cols = [rel.column_index(c) for c in cat.key_columns(table)]
        # project the observation key onto this table's dimension key
        for key in cat.key_columns(table):
            if key not in obs_columns:
                raise MissingJoinKey(
                    f"feature table {table!r} keys on {key!r}, which the "
                    "observations relation lacks")
        obs_positions = [obs_columns.index(c) for c in cat.key_columns(table)]
        cells: dict[tuple, float] = {}
        for row in rel.rows:
            value = row[value_col]
            if isinstance(value, str):
                raise NonNumericValue(
                    f"{table}.{cat.value_column(table)}: {value!r} is not numeric")
            cell = (tuple(row[i] for i in key_cols), row[name_col])
            cells[cell] = cells.get(cell, 0.0) + float(value)
        columns = {f: mapping.index_of(table, f) for f in mapping.features_of(table)}
        for obs_key, i in index.items():
            dim_key = tuple(obs_key[p] for p in obs_positions)
            for feature, j in columns.items():
                value = cells.get((dim_key, feature))
                if value is not None:
                    matrix[i, j] = value

    targets_rel = relations[targets_table]
    t_keys = [targets_rel.column_index(c) for c in cat.key_columns(targets_table)]
    t_value = targets_rel.column_index(cat.value_column(targets_table))
    targets_by_key: dict[tuple, float] = {}
    for row in targets_rel.rows:
        key = tuple(row[i] for i in t_keys)
        if key in targets_by_key:
            raise DuplicateKey(f"duplicate target row for observation {key!r}")
        value = row[t_value]
        if isinstance(value, str):
            raise NonNumericValue(f"target value {value!r} is not numeric")
        targets_by_key[key] = float(value)

    target_positions = [obs_columns.index(c) for c in cat.key_columns(targets_table)]
    targets = np.zeros(len(observations), dtype=np.float64)
    for obs_key, i in index.items():
        key = tuple(obs_key[p] for p in target_positions)
        if key not in targets_by_key:
            raise MissingTarget(key)
        targets[i] = targets_by_key[key]

    return DenseMatrix.from_numpy(matrix), targets


def feature_count_by_table(cat: Catalog, relations: dict[str, Relation]) -> dict[str, int]:
    return {
        table: len(relations[table].distinct(cat.name_column(table)))
        for table in cat.features_tables()
    }


# --- weight write-back --------------------------------------------------------------

def format_weight(value: float) -> str:
    """17 significant digits: enough to round-trip any double exactly."""
    return format(float(value), ".17g")


def gen_weight_import(weights_table: str, name_column: str, value_column: str,
                      mapping: FeatureMapping, values: np.ndarray | list[float]) -> str:
    """One INSERT per weight, in mapping order."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mapping.size,):
        raise LengthMismatch(
            f"{values.shape[0] if values.ndim == 1 else values.shape} weight values "
            f"for a mapping of size {mapping.size}")
    lines = [
        f"INSERT INTO {weights_table}({name_column}, {value_column}) "
        f"VALUES ('{feature}', {format_weight(values[i])});"
        for i, (_, feature) in enumerate(mapping.entries)
    ]
    return "\n".join(lines)


def gen_weight_imports(cat: Catalog, mapping: FeatureMapping,
                       values: np.ndarray | list[float]) -> str:
    """Write-back for every weights table, each taking its mapping slice."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mapping.size,):
        raise LengthMismatch(
            f"{values.shape} weight values for a mapping of size {mapping.size}")
    blocks = []
    for table in mapping.tables():
        weights_table = cat.weights_for_features(table)
        lo, hi = mapping.table_range(table)
        sub = FeatureMapping(mapping.entries[lo:hi], mapping.observation_key)
        blocks.append(gen_weight_import(
            weights_table, cat.name_column(weights_table),
            cat.value_column(weights_table), sub, values[lo:hi]))
    return "\n".join(blocks) + "\n"


def weights_vector_from_relations(cat: Catalog, mapping: FeatureMapping,
                                  relations: dict[str, Relation]) -> np.ndarray:
    """Re-vectorize loaded weight relations in mapping order."""
    values = np.zeros(mapping.size, dtype=np.float64)
    for table in mapping.tables():
        weights_table = cat.weights_for_features(table)
        rel = relations[weights_table]
        name_col = rel.column_index(cat.name_column(weights_table))
        value_col = rel.column_index(cat.value_column(weights_table))
        by_name = {row[name_col]: float(row[value_col]) for row in rel.rows}
        for feature in mapping.features_of(table):
            if feature not in by_name:
                raise ConfigError(
                    f"weights table {weights_table!r} has no row for feature {feature!r}")
            values[mapping.index_of(table, feature)] = by_name[feature]
    return values
