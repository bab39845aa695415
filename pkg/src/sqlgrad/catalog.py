"""Schema metadata, role hints, hyperparameters, and key/cardinality queries.

Roles and hyperparameters come from a line-oriented `key = value` config
file; everything is validated against the parsed SQL script at load time.
Catalogs are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, UnknownTable
from .sqlast import ColumnAlias, CreateTable, CreateView, SqlScript

KNOWN_KEYS = {
    "features.table", "features.name_column",
    "weights.table", "weights.dims",
    "targets.table", "observations.table",
    "gd.iterations", "gd.learning_rate", "gd.seed",
    "db.url", "db.user",
}

MANDATORY_KEYS = {
    "features.table", "features.name_column",
    "weights.table", "weights.dims", "targets.table",
}


@dataclass(frozen=True)
class FeaturesRole:
    name_column: str


@dataclass(frozen=True)
class WeightsRole:
    dims: tuple[int, ...]


@dataclass(frozen=True)
class TargetsRole:
    pass


@dataclass(frozen=True)
class ObservationsRole:
    pass


@dataclass(frozen=True)
class PlainRole:
    pass


TableRole = FeaturesRole | WeightsRole | TargetsRole | ObservationsRole | PlainRole


@dataclass(frozen=True)
class Hyperparams:
    iterations: int = 1000
    learning_rate: float = 1e-5
    batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"gd.iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ConfigError(f"gd.learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.seed < 0:
            raise ConfigError(f"gd.seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class DbConfig:
    url: str = ""
    user: str = ""

    @property
    def connected(self) -> bool:
        return bool(self.url)


@dataclass(frozen=True)
class Catalog:
    """Immutable after load; safe to share across threads."""
    script: SqlScript
    roles: dict[str, TableRole]
    hyperparams: Hyperparams
    db: DbConfig = field(default_factory=DbConfig)
    # (features table, weights table) pairs, in config order
    pairs: tuple[tuple[str, str], ...] = ()

    # --- lookups ---

    def table(self, name: str) -> CreateTable:
        stmt = self.script.find(name)
        if not isinstance(stmt, CreateTable):
            raise UnknownTable(f"unknown table {name!r}")
        return stmt

    def view(self, name: str) -> CreateView:
        stmt = self.script.find(name)
        if not isinstance(stmt, CreateView):
            raise UnknownTable(f"unknown view {name!r}")
        return stmt

    def role(self, name: str) -> TableRole:
        return self.roles.get(name, PlainRole())

    def features_tables(self) -> list[str]:
        """Feature-table names in catalog (script declaration) order."""
        order = [t.name for t in self.script.tables()]
        return [n for n in order if isinstance(self.roles.get(n), FeaturesRole)]

    def weights_tables(self) -> list[str]:
        order = [t.name for t in self.script.tables()]
        return [n for n in order if isinstance(self.roles.get(n), WeightsRole)]

    def targets_table(self) -> str:
        for name, role in self.roles.items():
            if isinstance(role, TargetsRole):
                return name
        raise ConfigError("no targets table configured")

    def observations_table(self) -> str | None:
        for name, role in self.roles.items():
            if isinstance(role, ObservationsRole):
                return name
        return None

    def weights_for_features(self, features_table: str) -> str:
        """Weights table paired with a features table (parallel config order)."""
        for feat, weight in self.pairs:
            if feat == features_table:
                return weight
        raise ConfigError(f"no weights table paired with {features_table!r}")

    # --- column classification ---

    def numeric_columns(self, table: CreateTable) -> list[str]:
        return [c for c, t in table.columns if t in ("int", "double")]

    def value_column(self, name: str) -> str:
        """The measure column of a table: its unique non-key numeric column."""
        table = self.table(name)
        role = self.role(name)
        excluded = set(table.primary_key or ())
        if isinstance(role, FeaturesRole):
            excluded.add(role.name_column)
        candidates = [c for c in self.numeric_columns(table) if c not in excluded]
        if len(candidates) != 1:
            raise ConfigError(
                f"cannot determine the value column of {name!r}; "
                f"candidates: {candidates or 'none'}")
        return candidates[0]

    def name_column(self, table: str) -> str:
        """The string column naming features/weights in an EAV table."""
        role = self.role(table)
        if isinstance(role, FeaturesRole):
            return role.name_column
        schema = self.table(table)
        strings = [c for c, t in schema.columns if t == "string"]
        if len(strings) != 1:
            raise ConfigError(f"cannot determine the name column of {table!r}")
        return strings[0]

    def key_columns(self, name: str) -> tuple[str, ...]:
        """Key columns of a table's tensor form (everything but name/value)."""
        table = self.table(name)
        role = self.role(name)
        skip = {self.value_column(name)}
        if isinstance(role, FeaturesRole):
            skip.add(role.name_column)
        return tuple(c for c in table.column_names() if c not in skip)

    # --- key reasoning ---

    def relation_key(self, name: str) -> tuple[str, ...] | None:
        """Primary key of a table or the inherited key of a view.

        A view keyed by its GROUP BY columns; a view without GROUP BY
        inherits a source's key when it projects all of that key's columns.
        """
        stmt = self.script.find(name)
        if stmt is None:
            raise UnknownTable(f"unknown table or view {name!r}")
        if isinstance(stmt, CreateTable):
            return stmt.primary_key
        return self._view_key(stmt, set())

    def _view_key(self, view: CreateView, visiting: set[str]) -> tuple[str, ...] | None:
        if view.name in visiting:
            return None
        visiting.add(view.name)
        q = view.query
        projected = {}
        for p in q.projections:
            if isinstance(p, ColumnAlias):
                projected[(p.ref.table, p.ref.column)] = p.alias
        if q.group_by:
            aliases = []
            for col in q.group_by:
                alias = projected.get((col.table, col.column)) or projected.get((None, col.column))
                if alias is None and col.table is None:
                    alias = next((a for (t, c), a in projected.items() if c == col.column), None)
                if alias is None:
                    return None
                aliases.append(alias)
            return tuple(aliases)
        for source in q.from_tables:
            stmt = self.script.find(source)
            if stmt is None:
                continue
            key = (stmt.primary_key if isinstance(stmt, CreateTable)
                   else self._view_key(stmt, visiting))
            if not key:
                continue
            aliases = []
            for col in key:
                alias = projected.get((source, col)) or projected.get((None, col))
                if alias is None:
                    break
                aliases.append(alias)
            else:
                return tuple(aliases)
        return None

    def is_key(self, name: str, columns: list[str] | tuple[str, ...]) -> bool:
        """True iff `columns` covers a declared (or inherited) key of `name`."""
        key = self.relation_key(name)
        return key is not None and set(key) <= set(columns)

    def tensor_key(self, name: str) -> tuple[str, ...] | None:
        """Key of a relation's tensor form.

        Feature and target tables are keyed by their non-name, non-value
        columns once pivoted into matrices; views and plain tables fall
        back to relation_key.
        """
        role = self.role(name)
        if isinstance(role, (FeaturesRole, TargetsRole, ObservationsRole)):
            try:
                return self.key_columns(name)
            except ConfigError:
                return self.relation_key(name)
        return self.relation_key(name)


# --- config loading --------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def load_config(path: str | Path, script: SqlScript) -> Catalog:
    """Load a catalog from a config file, validated against `script`."""
    return build_catalog(Path(path).read_text(encoding="utf-8"), script)


def build_catalog(config_text: str, script: SqlScript) -> Catalog:
    values = parse_config_text(config_text)
    missing = MANDATORY_KEYS - values.keys()
    if missing:
        raise ConfigError(f"missing mandatory keys: {', '.join(sorted(missing))}")

    feature_tables = _split_list(values["features.table"])
    name_columns = _split_list(values["features.name_column"])
    weight_tables = _split_list(values["weights.table"])
    dims = _split_list(values["weights.dims"])
    if len(feature_tables) != len(name_columns):
        raise ConfigError("features.table and features.name_column must have "
                          "the same number of entries")
    if len(weight_tables) != len(dims):
        raise ConfigError("weights.table and weights.dims must have the same "
                          "number of entries")
    if len(weight_tables) != len(feature_tables):
        raise ConfigError("each features table needs exactly one paired weights table")
    if not feature_tables:
        raise ConfigError("at least one features table is required")

    tables = {t.name: t for t in script.tables()}

    def require_table(name: str) -> CreateTable:
        if name not in tables:
            raise ConfigError(f"table {name!r} is not defined in the SQL script")
        return tables[name]

    roles: dict[str, TableRole] = {}
    for table_name, name_col in zip(feature_tables, name_columns):
        table = require_table(table_name)
        if table.column_type(name_col) is None:
            raise ConfigError(f"column {name_col!r} does not exist in table {table_name!r}")
        if table.column_type(name_col) != "string":
            raise ConfigError(f"feature name column {table_name}.{name_col} must be string")
        roles[table_name] = FeaturesRole(name_col)

    for table_name, dim_text in zip(weight_tables, dims):
        require_table(table_name)
        if table_name in roles:
            raise ConfigError(f"table {table_name!r} already has a role")
        try:
            dim = int(dim_text)
        except ValueError:
            raise ConfigError(f"weights.dims entry {dim_text!r} is not an integer") from None
        if dim < 1:
            raise ConfigError(f"weights dims must be positive, got {dim}")
        roles[table_name] = WeightsRole((dim,))

    targets = values["targets.table"]
    require_table(targets)
    if targets in roles:
        raise ConfigError(f"table {targets!r} already has a role")
    roles[targets] = TargetsRole()

    if "observations.table" in values:
        obs = values["observations.table"]
        require_table(obs)
        if obs in roles:
            raise ConfigError(f"table {obs!r} already has a role")
        roles[obs] = ObservationsRole()

    try:
        hp = Hyperparams(
            iterations=int(values.get("gd.iterations", "1000")),
            learning_rate=float(values.get("gd.learning_rate", "1e-5")),
            seed=int(values.get("gd.seed", "0")),
        )
    except ValueError as exc:
        raise ConfigError(f"bad hyperparameter value: {exc}") from None

    db = DbConfig(values.get("db.url", ""), values.get("db.user", ""))
    pairs = tuple(zip(feature_tables, weight_tables))
    catalog = Catalog(script, roles, hp, db, pairs)

    # Fail early when value columns cannot be determined.
    for name in feature_tables + weight_tables + [targets]:
        catalog.value_column(name)
    return catalog


def validate_feature_counts(catalog: Catalog, counts: dict[str, int]):
    """Check configured weight dims against observed distinct feature names.

    `counts` maps each features table to the number of distinct values in
    its name column on the loaded data.
    """
    for features_table in catalog.features_tables():
        weights_table = catalog.weights_for_features(features_table)
        role = catalog.role(weights_table)
        assert isinstance(role, WeightsRole)
        declared = 1
        for d in role.dims:
            declared *= d
        observed = counts.get(features_table, 0)
        if declared != observed:
            raise ConfigError(
                f"weights table {weights_table!r} declares {declared} weights but "
                f"{features_table!r} has {observed} distinct feature names")
