import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))   # for tests.oracles as `oracles`

from sqlgrad.catalog import build_catalog
from sqlgrad.parser import parse_script
from sqlgrad.relation import Relation

FIXTURES = Path(__file__).parent.parent / "fixtures"


def fixture_text(model: str, name: str) -> str:
    return (FIXTURES / model / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def logreg_script():
    return parse_script(fixture_text("logreg", "model.sql"))


@pytest.fixture(scope="session")
def logreg_catalog(logreg_script):
    return build_catalog(fixture_text("logreg", "config.cfg"), logreg_script)


@pytest.fixture(scope="session")
def linreg_script():
    return parse_script(fixture_text("linreg", "model.sql"))


@pytest.fixture(scope="session")
def linreg_catalog(linreg_script):
    return build_catalog(fixture_text("linreg", "config.cfg"), linreg_script)


@pytest.fixture(scope="session")
def mse_script():
    return parse_script(fixture_text("mse", "model.sql"))


@pytest.fixture(scope="session")
def mse_catalog(mse_script):
    return build_catalog(fixture_text("mse", "config.cfg"), mse_script)


@pytest.fixture(scope="session")
def sales_script():
    return parse_script(fixture_text("sales", "model.sql"))


@pytest.fixture(scope="session")
def sales_catalog(sales_script):
    return build_catalog(fixture_text("sales", "config.cfg"), sales_script)


# --- relation builders -------------------------------------------------------

EAV_COLUMNS = (("rowID", "int"), ("featureName", "string"), ("v", "double"))


def make_relations(matrix: np.ndarray, targets: np.ndarray,
                   names: list[str] | None = None) -> dict[str, Relation]:
    """Single-feature-table relation set for a dense matrix + target vector."""
    n, f = matrix.shape
    names = names or [f"f{j}" for j in range(f)]
    features = [(i + 1, names[j], float(matrix[i, j]))
                for i in range(n) for j in range(f)]
    return {
        "observations": Relation("observations", (("rowID", "int"),),
                                 [(i + 1,) for i in range(n)]),
        "features": Relation("features", EAV_COLUMNS, features),
        "targets": Relation("targets", (("rowID", "int"), ("v", "double")),
                            [(i + 1, float(targets[i])) for i in range(n)]),
    }


def random_eav(rng: np.random.Generator, max_obs: int = 100, max_features: int = 8,
               sparsity: float = 0.3):
    """A random EAV relation set: returns (relations, obs_keys, feature_names,
    dense oracle inputs). Every value present with prob 1 - sparsity."""
    n = int(rng.integers(1, max_obs + 1))
    f = int(rng.integers(1, max_features + 1))
    names = [f"f{j}" for j in range(f)]
    keys = list(range(1, n + 1))
    rows = []
    for key in keys:
        for name in names:
            if rng.random() >= sparsity:
                rows.append((key, name, float(np.round(rng.uniform(-5, 5), 6))))
    relations = {
        "observations": Relation("observations", (("rowID", "int"),),
                                 [(k,) for k in keys]),
        "features": Relation("features", EAV_COLUMNS, rows),
        "targets": Relation("targets", (("rowID", "int"), ("v", "double")),
                            [(k, float(np.round(rng.uniform(-3, 3), 6))) for k in keys]),
    }
    eav_triples = [(r[0], r[1], r[2]) for r in rows]
    return relations, keys, names, eav_triples


def boston_like(n: int = 506, f: int = 13, seed: int = 3):
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(0.0, 10.0, size=(n, f))
    truth = rng.uniform(-1.0, 1.0, size=f)
    targets = matrix @ truth + rng.normal(0.0, 1.0, size=n)
    return matrix, targets


def config_text(dims: int, iterations: int = 100, learning_rate: float = 1e-4,
                seed: int = 0) -> str:
    return (
        "features.table = features\n"
        "features.name_column = featureName\n"
        "weights.table = weights\n"
        f"weights.dims = {dims}\n"
        "targets.table = targets\n"
        "observations.table = observations\n"
        f"gd.iterations = {iterations}\n"
        f"gd.learning_rate = {learning_rate}\n"
        f"gd.seed = {seed}\n"
    )
