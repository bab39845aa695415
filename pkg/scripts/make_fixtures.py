#!/usr/bin/env python3
"""Regenerate the checked-in fixtures/ directory (seeded, deterministic).

Usage: python scripts/make_fixtures.py [target_dir]
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np

LOGREG_SQL = """\
-- logistic regression over one EAV feature table
CREATE TABLE observations (rowID int, PRIMARY KEY (rowID));
CREATE TABLE features (rowID int, featureName string, v double,
  PRIMARY KEY (rowID, featureName));
CREATE TABLE targets (rowID int, v double, PRIMARY KEY (rowID));
CREATE TABLE weights (featureName string, v double, PRIMARY KEY (featureName));

CREATE VIEW product AS
  SELECT SUM(features.v * weights.v) AS v,
  features.rowID AS rowID
  FROM features, weights
  WHERE features.featureName=weights.featureName
  GROUP BY rowID;

CREATE VIEW sigmoid AS
  SELECT product.rowID AS rowID,
  1/(1+EXP(-product.v)) AS v
  FROM product;

CREATE VIEW log_sigmoid AS
  SELECT sigmoid.rowID AS rowID,
  LN(sigmoid.v) AS v
  FROM sigmoid;

CREATE VIEW log_1_minus_sigmoid AS
  SELECT sigmoid.rowID AS rowID,
  LN(1-sigmoid.v) AS v
  FROM sigmoid;

CREATE VIEW objective AS
  SELECT (-1)*SUM((targets.v * log_sigmoid.v) + ((1-targets.v) * log_1_minus_sigmoid.v)) AS v
  FROM targets, log_sigmoid, log_1_minus_sigmoid
  WHERE targets.rowID=log_sigmoid.rowID AND log_sigmoid.rowID=log_1_minus_sigmoid.rowID;
"""

LOGREG_CFG = """\
features.table = features
features.name_column = featureName
weights.table = weights
weights.dims = 3
targets.table = targets
observations.table = observations
gd.iterations = 500
gd.learning_rate = 0.05
gd.seed = 0
"""

LINREG_SQL = """\
-- linear regression with a mean-squared-error objective
CREATE TABLE observations (rowID int, PRIMARY KEY (rowID));
CREATE TABLE features (rowID int, featureName string, v double,
  PRIMARY KEY (rowID, featureName));
CREATE TABLE targets (rowID int, v double, PRIMARY KEY (rowID));
CREATE TABLE weights (featureName string, v double, PRIMARY KEY (featureName));

CREATE VIEW predictions AS
  SELECT features.rowID AS rowID,
  SUM(features.v * weights.v) AS v
  FROM features, weights
  WHERE features.featureName = weights.featureName
  GROUP BY rowID;

CREATE VIEW squared_errors AS
  SELECT predictions.rowID AS rowID,
  POW(predictions.v - targets.v, 2) AS v
  FROM predictions, targets
  WHERE predictions.rowID = targets.rowID;

CREATE VIEW mean_squared_error AS
  SELECT AVG(squared_errors.v) AS v
  FROM squared_errors;
"""

LINREG_CFG = """\
features.table = features
features.name_column = featureName
weights.table = weights
weights.dims = 2
targets.table = targets
observations.table = observations
gd.iterations = 2000
gd.learning_rate = 0.01
gd.seed = 0
"""

# single-view objective variant of the squared-error loss
MSE_SQL = """\
-- least squares written as one objective view
CREATE TABLE observations (rowID int, PRIMARY KEY (rowID));
CREATE TABLE features (rowID int, featureName string, v double,
  PRIMARY KEY (rowID, featureName));
CREATE TABLE targets (rowID int, v double, PRIMARY KEY (rowID));
CREATE TABLE weights (featureName string, v double, PRIMARY KEY (featureName));

CREATE VIEW predictions AS
  SELECT features.rowID AS rowID,
  SUM(features.v * weights.v) AS v
  FROM features, weights
  WHERE features.featureName = weights.featureName
  GROUP BY rowID;

CREATE VIEW objective AS
  SELECT AVG(POW(predictions.v - targets.v, 2)) AS v
  FROM predictions, targets
  WHERE predictions.rowID = targets.rowID;
"""

SALES_SQL = """\
-- sales prediction over normalized one-hot feature tables
CREATE TABLE item (itemID string, PRIMARY KEY (itemID));
CREATE TABLE stores (storeID string, PRIMARY KEY (storeID));
CREATE TABLE dates (dateValue string, PRIMARY KEY (dateValue));
CREATE TABLE observations (itemID string, storeID string, dateValue string,
  PRIMARY KEY (itemID, storeID, dateValue));
CREATE TABLE familyFeat (itemID string, family string, v int,
  PRIMARY KEY (itemID, family));
CREATE TABLE cityFeat (storeID string, city string, v int,
  PRIMARY KEY (storeID, city));
CREATE TABLE sales (itemID string, storeID string, dateValue string, v double,
  PRIMARY KEY (itemID, storeID, dateValue));
CREATE TABLE familyWeights (featureName string, v double, PRIMARY KEY (featureName));
CREATE TABLE cityWeights (featureName string, v double, PRIMARY KEY (featureName));

CREATE VIEW familyProduct AS
  SELECT familyFeat.itemID AS itemID, SUM(familyFeat.v * familyWeights.v) AS v
  FROM familyFeat, familyWeights
  WHERE familyFeat.family = familyWeights.featureName
  GROUP BY familyFeat.itemID;

CREATE VIEW cityProduct AS
  SELECT cityFeat.storeID AS storeID, SUM(cityFeat.v * cityWeights.v) AS v
  FROM cityFeat, cityWeights
  WHERE cityFeat.city = cityWeights.featureName
  GROUP BY cityFeat.storeID;

CREATE VIEW predictions AS
  SELECT observations.itemID AS itemID, observations.storeID AS storeID,
  observations.dateValue AS dateValue, familyProduct.v + cityProduct.v AS v
  FROM observations, familyProduct, cityProduct
  WHERE observations.itemID = familyProduct.itemID
    AND observations.storeID = cityProduct.storeID;

CREATE VIEW objective AS
  SELECT AVG(POW(predictions.v - sales.v, 2)) AS v
  FROM predictions, sales
  WHERE predictions.itemID = sales.itemID
    AND predictions.storeID = sales.storeID
    AND predictions.dateValue = sales.dateValue;
"""

SALES_CFG = """\
features.table = familyFeat, cityFeat
features.name_column = family, city
weights.table = familyWeights, cityWeights
weights.dims = 2, 2
targets.table = sales
observations.table = observations
gd.iterations = 500
gd.learning_rate = 0.1
gd.seed = 0
"""


def write_csv(path: Path, header: list[str], rows: list[tuple]):
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def eav_rows(matrix: np.ndarray, names: list[str]) -> list[tuple]:
    rows = []
    for i in range(matrix.shape[0]):
        for j, name in enumerate(names):
            rows.append((i + 1, name, f"{matrix[i, j]:g}"))
    return rows


def make_logreg(root: Path):
    out = root / "logreg"
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.sql").write_text(LOGREG_SQL, encoding="utf-8")
    (out / "config.cfg").write_text(LOGREG_CFG, encoding="utf-8")
    rng = np.random.default_rng(7)
    n = 8
    x = rng.uniform(-2.0, 2.0, size=(n, 2))
    matrix = np.column_stack([np.ones(n), x])           # bias, x1, x2
    labels = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(float)
    write_csv(out / "observations.csv", ["rowID"], [(i + 1,) for i in range(n)])
    write_csv(out / "features.csv", ["rowID", "featureName", "v"],
              eav_rows(matrix, ["bias", "x1", "x2"]))
    write_csv(out / "targets.csv", ["rowID", "v"],
              [(i + 1, f"{labels[i]:g}") for i in range(n)])


def linreg_data(root: Path, out_name: str, sql: str, cfg: str):
    out = root / out_name
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.sql").write_text(sql, encoding="utf-8")
    (out / "config.cfg").write_text(cfg, encoding="utf-8")
    rng = np.random.default_rng(11)
    n = 12
    matrix = rng.uniform(0.0, 3.0, size=(n, 2))
    truth = np.array([1.5, -0.75])
    targets = matrix @ truth + rng.normal(0.0, 0.05, size=n)
    write_csv(out / "observations.csv", ["rowID"], [(i + 1,) for i in range(n)])
    write_csv(out / "features.csv", ["rowID", "featureName", "v"],
              eav_rows(matrix, ["price", "size"]))
    write_csv(out / "targets.csv", ["rowID", "v"],
              [(i + 1, f"{targets[i]:.6g}") for i in range(n)])


def make_sales(root: Path):
    out = root / "sales"
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.sql").write_text(SALES_SQL, encoding="utf-8")
    (out / "config.cfg").write_text(SALES_CFG, encoding="utf-8")
    items = ["item1", "item2"]
    stores = ["store1", "store2"]
    dates = ["d1", "d2", "d3"]
    family = {"item1": "grocery", "item2": "cleaning"}
    city = {"store1": "Quito", "store2": "Guayaquil"}
    effect_family = {"grocery": 2.0, "cleaning": 0.5}
    effect_city = {"Quito": 1.0, "Guayaquil": 1.75}
    observations = [(i, s, d) for i in items for s in stores for d in dates]
    write_csv(out / "observations.csv", ["itemID", "storeID", "dateValue"], observations)
    write_csv(out / "familyFeat.csv", ["itemID", "family", "v"],
              [(i, family[i], 1) for i in items])
    write_csv(out / "cityFeat.csv", ["storeID", "city", "v"],
              [(s, city[s], 1) for s in stores])
    write_csv(out / "sales.csv", ["itemID", "storeID", "dateValue", "v"],
              [(i, s, d, f"{effect_family[family[i]] + effect_city[city[s]]:g}")
               for (i, s, d) in observations])


def boston_like(n: int = 506, f: int = 13, seed: int = 3):
    """A synthetic regression dataset at housing-dataset scale."""
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(0.0, 10.0, size=(n, f))
    truth = rng.uniform(-1.0, 1.0, size=f)
    targets = matrix @ truth + rng.normal(0.0, 1.0, size=n)
    return matrix, targets


def make_boston(root: Path):
    out = root / "boston"
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.sql").write_text(LINREG_SQL, encoding="utf-8")
    matrix, targets = boston_like()
    names = [f"f{j:02d}" for j in range(matrix.shape[1])]
    cfg = LINREG_CFG.replace("weights.dims = 2", f"weights.dims = {len(names)}")
    cfg = cfg.replace("gd.learning_rate = 0.01", "gd.learning_rate = 0.000003")
    cfg = cfg.replace("gd.iterations = 2000", "gd.iterations = 10000")
    (out / "config.cfg").write_text(cfg, encoding="utf-8")
    n = matrix.shape[0]
    write_csv(out / "observations.csv", ["rowID"], [(i + 1,) for i in range(n)])
    write_csv(out / "features.csv", ["rowID", "featureName", "v"],
              [(i + 1, names[j], f"{matrix[i, j]:.10g}")
               for i in range(n) for j in range(len(names))])
    write_csv(out / "targets.csv", ["rowID", "v"],
              [(i + 1, f"{targets[i]:.10g}") for i in range(n)])


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "fixtures"
    make_logreg(root)
    linreg_data(root, "linreg", LINREG_SQL, LINREG_CFG)
    linreg_data(root, "mse", MSE_SQL, LINREG_CFG)
    make_sales(root)
    print(f"fixtures written to {root}")


if __name__ == "__main__":
    main()
