"""Cross-seed aggregation of run results and report tables."""

import logging
import os
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np
import pandas as pd

from src.errors import InvalidInput
from src.standard_formats import CorrelationReport

logger = logging.getLogger(__name__)

DEFAULT_GROUP_KEYS = ("method", "n")


def aggregate_runs(results: Iterable[Mapping[str, Any]], keys: Sequence[str] = DEFAULT_GROUP_KEYS,
                   value: str = "test_acc") -> pd.DataFrame:
    """
    Mean, sample standard deviation (divisor count - 1, 0 for a single run)
    and count of `value` per group, sorted by the group keys.
    """
    frame = pd.DataFrame(list(results))
    if frame.empty:
        raise InvalidInput("No results to aggregate")
    missing = [c for c in list(keys) + [value] if c not in frame.columns]
    if missing:
        raise InvalidInput(f"Results are missing fields: {missing}")

    grouped = frame.groupby(list(keys), sort=True)[value]
    table = grouped.agg(mean="mean", std=lambda v: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
                        count="count").reset_index()
    return table.sort_values(list(keys), kind="mergesort").reset_index(drop=True)


def format_cell(mean: float, std: float, scale: float = 100.0, digits: int = 2) -> str:
    """Table cell 'mean_{std}', e.g. 0.3638 +/- 0.0060 -> '36.38_{0.60}'."""
    return f"{mean * scale:.{digits}f}_{{{std * scale:.{digits}f}}}"


def results_table(aggregated: pd.DataFrame, row_key: str = "method", col_key: str = "n",
                  row_order: Sequence[str] = ()) -> pd.DataFrame:
    """Pivots aggregated rows into a method x budget table of formatted cells."""
    cells = aggregated.assign(cell=[format_cell(m, s) for m, s in zip(aggregated["mean"], aggregated["std"])])
    table = cells.pivot(index=row_key, columns=col_key, values="cell").sort_index(axis=1)
    if row_order:
        ordered = [r for r in row_order if r in table.index]
        ordered += [r for r in table.index if r not in ordered]
        table = table.loc[ordered]
    table.columns = [f"{col_key}={c}" for c in table.columns]
    return table.fillna("-")


def correlation_table(reports: Mapping[str, CorrelationReport]) -> pd.DataFrame:
    """One row per model label with its correlation-gap metric."""
    if not reports:
        raise InvalidInput("No correlation reports to tabulate")
    rows: List[Dict[str, Any]] = [{"model": label, "metric": r["metric"], "m": r["m"]}
                                  for label, r in reports.items()]
    return pd.DataFrame(rows, columns=["model", "metric", "m"])


def write_table(table: pd.DataFrame, path: str, index: bool = True) -> None:
    """Writes a table as aligned text (.txt) or CSV (any other suffix)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if path.endswith(".txt"):
        with open(path, "w", encoding="utf-8") as f:
            f.write(table.to_string(index=index) + "\n")
    else:
        table.to_csv(path, index=index, float_format="%.17g")
    logger.info("Wrote table %s", path)
