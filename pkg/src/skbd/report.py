"""Shared result rendering: decision reports, table serialization, and OC
rows.

The CLI and the HTTP service must show identical numbers for identical
inputs, so both render through these helpers. Floats are canonicalized to
ten significant digits, which keeps text, CSV, and JSON byte-stable across
runs and thread counts.
"""

from __future__ import annotations

import io
from typing import Optional, Sequence

from .core import (
    DecisionTable,
    DesignConfig,
    TrialState,
    bkp_posterior,
    decide,
    strongest_key,
)
from .engine import OCSummary
from .numerics import reg_inc_beta

__all__ = [
    "round10",
    "decision_report",
    "table_to_rows",
    "table_to_text",
    "table_to_csv",
    "oc_rows",
    "oc_to_csv",
    "beta_density_samples",
]


def round10(value: float) -> float:
    """Canonicalize a float to ten significant digits."""
    return float(f"{value:.10g}")


def _opt(value: Optional[float]) -> Optional[float]:
    return None if value is None else round10(value)


def beta_density_samples(alpha: float, beta: float, points: int = 201) -> dict:
    """Beta density sampled on an equally spaced grid for plotting."""
    import math

    ln_norm = math.lgamma(alpha + beta) - math.lgamma(alpha) - math.lgamma(beta)
    xs = []
    ys = []
    for i in range(points):
        x = i / (points - 1)
        xs.append(round10(x))
        if 0.0 < x < 1.0:
            y = math.exp(
                ln_norm + (alpha - 1.0) * math.log(x) + (beta - 1.0) * math.log1p(-x)
            )
        else:
            # Exact endpoints are drawn at zero; a pole there (shape < 1)
            # is represented by the finite neighbouring samples.
            y = 0.0
        ys.append(round10(y))
    return {"x": xs, "y": ys}


def decision_report(config: DesignConfig, state: TrialState) -> dict:
    """Everything a client needs to display one interim decision."""
    action = decide(config, state)
    posterior, y_prime, n_prime = bkp_posterior(config, state)
    keys = config.keys()
    cdf = [reg_inc_beta(b, posterior) for b in keys.boundaries]
    key_probs = [hi - lo for lo, hi in zip(cdf, cdf[1:])]
    strongest = strongest_key(posterior, keys)
    return {
        "action": action.value,
        "posterior": {"alpha": round10(posterior.alpha), "beta": round10(posterior.beta)},
        "pseudo_counts": {"y_prime": round10(y_prime), "n_prime": round10(n_prime)},
        "keys": [
            {
                "lo": round10(lo),
                "hi": round10(hi),
                "probability": round10(p),
            }
            for (lo, hi), p in zip(
                zip(keys.boundaries, keys.boundaries[1:]), key_probs
            )
        ],
        "strongest_key": strongest,
        "target_key": keys.target_index,
        "density": beta_density_samples(posterior.alpha, posterior.beta),
    }


def table_to_rows(table: DecisionTable) -> list[dict]:
    return [
        {
            "n": n,
            "escalate_le": esc,
            "deescalate_ge": dee,
            "eliminate_ge": eli,
        }
        for n, esc, dee, eli in zip(
            table.n_values, table.escalate_le, table.deescalate_ge, table.eliminate_ge
        )
    ]


def _cell(value: Optional[int]) -> str:
    return "NA" if value is None else str(value)


def table_to_text(table: DecisionTable, title: str) -> str:
    width = max(3, *(len(_cell(v)) + 1 for v in table.n_values))
    label_width = 26

    def row(label: str, cells: Sequence[Optional[int]]) -> str:
        body = "".join(f"{_cell(c):>{width}}" for c in cells)
        return f"{label:<{label_width}}{body}"

    lines = [
        title,
        row("Number treated", table.n_values),
        row("Escalate if #DLT <=", table.escalate_le),
        row("De-escalate if #DLT >=", table.deescalate_ge),
        row("Eliminate if #DLT >=", table.eliminate_ge),
    ]
    return "\n".join(lines) + "\n"


def table_to_csv(table: DecisionTable) -> str:
    out = io.StringIO()
    out.write("n,escalate_le,deescalate_ge,eliminate_ge\n")
    for row in table_to_rows(table):
        cells = [
            str(row["n"]),
            "" if row["escalate_le"] is None else str(row["escalate_le"]),
            "" if row["deescalate_ge"] is None else str(row["deescalate_ge"]),
            "" if row["eliminate_ge"] is None else str(row["eliminate_ge"]),
        ]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


OC_FIELDS = [
    "pcs",
    "pca",
    "above_mtd",
    "rod",
    "none_selected",
    "modification_rate",
    "inserted_mean",
    "inserted_sd",
    "inserted_selection",
    "inserted_allocation",
]


def oc_rows(results: Sequence[tuple[str, str, OCSummary]]) -> list[dict]:
    """Flatten (scenario, design, summary) triples into serializable rows."""
    rows = []
    for scenario_name, design_name, oc in results:
        row: dict = {
            "scenario": scenario_name,
            "design": design_name,
            "replicates": oc.replicates,
            "seed": oc.seed,
        }
        for fieldname in OC_FIELDS:
            row[fieldname] = _opt(getattr(oc, fieldname))
        row["per_dose_selection"] = [round10(v) for v in oc.per_dose_selection]
        row["per_dose_allocation"] = [round10(v) for v in oc.per_dose_allocation]
        rows.append(row)
    return rows


def oc_to_csv(rows: Sequence[dict], manifest_line: Optional[str] = None) -> str:
    """Render OC rows as CSV; per-dose vectors are semicolon-joined cells."""
    out = io.StringIO()
    if manifest_line is not None:
        out.write(f"# {manifest_line}\n")
    header = ["scenario", "design", "replicates", "seed", *OC_FIELDS,
              "per_dose_selection", "per_dose_allocation"]
    out.write(",".join(header) + "\n")
    for row in rows:
        cells = []
        for key in header:
            value = row[key]
            if value is None:
                cells.append("")
            elif isinstance(value, list):
                cells.append(";".join(f"{v:.10g}" for v in value))
            elif isinstance(value, float):
                cells.append(f"{value:.10g}")
            else:
                cells.append(str(value))
        out.write(",".join(cells) + "\n")
    return out.getvalue()
