"""Monte Carlo experiments: sample, measure, compare against the theory.

A run writes three files into its output directory:

``raw.csv``
    one row per (replicate, level), columns in RAW_COLUMNS order;
``summary.json``
    aggregate statistics, a pure function of ``raw.csv`` (``summarize_csv``
    rebuilds it byte for byte);
``metadata.json``
    config echo, wall time and a content hash.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .chaos import centered_norm, regress_on_w
from .errors import InsufficientData, SchemaMismatch
from .geometry import measure
from .lattice import enumerate_frequencies
from .sampler import auto_resolution, draw_coefficients, evaluate_on_grid, min_resolution
from .theory import (
    c_coefficient,
    energy,
    expected_lkc,
    is_degenerate_level,
    leading_variance,
    nodal_length_variance,
    second_chaos_scale,
)
from .errors import ResolutionTooLow

RAW_COLUMNS = (
    "replicate", "n", "u", "L2", "L1", "L0_cubical", "L0_morse", "w",
    "proj2_k0", "proj2_k1", "proj2_k2",
)
_INT_COLUMNS = {"replicate", "n", "L0_cubical"}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    levels: tuple[float, ...]
    replicates: int
    resolution: int = 0  # 0 picks 8 * ceil(sqrt(n))
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(u) for u in self.levels))
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.levels:
            raise ValueError("at least one level is required")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.resolution < 0:
            raise ValueError("resolution must be >= 0")

    @property
    def grid(self) -> int:
        return self.resolution or auto_resolution(self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def _replicate_rows(n: int, levels: Sequence[float], M: int, seed: int, replicate: int) -> list[tuple]:
    fs = enumerate_frequencies(n)
    draw = draw_coefficients(fs, seed, replicate)
    grid = evaluate_on_grid(draw, M)
    w = centered_norm(draw)
    rows = []
    for m in measure(grid, levels):
        proj = [second_chaos_scale(k, n, m.u) * w for k in (0, 1, 2)]
        morse = float(m.euler_morse) if m.euler_morse is not None else math.nan
        rows.append((replicate, n, m.u, m.area, m.half_boundary, m.euler_cubical, morse, w, *proj))
    return rows


def _chunk_rows(args):
    n, levels, M, seed, reps = args
    return [row for r in reps for row in _replicate_rows(n, levels, M, seed, r)]


def generate_rows(cfg: ExperimentConfig) -> list[tuple]:
    fs = enumerate_frequencies(cfg.n)  # surfaces NotSumOfTwoSquares before any work
    M = cfg.grid
    if M < min_resolution(fs.n):
        raise ResolutionTooLow(f"M={M} is below 4*ceil(sqrt(n))={min_resolution(fs.n)}")
    reps = list(range(cfg.replicates))
    if cfg.workers == 1 or cfg.replicates == 1:
        rows = _chunk_rows((cfg.n, cfg.levels, M, cfg.base_seed, reps))
    else:
        chunks = [reps[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_chunk_rows, [(cfg.n, cfg.levels, M, cfg.base_seed, c) for c in chunks if c])
            rows = [row for part in parts for row in part]
    level_order = {u: i for i, u in enumerate(cfg.levels)}
    rows.sort(key=lambda r: (r[0], level_order[r[2]]))
    return rows


# ---------------------------------------------------------------------------
# CSV


def _fmt(col, v) -> str:
    if col in _INT_COLUMNS:
        return str(int(v))
    return repr(float(v))


def rows_to_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RAW_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(c, v) for c, v in zip(RAW_COLUMNS, row)])
    return buf.getvalue()


def parse_csv(text: str) -> list[tuple]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("file is empty; expected a header row", column=RAW_COLUMNS[0]) from None
    if tuple(header) != RAW_COLUMNS:
        for i, col in enumerate(RAW_COLUMNS):
            if i >= len(header) or header[i] != col:
                raise SchemaMismatch(f"header column {i} should be {col!r}", column=col)
        raise SchemaMismatch(f"unexpected extra column {header[len(RAW_COLUMNS)]!r}", column=header[len(RAW_COLUMNS)])
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(RAW_COLUMNS):
            col = RAW_COLUMNS[min(len(rec), len(RAW_COLUMNS) - 1)]
            raise SchemaMismatch(f"line {lineno} has {len(rec)} fields, expected {len(RAW_COLUMNS)}", column=col)
        row = []
        for col, val in zip(RAW_COLUMNS, rec):
            try:
                row.append(int(val) if col in _INT_COLUMNS else float(val))
            except ValueError:
                raise SchemaMismatch(f"line {lineno}: {val!r} is not a valid {col}", column=col) from None
        rows.append(tuple(row))
    _check_complete(rows)
    return rows


def _check_complete(rows):
    if not rows:
        return
    ns = {r[1] for r in rows}
    if len(ns) != 1:
        raise SchemaMismatch("rows mix several energy indices", column="n")
    by_rep: dict[int, list[float]] = {}
    for r in rows:
        by_rep.setdefault(r[0], []).append(r[2])
    level_sets = {tuple(v) for v in by_rep.values()}
    if len(level_sets) != 1:
        raise SchemaMismatch("replicates do not all carry the same levels (truncated file?)", column="u")
    if sorted(by_rep) != list(range(len(by_rep))):
        raise SchemaMismatch("replicate indices are not 0..R-1", column="replicate")


# ---------------------------------------------------------------------------
# statistics


def normality_statistic(standardized) -> float:
    """Kolmogorov-Smirnov distance to the standard normal law."""
    x = np.asarray(standardized, dtype=float)
    if x.size < 50:
        raise InsufficientData(f"need at least 50 values, got {x.size}")
    return float(stats.kstest(x, "norm").statistic)


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


_CURVATURE_COLUMN = {2: "L2", 1: "L1"}


def _l0_column(table) -> str:
    """Morse counts drive L0 statistics unless any of them is missing."""
    return "L0_morse" if np.all(np.isfinite(table["L0_morse"])) else "L0_cubical"


def _table(rows, levels):
    arr = {c: np.array([r[i] for r in rows], dtype=float) for i, c in enumerate(RAW_COLUMNS)}
    R = len(rows) // len(levels)
    return {c: v.reshape(R, len(levels)) for c, v in arr.items()}, R


def summarize_rows(rows: Sequence[tuple]) -> dict:
    """Aggregate statistics; a pure function of the raw rows."""
    if not rows:
        return {"replicates": 0, "cells": [], "correlation": None, "berry": None}
    n = int(rows[0][1])
    levels = []
    for r in rows:
        if r[0] != rows[0][0]:
            break
        levels.append(float(r[2]))
    fs = enumerate_frequencies(n)
    N, E = fs.multiplicity, fs.energy
    table, R = _table(rows, levels)
    l0col = _l0_column(table)
    w = table["w"][:, 0]

    cells = []
    series = {}
    for k in (2, 1, 0):
        col = _CURVATURE_COLUMN.get(k, l0col)
        for j, u in enumerate(levels):
            x = table[col][:, j]
            mean = float(np.mean(x))
            var = float(np.var(x, ddof=1)) if R > 1 else None
            theory_mean = float(expected_lkc(k, n, u))
            theory_var = float(leading_variance(k, n, N, u))
            cell = {
                "k": k,
                "u": u,
                "estimator": col,
                "sample_mean": mean,
                "theory_mean": theory_mean,
                "sample_variance": var,
                "theory_leading_variance": theory_var,
                "variance_ratio": (var / theory_var) if (var is not None and theory_var > 0) else None,
                "mean_within_3se": (abs(mean - theory_mean) <= 3 * math.sqrt(var / R)) if var is not None else None,
                "ks_statistic": None,
                "slope_vs_w": None,
                "theory_slope": float(second_chaos_scale(k, n, u)),
                "residual_variance": None,
                "degenerate_level": is_degenerate_level(k, u),
                "conditional_on_condition_1": k == 0,
            }
            if R >= 50 and var is not None:
                sd = math.sqrt(var)
                z = (x - mean) / sd if sd > 0 else np.zeros_like(x)
                cell["ks_statistic"] = normality_statistic(z)
            if R >= 30 and np.ptp(w) > 0:
                reg = regress_on_w(np.column_stack([w, x - mean]))
                cell["slope_vs_w"] = reg.slope
                cell["residual_variance"] = reg.residual_variance
            cells.append(cell)
            if not is_degenerate_level(k, u):
                series[f"L{k}({u!r})"] = (x, math.copysign(1.0, cell["theory_slope"]))

    correlation = None
    if R > 2 and len(series) >= 2:
        labels = list(series)
        mat = np.corrcoef(np.vstack([series[l][0] for l in labels]))
        # each cell follows sign(c_k(u)) * W, so full correlation means |corr| -> 1
        # with the sign fixed by the two leading coefficients
        signs = np.array([series[l][1] for l in labels])
        aligned = mat * np.outer(signs, signs)
        off = ~np.eye(len(labels), dtype=bool)
        min_aligned = float(np.min(aligned[off]))
        correlation = {
            "cells": labels,
            "matrix": mat.tolist(),
            "min_offdiagonal": float(np.min(mat[off])),
            "sign_adjusted_matrix": aligned.tolist(),
            "min_sign_adjusted": min_aligned,
            "fitted_C": (1.0 - min_aligned) * math.sqrt(N),
        }

    berry = None
    try:
        berry = berry_cancellation_check(rows)
    except InsufficientData:
        pass
    return _clean({
        "n": n,
        "multiplicity": N,
        "mu4": fs.mu4,
        "energy": E,
        "levels": levels,
        "replicates": R,
        "l0_estimator": l0col,
        "cells": cells,
        "correlation": correlation,
        "berry": berry,
    })


def berry_cancellation_check(rows: Sequence[tuple], min_replicates: int = 100) -> dict:
    """Compare the nodal (u = 0) boundary variance with its 1/N^2 prediction.

    Also reports the 1/N scaling at every other level, and the ratio of
    each of those variances to the nodal one, which should exceed N/4.
    """
    if not rows:
        raise InsufficientData("no rows")
    n = int(rows[0][1])
    levels = []
    for r in rows:
        if r[0] != rows[0][0]:
            break
        levels.append(float(r[2]))
    if 0.0 not in levels:
        raise InsufficientData("the nodal level u = 0 is not among the measured levels")
    table, R = _table(rows, levels)
    if R < min_replicates:
        raise InsufficientData(f"need at least {min_replicates} replicates, got {R}")
    fs = enumerate_frequencies(n)
    N, E, mu = fs.multiplicity, fs.energy, fs.mu4
    j0 = levels.index(0.0)
    var0 = float(np.var(table["L1"][:, j0], ddof=1))
    target = (1.0 + mu * mu) / 2048.0
    ratio = var0 * N * N / E
    others = {}
    for j, u in enumerate(levels):
        if u == 0.0:
            continue
        var_u = float(np.var(table["L1"][:, j], ddof=1))
        c1 = float(c_coefficient(1, u))
        others[repr(u)] = {
            "scaled_variance": var_u * N / E,
            "c1_squared": c1 * c1,
            "ratio_to_prediction": var_u * N / E / (c1 * c1) if c1 != 0 else None,
            "order_gap": var_u / var0 if var0 > 0 else None,
        }
    return _clean({
        "replicates": R,
        "nodal_scaled_variance": ratio,
        "nodal_prediction": target,
        "nodal_ratio_to_prediction": ratio / target,
        "nodal_variance": var0,
        "nodal_leading_variance": nodal_length_variance(n, N, mu),
        "required_gap": N / 4.0,
        "levels": others,
    })


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def summarize_csv(text: str) -> str:
    return summary_json(summarize_rows(parse_csv(text)))


# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    summary: dict
    metadata: dict = field(default_factory=dict)
    csv_text: str = ""


def _content_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps({"config": cfg.to_dict(), "version": __version__}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[os.PathLike] = None) -> ExperimentReport:
    start = time.perf_counter()
    rows = generate_rows(cfg)
    csv_text = rows_to_csv(rows)
    # the summary is built from the serialized CSV so that it matches a later `report` exactly
    summary = summarize_rows(parse_csv(csv_text))
    metadata = {
        "config": cfg.to_dict(),
        "grid": cfg.grid,
        "wall_time_seconds": time.perf_counter() - start,
        "content_hash": _content_hash(cfg),
        "version": __version__,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_atomic(out / "raw.csv", csv_text)
        _write_atomic(out / "summary.json", summary_json(summary))
        _write_atomic(out / "metadata.json", json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    return ExperimentReport(cfg, rows, summary, metadata, csv_text)
