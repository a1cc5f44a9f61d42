"""Beta sweeps comparing vanilla MF against KL-regularized MF.

Pipeline per seed: load, split, train vanilla, rank items by top-k
appearances, fit alpha, then one KL phase per beta warm-started from the
shared vanilla model.
"""

from __future__ import annotations

import csv
import logging
import math
import statistics
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .data import RatingsDataset, Split, load_movielens, split_dataset
from .errors import ConfigError, SchemaError
from .factorization import FactorModel, TrainConfig, save_model, train_vanilla
from .kl_train import train_klmat
from .metrics import MetricsReport, evaluate, global_mean_mae, mae
from .rank_alpha import (
    AlphaModel,
    approx_ranks,
    dump_rank_diagnostics,
    fit_alpha,
    ranks_from_counts,
    recommendation_counts,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "beta", "seed", "mae_vanilla", "mae_klmat", "s_vanilla", "s_klmat",
    "symkl_vanilla", "symkl_klmat", "wall_seconds",
)
DEFAULT_BETAS = (0.0, 0.001, 0.01, 0.1, 1.0)


@dataclass(frozen=True)
class ExperimentRow:
    beta: float
    seed: int
    mae_vanilla: float
    mae_klmat: float
    s_vanilla: float
    s_klmat: float
    symkl_vanilla: float
    symkl_klmat: float
    wall_seconds: float

    def csv_fields(self):
        return [str(self.seed) if f.name == "seed" else _fmt(getattr(self, f.name))
                for f in fields(self)]


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.17g}"


@dataclass
class VanillaPhase:
    """Everything a KL phase needs that is shared across betas for one seed."""

    split: Split
    config: TrainConfig
    model: FactorModel
    alpha: AlphaModel
    counts: np.ndarray
    ranks: np.ndarray
    report: MetricsReport
    seconds: float


def _as_dataset(dataset, format) -> RatingsDataset:
    if isinstance(dataset, RatingsDataset):
        return dataset
    return load_movielens(dataset, format)


def run_vanilla_phase(ds: RatingsDataset, config: TrainConfig, top_k=10, lam=0.1,
                      split_ratio=0.9, rank_mode="max") -> VanillaPhase:
    start = time.perf_counter()
    split = split_dataset(ds, split_ratio, config.seed)
    model = train_vanilla(split.train, config)
    candidates = np.zeros(ds.num_items, dtype=bool)
    candidates[split.train.items] = True
    counts = recommendation_counts(model, top_k, candidates)
    ranks = ranks_from_counts(counts)
    alpha = fit_alpha(model.U, model.V, ranks, lam)
    logger.info("seed %d: alpha fitted in %d sweeps, %d/%d users active",
                config.seed, alpha.sweeps, int(np.count_nonzero(alpha.alpha)), len(alpha.alpha))
    report = evaluate(model, split.train, split.test, top_k, rank_mode)
    return VanillaPhase(split, config, model, alpha, counts, ranks, report,
                        time.perf_counter() - start)


def run_klmat_phase(phase: VanillaPhase, beta: float, top_k=10, rank_mode="max"):
    start = time.perf_counter()
    config = phase.config.with_beta(beta)
    model = train_klmat(phase.split.train, config, phase.alpha, phase.model)
    report = evaluate(model, phase.split.train, phase.split.test, top_k, rank_mode)
    row = ExperimentRow(
        beta=float(beta),
        seed=int(config.seed),
        mae_vanilla=phase.report.mae,
        mae_klmat=report.mae,
        s_vanilla=phase.report.matthew_s,
        s_klmat=report.matthew_s,
        symkl_vanilla=phase.report.sym_kl_to_uniform,
        symkl_klmat=report.sym_kl_to_uniform,
        wall_seconds=phase.seconds + time.perf_counter() - start,
    )
    logger.info(
        "beta=%g seed=%d mae %.4f -> %.4f, symKL %.4f -> %.4f, s(max) %.6g -> %.6g, "
        "s(min) %.6g -> %.6g", beta, config.seed, row.mae_vanilla, row.mae_klmat,
        row.symkl_vanilla, row.symkl_klmat, phase.report.matthew_s_max, report.matthew_s_max,
        phase.report.matthew_s_min, report.matthew_s_min,
    )
    return row, model, report


def run_single(dataset, format="csv_small", config: TrainConfig | None = None, top_k=10,
               lam=0.1, split_ratio=0.9, rank_mode="max") -> ExperimentRow:
    """One (beta, seed) cell; beta and seed come from ``config``."""
    config = config or TrainConfig()
    ds = _as_dataset(dataset, format)
    phase = run_vanilla_phase(ds, config, top_k, lam, split_ratio, rank_mode)
    return run_klmat_phase(phase, config.beta, top_k, rank_mode)[0]


def run_sweep(dataset, format="csv_small", base_config: TrainConfig | None = None,
              betas=DEFAULT_BETAS, seeds=(1, 2, 3), out_csv=None, top_k=10, lam=0.1,
              split_ratio=0.9, rank_mode="max", dump_ranks=None, model_dir=None,
              raw_dot_mae=False) -> list[ExperimentRow]:
    """Cartesian product of ``betas`` x ``seeds``; rows streamed to ``out_csv``.

    The vanilla phase runs once per seed. The CSV is rewritten sorted by
    (seed, beta) at the end so its content does not depend on arrival order.
    """
    betas, seeds = list(betas), list(seeds)
    if not betas or not seeds:
        raise ConfigError("betas and seeds must be non-empty")
    base_config = base_config or TrainConfig()
    fh = writer = None
    if out_csv is not None:
        # fail on an unwritable path before any training
        fh = open(Path(out_csv), "w", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
    try:
        ds = _as_dataset(dataset, format)
        logger.info("dataset: %d ratings, %d users, %d items, r_max %g",
                    len(ds), ds.num_users, ds.num_items, ds.r_max)
        rows = []
        for seed in seeds:
            config = replace(base_config, seed=int(seed))
            phase = run_vanilla_phase(ds, config, top_k, lam, split_ratio, rank_mode)
            logger.info("seed %d: %d cold-start test ratings skipped, global-mean MAE %.4f",
                        seed, phase.report.skipped_cold_start,
                        global_mean_mae(phase.split.train, phase.split.test))
            if dump_ranks is not None:
                path = Path(str(dump_ranks).format(seed=seed))
                approx = approx_ranks(phase.alpha, phase.model.U, phase.model.V)
                dump_rank_diagnostics(path, phase.counts, phase.ranks, approx)
            if model_dir is not None:
                save_model(phase.model, Path(model_dir) / f"vanilla_seed{seed}.txt")
            for beta in betas:
                row, model, _ = run_klmat_phase(phase, beta, top_k, rank_mode)
                if raw_dot_mae:
                    logger.info("raw-dot MAE beta=%g seed=%d: vanilla %.4f klmat %.4f", beta, seed,
                                mae(phase.model, phase.split.test, phase.split.train, raw_dot=True),
                                mae(model, phase.split.test, phase.split.train, raw_dot=True))
                if model_dir is not None:
                    save_model(model, Path(model_dir) / f"klmat_seed{seed}_beta{beta:g}.txt")
                rows.append(row)
                if writer is not None:
                    writer.writerow(row.csv_fields())
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    rows.sort(key=lambda r: (r.seed, r.beta))
    if out_csv is not None:
        write_rows(rows, out_csv)
    return rows


def write_rows(rows, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row.csv_fields())


def read_rows(path) -> list[ExperimentRow]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise SchemaError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise SchemaError(f"{path}: line {lineno} has {len(rec)} fields")
            try:
                vals = [int(v) if c == "seed" else float(v) for c, v in zip(CSV_COLUMNS, rec)]
            except ValueError as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from None
            rows.append(ExperimentRow(*vals))
    return rows


def sweep_summary(rows) -> dict:
    """Per-beta means over seeds plus the spread of KL-phase MAE across betas."""
    by_beta: dict = {}
    for r in rows:
        by_beta.setdefault(r.beta, []).append(r)

    def mean(xs):
        xs = [x for x in xs if not math.isnan(x)]
        return statistics.fmean(xs) if xs else math.nan

    per_beta = {
        beta: {
            "mae_vanilla": mean([r.mae_vanilla for r in rs]),
            "mae_klmat": mean([r.mae_klmat for r in rs]),
            "symkl_vanilla": mean([r.symkl_vanilla for r in rs]),
            "symkl_klmat": mean([r.symkl_klmat for r in rs]),
            "abs_s_vanilla": mean([abs(r.s_vanilla) for r in rs]),
            "abs_s_klmat": mean([abs(r.s_klmat) for r in rs]),
        }
        for beta, rs in sorted(by_beta.items())
    }
    klmat_maes = [v["mae_klmat"] for v in per_beta.values()]
    vanilla_by_seed = {r.seed: r.mae_vanilla for r in rows}
    return {
        "per_beta": per_beta,
        "std_mae_klmat_across_beta": statistics.pstdev(klmat_maes) if klmat_maes else math.nan,
        "std_mae_vanilla_across_seed": statistics.pstdev(vanilla_by_seed.values()),
    }


_PLOT_TEMPLATE = """\
# MAE and Degree of Matthew Effect against beta, vanilla MF vs KL-regularized MF.
set datafile separator ","
set key autotitle columnhead
set key top left
set xlabel "beta"
set grid
set terminal pngcairo size 900,600
data = "{csv}"

set output "{stem}_mae.png"
set ylabel "MAE"
plot data using (column("beta")):(column("mae_vanilla")) with points pt 7 title "Vanilla MF", \\
     data using (column("beta")):(column("mae_klmat")) with points pt 5 title "KL-Mat"

set output "{stem}_matthew.png"
set ylabel "Degree of Matthew Effect"
plot data using (column("beta")):(column("s_vanilla")) with points pt 7 title "Vanilla MF", \\
     data using (column("beta")):(column("s_klmat")) with points pt 5 title "KL-Mat"
"""


def emit_plot_script(csv_path, out_path) -> Path:
    """Write a gnuplot script plotting MAE and Matthew-effect curves from a sweep CSV."""
    rows = read_rows(csv_path)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    out_path = Path(out_path)
    stem = out_path.with_suffix("").name
    script = _PLOT_TEMPLATE.format(csv=Path(csv_path).as_posix(), stem=stem)
    out_path.write_text(script, encoding="utf-8")
    return out_path
