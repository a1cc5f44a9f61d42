import math
import shutil
import subprocess

import pytest

from klmat.cli import main
from klmat.errors import ConfigError, SchemaError
from klmat.experiment import (
    CSV_COLUMNS,
    emit_plot_script,
    read_rows,
    run_single,
    run_sweep,
    sweep_summary,
)
from klmat.factorization import TrainConfig
from klmat.synthetic import synthetic_dataset, synthetic_ratings, write_csv_small

FAST = TrainConfig(epochs=3, seed=1)


@pytest.fixture(scope="module")
def ratings_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ratings.csv"
    write_csv_small(synthetic_ratings(num_users=80, num_items=200, mean_per_user=20, seed=4), path)
    return path


def strip_wall(path):
    return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()]


def test_single_row_finite(ratings_csv):
    row = run_single(ratings_csv, "csv_small", FAST.with_beta(0.1), top_k=5)
    assert row.beta == 0.1 and row.seed == 1
    assert all(math.isfinite(getattr(row, c)) for c in CSV_COLUMNS)
    assert row.mae_vanilla >= 0 and row.symkl_klmat >= 0


def test_zero_extra_epochs_reduces_to_vanilla(ratings_csv):
    cfg = TrainConfig(epochs=3, seed=2, klmat_epochs=0)
    row = run_single(ratings_csv, "csv_small", cfg, top_k=5)
    assert row.mae_klmat == row.mae_vanilla
    assert row.symkl_klmat == row.symkl_vanilla
    assert row.s_klmat == row.s_vanilla


def test_single_run_deterministic(ratings_csv):
    a = run_single(ratings_csv, "csv_small", FAST.with_beta(1.0), top_k=5)
    b = run_single(ratings_csv, "csv_small", FAST.with_beta(1.0), top_k=5)
    assert a.csv_fields()[:-1] == b.csv_fields()[:-1]


def test_sweep_rows_and_csv(ratings_csv, tmp_path):
    out = tmp_path / "r.csv"
    rows = run_sweep(ratings_csv, "csv_small", FAST, [0, 0.01, 0.1, 1], [1, 2, 3], out, top_k=5)
    assert len(rows) == 12
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 13
    assert [(r.seed, r.beta) for r in read_rows(out)] == [(r.seed, r.beta) for r in rows]
    # vanilla readouts shared across betas within a seed
    for seed in (1, 2, 3):
        assert len({r.mae_vanilla for r in rows if r.seed == seed}) == 1


def test_sweep_reproducible(ratings_csv, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run_sweep(ratings_csv, "csv_small", FAST, [0, 1], [1, 2], p, top_k=5)
    assert strip_wall(a) == strip_wall(b)


def test_unwritable_output_fails_first(tmp_path):
    with pytest.raises(OSError):
        run_sweep(tmp_path / "missing.csv", "csv_small", FAST, [0], [1], tmp_path / "no" / "r.csv")


def test_empty_grid():
    with pytest.raises(ConfigError):
        run_sweep(synthetic_dataset(), "csv_small", FAST, [], [1])


def test_summary(ratings_csv):
    rows = run_sweep(ratings_csv, "csv_small", FAST, [0, 0.1, 1], [1, 2], top_k=5)
    s = sweep_summary(rows)
    assert set(s["per_beta"]) == {0.0, 0.1, 1.0}
    assert math.isfinite(s["std_mae_klmat_across_beta"])


def test_dump_and_models(ratings_csv, tmp_path):
    run_sweep(ratings_csv, "csv_small", FAST, [0.5], [7], top_k=5,
              dump_ranks=tmp_path / "ranks_{seed}.csv", model_dir=tmp_path)
    assert (tmp_path / "ranks_7.csv").read_text().startswith("item,count,rank,approx_rank\n")
    assert (tmp_path / "vanilla_seed7.txt").exists()
    assert (tmp_path / "klmat_seed7_beta0.5.txt").exists()


class TestPlot:
    @pytest.fixture
    def sweep_csv(self, ratings_csv, tmp_path):
        out = tmp_path / "sweep.csv"
        run_sweep(ratings_csv, "csv_small", FAST, [0, 0.01, 0.1, 1], [1, 2, 3], out, top_k=5)
        return out

    def test_script_references_four_series(self, sweep_csv, tmp_path):
        script = emit_plot_script(sweep_csv, tmp_path / "fig.gp").read_text()
        for col in ("mae_vanilla", "mae_klmat", "s_vanilla", "s_klmat"):
            assert script.count(f'column("{col}")') == 1
        assert "symkl" not in script

    def test_empty_body(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text(",".join(CSV_COLUMNS) + "\n")
        with pytest.raises(SchemaError):
            emit_plot_script(p, tmp_path / "x.gp")

    def test_missing_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("beta,seed,mae_vanilla\n0,1,0.5\n")
        with pytest.raises(SchemaError):
            emit_plot_script(p, tmp_path / "x.gp")

    @pytest.mark.skipif(shutil.which("gnuplot") is None, reason="gnuplot not installed")
    def test_renders(self, sweep_csv, tmp_path):
        script = emit_plot_script(sweep_csv, tmp_path / "fig.gp")
        subprocess.run(["gnuplot", str(script)], cwd=tmp_path, check=True)
        assert (tmp_path / "fig_mae.png").exists()


class TestCLI:
    def test_run_and_plot(self, ratings_csv, tmp_path, capsys):
        out = tmp_path / "r.csv"
        rc = main(["run", "--dataset", str(ratings_csv), "--epochs", "2", "--betas", "0,1",
                   "--seeds", "1,2", "--top-k", "5", "--out", str(out), "--summary"])
        assert rc == 0
        assert len(out.read_text().splitlines()) == 5
        assert "std_mae_klmat_across_beta" in capsys.readouterr().out
        assert main(["plot", "--csv", str(out), "--out", str(tmp_path / "p.gp")]) == 0

    def test_single_beta_seed(self, ratings_csv, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["run", "--dataset", str(ratings_csv), "--epochs", "2", "--beta", "0.1",
                     "--seed", "4", "--top-k", "5", "--out", str(out)]) == 0
        (row,) = read_rows(out)
        assert (row.beta, row.seed) == (0.1, 4)

    def test_exit_codes(self, ratings_csv, tmp_path):
        out = str(tmp_path / "r.csv")
        assert main(["run", "--dataset", str(tmp_path / "nope.csv"), "--out", out]) == 2
        assert main(["run", "--dataset", str(ratings_csv), "--split", "1.5", "--out", out]) == 1
        assert main(["run", "--dataset", str(ratings_csv), "--epochs", "0", "--out", out]) == 1
        bad = tmp_path / "bad.csv"
        bad.write_text("userId,movieId,rating,timestamp\n1,2,oops,3\n")
        assert main(["run", "--dataset", str(bad), "--out", out]) == 2
        assert main(["plot", "--csv", str(bad), "--out", str(tmp_path / "p.gp")]) == 2

    def test_numeric_failure_exit_code(self, ratings_csv, tmp_path):
        rc = main(["run", "--dataset", str(ratings_csv), "--lr", "1e300", "--epochs", "1",
                   "--beta", "0", "--seed", "1", "--out", str(tmp_path / "r.csv")])
        assert rc == 3

    def test_synth(self, tmp_path):
        p = tmp_path / "s.csv"
        assert main(["synth", "--out", str(p), "--users", "10", "--items", "30"]) == 0
        assert p.read_text().startswith("userId,movieId,rating,timestamp\n")


@pytest.mark.slow
def test_directional_checks_on_synthetic_stand_in():
    """The MovieLens-Small sweep checks, run on synthetic data of the same shape.

    Supplementary only: these numbers come from Zipf-distributed synthetic
    ratings, not from MovieLens.
    """
    ds = synthetic_dataset(num_users=610, num_items=9724, mean_per_user=165, seed=1)
    rows = run_sweep(ds, "csv_small", TrainConfig(), seeds=(1, 2, 3))
    summary = sweep_summary(rows)
    per_beta = summary["per_beta"]
    assert any(s["symkl_klmat"] < s["symkl_vanilla"] for b, s in per_beta.items() if b > 0)
    assert max(abs(r.mae_klmat - r.mae_vanilla) / r.mae_vanilla for r in rows) <= 0.25
    assert math.isfinite(summary["std_mae_klmat_across_beta"])
