import csv
import subprocess
import sys

import numpy as np
import pytest

from _oracles import two_blobs
from edsvc import estimator as est
from edsvc.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    RunConfig,
    main,
    read_scan_csv,
    run_pipeline,
)
from edsvc.ensemble import read_ensemble_csv
from edsvc.metrics import nmi
from edsvc.svc_core import ConvergenceError

FAST = ["--n-q", "8", "--n-c", "4", "-m", "4"]


@pytest.fixture(scope="module")
def blob_csv(tmp_path_factory):
    X, y = two_blobs(n_per=12, gap=3.0, seed=2)
    path = tmp_path_factory.mktemp("data") / "blobs.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "class"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(row[0])), repr(float(row[1])), "ab"[lab]])
    return path


@pytest.fixture(scope="module")
def unlabeled_csv(blob_csv, tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "blobs_nolabel.csv"
    with open(blob_csv) as src, open(path, "w") as dst:
        for line in src:
            dst.write(line.rsplit(",", 1)[0] + "\n")
    return path


def report(out):
    pairs = (line.split(" = ", 1) for line in (out / "report.txt").read_text().splitlines())
    return dict(pairs)


class TestRun:
    def test_with_labels(self, blob_csv, tmp_path):
        assert main(["run", str(blob_csv), "-l", "last", "-o", str(tmp_path), *FAST]) == EXIT_OK
        for name in ("report.txt", "labels.csv", "ensemble.csv", "scan_q.csv", "scan_c.csv"):
            assert (tmp_path / name).exists()
        rep = report(tmp_path)
        assert rep["n_points"] == "24" and rep["n_classes"] == "2"
        assert float(rep["final_nmi"]) == 1.0
        assert "base_nmi_mean" in rep and "base_nmi_member_3" in rep

    def test_report_recomputable_from_files(self, blob_csv, tmp_path):
        main(["run", str(blob_csv), "-l", "last", "-o", str(tmp_path), *FAST])
        rep = report(tmp_path)
        with open(tmp_path / "labels.csv") as fh:
            rows = list(csv.DictReader(fh))
        truth = [r["truth"] for r in rows]
        pred = [int(r["cluster"]) for r in rows]
        assert nmi(truth, pred) == float(rep["final_nmi"])
        ens = read_ensemble_csv(tmp_path / "ensemble.csv")
        base = np.mean([nmi(truth, m) for m in ens.labels])
        assert base == pytest.approx(float(rep["base_nmi_mean"]), abs=1e-15)

    def test_without_labels(self, unlabeled_csv, tmp_path):
        assert main(["run", str(unlabeled_csv), "-o", str(tmp_path), *FAST]) == EXIT_OK
        rep = report(tmp_path)
        assert "final_nmi" not in rep and "base_nmi_mean" not in rep
        assert (tmp_path / "labels.csv").read_text().splitlines()[0] == "index,cluster"
        assert (tmp_path / "scan_q.csv").exists()

    def test_scan_csv_layout(self, blob_csv, tmp_path):
        main(["run", str(blob_csv), "-l", "last", "-o", str(tmp_path), *FAST])
        rows = read_scan_csv(tmp_path / "scan_q.csv")
        assert list(rows[0]) == list(est.SCAN_COLUMNS)
        assert len(rows) == 8 and {r["stage"] for r in rows} == {"q"}
        assert len(read_scan_csv(tmp_path / "scan_c.csv")) == 4

    def test_byte_identical_reruns(self, blob_csv, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", str(blob_csv), "-l", "last", "-o", str(a), *FAST])
        main(["run", str(blob_csv), "-l", "last", "-o", str(b), *FAST])
        for name in ("scan_q.csv", "scan_c.csv", "labels.csv", "ensemble.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_cache_distances(self, blob_csv, tmp_path):
        args = ["run", str(blob_csv), "-l", "last", *FAST, "--cache-distances"]
        assert main([*args, "-o", str(tmp_path / "a")]) == EXIT_OK
        assert list(blob_csv.parent.glob("blobs.*.sqd"))
        assert main([*args, "-o", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "a" / "scan_q.csv").read_bytes() == (tmp_path / "b" / "scan_q.csv").read_bytes()

    def test_env_output_dir(self, blob_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("EDSVC_OUTPUT_DIR", str(tmp_path / "env_out"))
        assert main(["run", str(blob_csv), "-l", "last", *FAST]) == EXIT_OK
        assert (tmp_path / "env_out" / "report.txt").exists()

    def test_module_entry_point(self, blob_csv, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "edsvc", "run", str(blob_csv), "-l", "last", "-o", str(tmp_path), *FAST],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "q_hat = " in proc.stdout


class TestExitCodes:
    def test_unknown_flag(self, blob_csv):
        with pytest.raises(SystemExit) as info:
            main(["run", str(blob_csv), "--bogus"])
        assert info.value.code == EXIT_USAGE

    def test_missing_command(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == EXIT_USAGE

    def test_non_positive_count(self, blob_csv, tmp_path):
        assert main(["run", str(blob_csv), "-m", "0", "-o", str(tmp_path)]) == EXIT_USAGE

    def test_bad_label_column(self, blob_csv):
        with pytest.raises(SystemExit) as info:
            main(["run", str(blob_csv), "-l", "middle"])
        assert info.value.code == EXIT_USAGE

    def test_malformed_csv(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,oops\n")
        assert main(["run", str(bad), "-o", str(tmp_path)]) == EXIT_DATA
        assert "load" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "none.csv"), "-o", str(tmp_path)]) == EXIT_DATA

    def test_too_few_points(self, tmp_path):
        small = tmp_path / "small.csv"
        small.write_text("".join(f"{i},{i * i}\n" for i in range(5)))
        assert main(["run", str(small), "-o", str(tmp_path)]) == EXIT_DATA

    def test_solver_failure(self, blob_csv, tmp_path, monkeypatch, capsys):
        def broken(*args):
            raise ConvergenceError("stalled", None)

        monkeypatch.setattr(est, "svc_cluster", broken)
        assert main(["run", str(blob_csv), "-l", "last", "-o", str(tmp_path), *FAST]) == EXIT_SOLVER
        assert "estimate" in capsys.readouterr().err

    def test_sweep_requires_labels(self, unlabeled_csv, tmp_path):
        assert main(["sweep", str(unlabeled_csv), "-o", str(tmp_path), *FAST]) == EXIT_USAGE


@pytest.fixture(scope="module")
def sweep(blob_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    assert main(["sweep", str(blob_csv), "-l", "last", "-o", str(out), "--n-q", "12", "-m", "4"]) == 0
    with open(out / "sweep.csv") as fh:
        return list(csv.DictReader(fh))


class TestSweep:
    def test_columns_and_length(self, sweep):
        assert list(sweep[0]) == ["log2_q", "nmi_vs_truth", "anmi", "n_clusters"]
        assert len(sweep) == 12

    def test_flat_kernel_single_cluster(self, sweep):
        assert sweep[0]["n_clusters"] == "1"
        assert float(sweep[0]["nmi_vs_truth"]) == 0.0

    def test_interior_region_recovers_blobs(self, sweep):
        hits = [i for i, r in enumerate(sweep) if float(r["nmi_vs_truth"]) == 1.0]
        assert hits and 0 < hits[0] and hits[-1] < len(sweep) - 1

    def test_selected_width_in_anmi_argmax(self, sweep, blob_csv, tmp_path):
        _, result = run_pipeline(
            RunConfig(str(blob_csv), str(tmp_path), "last", n_members=4, n_q=12, n_c=4)
        )
        anmis = np.array([float(r["anmi"]) for r in sweep])
        best = {float(sweep[i]["log2_q"]) for i in np.flatnonzero(anmis == anmis.max())}
        assert float(np.log2(result.q_hat)) in best
