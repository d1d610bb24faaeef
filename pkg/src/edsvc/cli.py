"""Command line harness: cluster a CSV file and write every artifact to disk.

    edsvc run data.csv --label-column last --seed 0 -o out/
    edsvc sweep data.csv --label-column last --c-fixed 1 -o out/

Exit status is 0 on success, 1 for usage errors, 2 for data errors and 3
when the solver cannot produce a clustering.
"""

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import DataFormatError, cached_sq_dists, load_csv, normalize_minmax, pairwise_sq_dists
from .ensemble import KMeansConfig, generate_ensemble, write_ensemble_csv
from .estimator import SCAN_COLUMNS, AllCandidatesFailed, build_q_grid, edsvc, evaluate_candidate
from .labeling import LabelingConfig
from .metrics import nmi
from .svc_core import ConvergenceError, InfeasibleError, SolverConfig

log = logging.getLogger("edsvc")

OUTPUT_ENV = "EDSVC_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class StageError(RuntimeError):
    def __init__(self, stage, exc, code):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.code = code


@dataclass
class RunConfig:
    input: str
    output_dir: str = "edsvc_out"
    label_column: object = None
    seed: int = 0
    n_members: int = 10
    n_q: int = 100
    n_c: int = 100
    c_init: float = 1.0
    normalize: bool = True
    cache_distances: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)

    def __post_init__(self):
        for name in ("n_members", "n_q", "n_c"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.c_init <= 0:
            raise ValueError("c_init must be positive")


@dataclass
class RunReport:
    n_points: int
    n_dims: int
    n_classes: int
    seed: int
    q_hat: float
    c_hat: float
    n_clusters: int
    final_anmi: float
    final_nmi: float = None
    base_nmi_mean: float = None
    base_nmi_members: list = None
    timings: dict = field(default_factory=dict)

    def lines(self):
        out = []
        for key, value in asdict(self).items():
            if value is None:
                continue
            if key == "timings":
                out += [f"time_{k} = {v:.3f}" for k, v in value.items()]
            elif key == "base_nmi_members":
                out += [f"base_nmi_member_{i} = {v!r}" for i, v in enumerate(value)]
            else:
                out.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        return out


def _stage(name, code):
    """Wrap a call so that failures carry the stage name and an exit code.

    ``code`` applies to plain ``ValueError``; parse and solver failures map to
    their own codes.
    """

    def run(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except (DataFormatError, OSError) as exc:
            raise StageError(name, exc, EXIT_DATA) from exc
        except (AllCandidatesFailed, ConvergenceError, InfeasibleError) as exc:
            raise StageError(name, exc, EXIT_SOLVER) from exc
        except ValueError as exc:
            raise StageError(name, exc, code) from exc

    return run


def _prepare(config):
    X, truth = _stage("load", EXIT_DATA)(load_csv, config.input, config.label_column)
    if config.normalize:
        X = normalize_minmax(X)
    if config.cache_distances:
        D = _stage("distances", EXIT_DATA)(cached_sq_dists, X, config.input)
    else:
        D = pairwise_sq_dists(X)
    return X, truth, D


def write_scan_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        w.writerows(r.row() for r in records)


def read_scan_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_pipeline(config):
    """Load, cluster, evaluate and write ``report.txt``, ``labels.csv``,
    ``ensemble.csv``, ``scan_q.csv`` and ``scan_c.csv`` under ``output_dir``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    X, truth, D = _prepare(config)
    t_load = time.perf_counter() - t0

    result = _stage("estimate", EXIT_DATA)(
        edsvc,
        X,
        n_members=config.n_members,
        n_q=config.n_q,
        n_c=config.n_c,
        c_init=config.c_init,
        seed=config.seed,
        solver_config=config.solver,
        labeling_config=config.labeling,
        kmeans_config=config.kmeans,
        sq_dists=D,
    )

    labels = result.labels
    report = RunReport(
        n_points=X.shape[0],
        n_dims=X.shape[1],
        n_classes=len(np.unique(truth)) if truth is not None else 0,
        seed=config.seed,
        q_hat=result.q_hat,
        c_hat=result.c_hat,
        n_clusters=result.final_labeling.n_clusters,
        final_anmi=result.final_anmi,
        timings={"load": t_load, **result.timings},
    )
    if truth is not None:
        report.final_nmi = nmi(truth, labels)
        members = [nmi(truth, m) for m in result.ensemble.labels]
        report.base_nmi_members = members
        report.base_nmi_mean = float(np.mean(members))

    write_scan_csv(result.q_scan, out / "scan_q.csv")
    write_scan_csv(result.c_scan, out / "scan_c.csv")
    write_ensemble_csv(result.ensemble, out / "ensemble.csv")
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "cluster"] + (["truth"] if truth is not None else []))
        for i, lab in enumerate(labels):
            w.writerow([i, int(lab)] + ([truth[i]] if truth is not None else []))
    (out / "report.txt").write_text("\n".join(report.lines()) + "\n")
    return report, result


def q_sweep(config, c_fixed=1.0):
    """NMI against ground truth and ANMI against the ensemble over the width grid.

    Writes ``sweep.csv`` with columns log2_q, nmi_vs_truth, anmi, n_clusters.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    X, truth, D = _prepare(config)
    if truth is None:
        raise StageError("sweep", ValueError("a label column is required"), EXIT_USAGE)
    ensemble = _stage("ensemble", EXIT_DATA)(
        generate_ensemble, X, config.n_members, config.seed, config.kmeans
    )
    qs = build_q_grid(D, config.n_q)
    rows = []
    for q in qs:
        rec, lab = evaluate_candidate(X, D, ensemble, q, c_fixed, "q", config.solver, config.labeling)
        score = nmi(truth, lab.assignments) if lab is not None else float("nan")
        rows.append((repr(float(np.log2(q))), repr(float(score)), repr(float(rec.anmi)), rec.n_clusters))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log2_q", "nmi_vs_truth", "anmi", "n_clusters"])
        w.writerows(rows)
    return rows


def _label_column(text):
    if text in ("first", "last"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'first', 'last' or an integer, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="CSV data file")
    common.add_argument("-l", "--label-column", type=_label_column, default=None,
                        help="column with ground-truth classes: first, last or an index")
    common.add_argument("-o", "--output-dir", default=os.environ.get(OUTPUT_ENV, "edsvc_out"),
                        help=f"output directory (default ${OUTPUT_ENV} or ./edsvc_out)")
    common.add_argument("-s", "--seed", type=int, default=0)
    common.add_argument("-m", "--members", type=int, default=10, dest="n_members")
    common.add_argument("--n-q", type=int, default=100)
    common.add_argument("--n-c", type=int, default=100)
    common.add_argument("--c-init", type=float, default=1.0)
    common.add_argument("--no-normalize", action="store_true")
    common.add_argument("--cache-distances", action="store_true",
                        help="keep the distance matrix in a sidecar file next to the input")
    common.add_argument("--kkt-tolerance", type=float, default=1e-6)
    common.add_argument("--max-passes", type=int, default=10_000)
    common.add_argument("--segment-samples", type=int, default=10)
    common.add_argument("--radius-slack", type=float, default=1e-7)
    common.add_argument("--kmeans-max-iters", type=int, default=100)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="edsvc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="select parameters and cluster")
    sweep = sub.add_parser("sweep", parents=[common], help="NMI over the width grid")
    sweep.add_argument("--c-fixed", type=float, default=1.0)
    return parser


def config_from_args(args):
    return RunConfig(
        input=args.input,
        output_dir=args.output_dir,
        label_column=args.label_column,
        seed=args.seed,
        n_members=args.n_members,
        n_q=args.n_q,
        n_c=args.n_c,
        c_init=args.c_init,
        normalize=not args.no_normalize,
        cache_distances=args.cache_distances,
        solver=SolverConfig(kkt_tolerance=args.kkt_tolerance, max_passes=args.max_passes),
        labeling=LabelingConfig(args.segment_samples, args.radius_slack),
        kmeans=KMeansConfig(max_iters=args.kmeans_max_iters),
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"edsvc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            report, _ = run_pipeline(config)
            print("\n".join(report.lines()))
        else:
            q_sweep(config, args.c_fixed)
            print(f"wrote {Path(config.output_dir) / 'sweep.csv'}")
    except StageError as exc:
        print(f"edsvc: error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
