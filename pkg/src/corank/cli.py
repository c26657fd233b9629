"""Command-line interface: ``corank test | ranks | calibrate | simulate | verify``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 calibration mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import center_outward_ranks
from .errors import CalibrationMismatch, TieError
from .grid import GridSpec, build_grid, factorize, write_grid_csv
from .kernels import KernelId
from .nulldist import DEFAULT_ALPHAS, NullCalibration, eigen_null, resample_null
from .scores import ScoreFunction, parse_score, table_score
from .testing import PairedSample, TestDecision, run_test

__all__ = [
    "RunConfig",
    "DataError",
    "parse_args",
    "read_paired_csv",
    "read_matrix_csv",
    "read_score_table",
    "write_paired_csv",
    "write_result_json",
    "decision_to_dict",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CALIBRATION = 4

SCORE_NAMES = ("sign", "wilcoxon", "vdw", "table")


class DataError(ValueError):
    """Malformed input data."""


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    d1: int | None = None
    n: int | None = None
    d2: int | None = None
    kernel: str = "dcov"
    score1: str = "wilcoxon"
    score2: str = "wilcoxon"
    score_file: str | None = None
    alpha: float = 0.05
    alphas: tuple = DEFAULT_ALPHAS
    calibration: str | None = None
    method: str = "resampling"
    B: int | None = None
    N: int = 2000
    seed: int | None = None
    grid_seed: int = 0
    n_R: int | None = None
    n_S: int | None = None
    jitter: float = 0.0
    threads: int = 1
    emit_grid: str | None = None
    design: str | None = None
    checks: list = field(default_factory=list)
    quick: bool = False


def _default_seed() -> int:
    raw = os.environ.get("CORANK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"CORANK_SEED must be an integer, got {raw!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _level(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {text}")
    return v


def _build_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    p = argparse.ArgumentParser(
        prog="corank",
        description="Distribution-free independence tests from center-outward ranks.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    def scores(sp):
        sp.add_argument("--score1", choices=SCORE_NAMES, default="wilcoxon")
        sp.add_argument("--score2", choices=SCORE_NAMES, default="wilcoxon")
        sp.add_argument(
            "--score-file",
            help="CSV with columns u, j defining a piecewise-linear table score",
        )

    def kernel(sp):
        sp.add_argument("--kernel", choices=[k.value for k in KernelId], default="dcov")

    t = sub.add_parser("test", help="run the rank-based test on a CSV sample")
    t.add_argument("--input", required=True)
    t.add_argument("--d1", type=_positive_int, required=True, help="columns in the first block")
    kernel(t)
    scores(t)
    t.add_argument("--alpha", type=_level, default=0.05)
    t.add_argument("--calibration", required=True, help="calibration JSON from `calibrate`")
    t.add_argument("--output", help="result JSON (default: stdout)")
    t.add_argument("--jitter", type=float, default=0.0, help="add uniform(-e, e) noise to break ties")
    t.add_argument("--seed", type=int, default=seed, help="seed for --jitter")

    r = sub.add_parser("ranks", help="center-outward ranks and signs of one sample")
    r.add_argument("--input", required=True)
    r.add_argument("--output", help="CSV of ranks (default: stdout)")
    r.add_argument("--emit-grid", help="also write the grid as CSV")
    r.add_argument("--grid-seed", type=int, default=0)
    r.add_argument("--n-R", dest="n_R", type=_positive_int)
    r.add_argument("--n-S", dest="n_S", type=_positive_int)

    c = sub.add_parser("calibrate", help="compute and cache null critical values")
    c.add_argument("--method", choices=["resampling", "eigen"], default="resampling")
    kernel(c)
    scores(c)
    c.add_argument("--n", type=_positive_int, required=True)
    c.add_argument("--d1", type=_positive_int, required=True)
    c.add_argument("--d2", type=_positive_int, required=True)
    c.add_argument("--B", type=_positive_int, help="replicates (default 2000 resampling, 100000 eigen)")
    c.add_argument("--N", type=_positive_int, default=2000, help="eigen discretization size")
    c.add_argument("--seed", type=int, default=seed)
    c.add_argument("--grid-seed", type=int, default=0)
    c.add_argument("--n-R", dest="n_R", type=_positive_int)
    c.add_argument("--n-S", dest="n_S", type=_positive_int)
    c.add_argument("--alphas", type=_level, nargs="+", default=list(DEFAULT_ALPHAS))
    c.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    c.add_argument("--output", required=True)

    s = sub.add_parser("simulate", help="power study from a JSON or TOML design")
    s.add_argument("--design", required=True)
    s.add_argument("--output", help="CSV path (default power_<design>.csv)")
    s.add_argument("--seed", type=int, default=None, help="overrides the design's seed")

    for name in ("verify", "bench"):
        v = sub.add_parser(name, help="run the named verification checks")
        v.add_argument("checks", nargs="*", help="check names (default: all)")
        v.add_argument("--quick", action="store_true", help="reduced replicate counts")
        v.add_argument("--output", help="summary CSV (default: stdout)")
    return p


def parse_args(argv=None) -> RunConfig:
    """Parse and validate; usage errors exit with status 2."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    values = {k: v for k, v in vars(ns).items() if v is not None}
    if "alphas" in values:
        values["alphas"] = tuple(values["alphas"])
    cfg = RunConfig(**values)
    if (cfg.n_R is None) != (cfg.n_S is None):
        parser.error("--n-R and --n-S must be given together")
    if cfg.jitter < 0:
        parser.error("--jitter must be non-negative")
    for side, name in ((1, cfg.score1), (2, cfg.score2)):
        if name == "table" and not cfg.score_file:
            parser.error(f"--score{side} table needs --score-file")
    return cfg


def _parse_cell(text: str, row: int, col: int, path) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}: row {row}, column {col}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{path}: row {row}, column {col}: non-finite value {text!r}")
    return v


def read_matrix_csv(path) -> np.ndarray:
    """Numeric CSV with one header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        width = len(header)
        rows = []
        for i, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != width:
                raise DataError(f"{path}: row {i} has {len(rec)} fields, header has {width}")
            rows.append([_parse_cell(c.strip(), i, j + 1, path) for j, c in enumerate(rec)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _split_columns(X: np.ndarray, d1: int, path) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= d1 < X.shape[1]:
        raise DataError(f"{path}: d1={d1} must be smaller than the column count {X.shape[1]}")
    return X[:, :d1], X[:, d1:]


def _paired(X1: np.ndarray, X2: np.ndarray) -> PairedSample:
    try:
        return PairedSample(X1, X2)
    except TieError:
        raise
    except ValueError as exc:
        raise DataError(str(exc)) from None


def read_paired_csv(path, d1: int) -> PairedSample:
    """Columns ``1..d1`` form ``X1`` and the rest ``X2``."""
    return _paired(*_split_columns(read_matrix_csv(path), d1, path))


def write_paired_csv(sample: PairedSample, path) -> None:
    """CSV with shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x1_{j + 1}" for j in range(sample.d1)] + [f"x2_{j + 1}" for j in range(sample.d2)])
        for a, b in zip(sample.X1, sample.X2):
            w.writerow([repr(float(v)) for v in a] + [repr(float(v)) for v in b])


def read_score_table(path) -> ScoreFunction:
    """Piecewise-linear score from a CSV with columns ``u`` and ``j``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"u", "j"} <= set(reader.fieldnames):
            raise DataError(f"{path}: score table needs columns u and j")
        knots, values = [], []
        for i, rec in enumerate(reader, start=2):
            knots.append(_parse_cell(rec["u"], i, 1, path))
            values.append(_parse_cell(rec["j"], i, 2, path))
    return table_score(knots, values)


def _score_from_name(name: str, d: int, score_file: str | None) -> ScoreFunction:
    if name == "table":
        return read_score_table(score_file)
    return parse_score(name, d)


def _six_digits(x: float) -> float:
    return float(f"{x:.6g}")


def decision_to_dict(decision: TestDecision, extra: dict | None = None) -> dict:
    stat = decision.statistic
    meta = {
        "kernel": stat.kernel.value,
        "score1": None if stat.score1 is None else stat.score1.name,
        "score2": None if stat.score2 is None else stat.score2.name,
        "n": stat.n,
        "d1": stat.d1,
        "d2": stat.d2,
        "alpha": decision.alpha,
        "method": decision.method,
        "grid1": stat.grid1,
        "grid2": stat.grid2,
    }
    cal = decision.calibration
    if cal is not None:
        meta["calibration"] = {"method": cal.method, "B": cal.B, "seed": cal.seed, "N": cal.N}
    if decision.seed is not None:
        meta["seed"] = decision.seed
    if extra:
        meta.update(extra)
    return {
        "statistic": stat.value,
        "scaled": stat.scaled,
        "critical_value": decision.critical_value,
        "p_value": _six_digits(decision.p_value),
        "reject": bool(decision.reject),
        "metadata": meta,
    }


def write_result_json(decision: TestDecision, path, extra: dict | None = None) -> None:
    text = json.dumps(decision_to_dict(decision, extra), indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _cmd_test(cfg: RunConfig) -> int:
    X1, X2 = _split_columns(read_matrix_csv(cfg.input), cfg.d1, cfg.input)
    extra = {}
    if cfg.jitter > 0:
        # noise goes in before the tie check so that it can break ties
        rng = np.random.default_rng(cfg.seed)
        X1 = X1 + rng.uniform(-cfg.jitter, cfg.jitter, X1.shape)
        X2 = X2 + rng.uniform(-cfg.jitter, cfg.jitter, X2.shape)
        extra = {"jitter": cfg.jitter, "jitter_seed": cfg.seed}
    sample = _paired(X1, X2)
    s1 = _score_from_name(cfg.score1, sample.d1, cfg.score_file)
    s2 = _score_from_name(cfg.score2, sample.d2, cfg.score_file)
    cal = NullCalibration.from_json(cfg.calibration)
    decision = run_test(sample, cfg.kernel, (s1, s2), cfg.alpha, cal)
    write_result_json(decision, cfg.output, extra)
    return EXIT_OK


def _grid_spec(cfg: RunConfig, n: int, d: int) -> GridSpec:
    if cfg.n_R is None:
        return factorize(n, d, cfg.grid_seed)
    return GridSpec(d=d, n=n, n_R=cfg.n_R, n_S=cfg.n_S, n_0=n - cfg.n_R * cfg.n_S, seed=cfg.grid_seed)


def _cmd_ranks(cfg: RunConfig) -> int:
    X = read_matrix_csv(cfg.input)
    if np.unique(X, axis=0).shape[0] != X.shape[0]:
        raise TieError("sample has repeated rows")
    n, d = X.shape
    grid = build_grid(_grid_spec(cfg, n, d))
    rv = center_outward_ranks(X, grid)
    if cfg.emit_grid:
        with open(cfg.emit_grid, "w", newline="") as gh:
            write_grid_csv(grid, gh)
    fh, close = _open_out(cfg.output)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["index", "rank"]
            + [f"sign_{j + 1}" for j in range(d)]
            + [f"image_{j + 1}" for j in range(d)]
        )
        for i in range(n):
            w.writerow(
                [i, int(rv.ranks[i])]
                + [repr(float(v)) for v in rv.signs[i]]
                + [repr(float(v)) for v in rv.images[i]]
            )
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _cmd_calibrate(cfg: RunConfig) -> int:
    s1 = _score_from_name(cfg.score1, cfg.d1, cfg.score_file)
    s2 = _score_from_name(cfg.score2, cfg.d2, cfg.score_file)
    specs = (_grid_spec(cfg, cfg.n, cfg.d1), _grid_spec(cfg, cfg.n, cfg.d2))
    if cfg.method == "resampling":
        cal = resample_null(
            cfg.kernel, (s1, s2), cfg.n, cfg.d1, cfg.d2,
            B=cfg.B or 2000, seed=cfg.seed, alphas=cfg.alphas,
            threads=cfg.threads, grid_specs=specs,
        )
    else:
        cal = eigen_null(
            cfg.kernel, (s1, s2), cfg.n, cfg.d1, cfg.d2,
            N=cfg.N, B=cfg.B or 100_000, seed=cfg.seed, alphas=cfg.alphas, grid_specs=specs,
        )
    cal.to_json(cfg.output)
    return EXIT_OK


def _load_design(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _cmd_simulate(cfg: RunConfig) -> int:
    from .datagen import power_study, write_power_csv

    design = _load_design(cfg.design)
    if cfg.seed is not None:
        design["seed"] = cfg.seed
    rows = power_study(design)
    out = cfg.output or f"power_{Path(cfg.design).stem}.csv"
    with open(out, "w", newline="") as fh:
        write_power_csv(rows, fh)
    return EXIT_OK


def _cmd_verify(cfg: RunConfig) -> int:
    from .oracle_suite import run_suite, write_summary_csv

    reports = run_suite(cfg.checks, quick=cfg.quick, progress=lambda r: print(r.line(), file=sys.stderr))
    fh, close = _open_out(cfg.output)
    try:
        write_summary_csv(reports, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK if all(r.passed for r in reports) else 1


COMMANDS = {
    "test": _cmd_test,
    "ranks": _cmd_ranks,
    "calibrate": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "bench": _cmd_verify,
}


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except CalibrationMismatch as exc:
        print(f"corank: calibration mismatch: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (DataError, TieError, ValueError, OSError, KeyError) as exc:
        print(f"corank: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
