"""Command-line entry point.

Subcommands:

  simulate <config>   run the scheme, write CSV output, figures, and
                      the verification report selected in [verify]
  verify <path>       full certification of a config (rerun + all
                      checks) or integrity check of a snapshot file
  refine <config>     time-step refinement ladder with figure
  selftest            oracle battery, no configuration needed

Common flags: --config, --out, --threads, --seed.  The environment
variable GELSTEP_LOG (quiet | info | debug) sets console verbosity;
the run log file always captures info-level detail.  Exit status is 0
exactly when every gate passed; failures print one machine-parsable
line (gelstep-fail: ... or gelstep-error: ...) to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import time

import numpy as np

from .boundary import GentleBendFamily, smallness_check
from .config import RunConfig, load_config
from .energy import IncrementProblem
from .errors import GelstepError
from .figures import plot_refinement, render_report_figures
from .grid import Grid
from .hminus import NeumannLaplacian
from .potentials import PotentialParams, check_assumptions
from .snapshots import read_snapshot, write_trajectory
from .solver import run_simulation
from . import tensors
from .verification import (
    Verdict,
    VerificationReport,
    check_apriori,
    check_edi,
    check_el_residuals,
    refinement_study,
)
from . import oracles

log = logging.getLogger("gelstep")

_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging(out_dir: str | None) -> None:
    log.handlers.clear()
    log.setLevel(logging.DEBUG)
    console = logging.StreamHandler()
    console.setLevel(_LEVELS.get(os.environ.get("GELSTEP_LOG", "info"), logging.INFO))
    console.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(console)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        run_log = logging.FileHandler(os.path.join(out_dir, "run.log"), mode="w")
        run_log.setLevel(logging.INFO)
        run_log.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
        log.addHandler(run_log)


def _thread_limit(threads: int):
    """Best-effort BLAS pool cap; deterministic mode wants one thread."""
    if threads == 0:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=threads)
    except ImportError:
        return contextlib.nullcontext()


def _fail(verdict: Verdict, report: str) -> int:
    print(
        f"gelstep-fail: check={report}.{verdict.name} "
        f"value={verdict.value:.6e} threshold={verdict.threshold:.6e}",
        file=sys.stderr,
    )
    return 1


def _first_failure(reports: list[VerificationReport]) -> int:
    for report in reports:
        for verdict in report.verdicts:
            if not verdict.passed:
                return _fail(verdict, report.name)
    return 0


def _log_preflight(cfg: RunConfig) -> None:
    """Echo the resolved configuration and the model diagnostics."""
    log.info("resolved configuration:")
    for line in cfg.resolved_lines():
        log.info("  %s", line)
    for line in cfg.echo:
        log.debug("default applied: %s", line)
    if cfg.echo:
        log.info("defaults applied for %d keys (rerun with GELSTEP_LOG=debug "
                 "to list them)", len(cfg.echo))

    params = cfg.make_params()
    diag = check_assumptions(params, samples=500, seed=cfg.verify_seed)
    log.info("assumption diagnostics: %s", diag.summary())
    if not diag.passed:
        raise GelstepError(f"assumption diagnostics failed: {diag.summary()}")

    family = cfg.make_family()
    small = smallness_check(
        family, gamma=params.gamma, alpha=params.alpha, beta=params.beta
    )
    log.info("smallness check: %s", small.summary())
    if not small.passed:
        log.warning(
            "boundary distortion exceeds the smallness budget; the a-priori "
            "theory degrades but the run proceeds (%s)", small.summary()
        )


def _write_report(out_dir: str, reports: list[VerificationReport]) -> str:
    path = os.path.join(out_dir, "verification.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.summary() + "\n")
            for name, rows in report.tables.items():
                fh.write(f"-- {name} --\n")
                for row in rows:
                    fh.write(
                        "  " + ", ".join(f"{k} = {v}" for k, v in row.items()) + "\n"
                    )
            fh.write("\n")
    return path


def _run_checks(cfg: RunConfig, traj, force_all: bool = False) -> list[VerificationReport]:
    reports = []
    if force_all or cfg.verify_edi:
        reports.append(check_edi(traj))
    if force_all or cfg.verify_residuals:
        reports.append(
            check_el_residuals(traj, n_tests=cfg.verify_tests, seed=cfg.verify_seed)
        )
    if force_all or cfg.verify_apriori:
        reports.append(check_apriori(traj))
    return reports


def _cmd_simulate(cfg: RunConfig) -> int:
    _log_preflight(cfg)
    start = time.time()
    with _thread_limit(cfg.threads):
        traj = run_simulation(cfg)
    log.info("run finished: %d steps in %.1f s", traj.num_steps, time.time() - start)
    paths = write_trajectory(traj, cfg.out_dir, cfg.snapshot_every)
    paths += render_report_figures(traj, cfg.out_dir)
    log.info("wrote %d output files under %s", len(paths), cfg.out_dir)

    reports = _run_checks(cfg, traj)
    if reports:
        _write_report(cfg.out_dir, reports)
        for report in reports:
            for line in report.summary().splitlines():
                log.info("%s", line)
    return _first_failure(reports)


def _cmd_verify(cfg_or_path, is_snapshot: bool) -> int:
    if is_snapshot:
        meta, fields = read_snapshot(cfg_or_path)
        grid = Grid(meta["d"], meta["n"])
        det_min = float(tensors.mat_det(grid.grad(fields["y"])).min())
        finite = all(bool(np.isfinite(v).all()) for v in fields.values())
        verdicts = [
            Verdict("snapshot_fields_finite", 0.0 if finite else 1.0, 0.5,
                    finite, note=cfg_or_path),
            Verdict("snapshot_det_positive", det_min, 0.0, det_min > 0.0,
                    sense=">"),
        ]
        report = VerificationReport("snapshot_integrity", verdicts)
        for line in report.summary().splitlines():
            log.info("%s", line)
        return _first_failure([report])

    cfg = cfg_or_path
    _log_preflight(cfg)
    with _thread_limit(cfg.threads):
        traj = run_simulation(cfg)
    reports = _run_checks(cfg, traj, force_all=True)
    path = _write_report(cfg.out_dir, reports)
    for report in reports:
        for line in report.summary().splitlines():
            log.info("%s", line)
    log.info("verification report written to %s", path)
    return _first_failure(reports)


def _cmd_refine(cfg: RunConfig) -> int:
    _log_preflight(cfg)
    M_list = [cfg.num_steps, 2 * cfg.num_steps, 4 * cfg.num_steps]
    log.info("refinement ladder: M in %s at n = %d", M_list, cfg.n)
    with _thread_limit(cfg.threads):
        result = refinement_study(cfg, M_list)
    os.makedirs(cfg.out_dir, exist_ok=True)
    plot_refinement(result.rows, os.path.join(cfg.out_dir, "refinement.png"))
    _write_report(cfg.out_dir, [result.report])
    for line in result.report.summary().splitlines():
        log.info("%s", line)
    for row in result.rows:
        log.info("  %s", ", ".join(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}"
                                   for k, v in row.items()))
    return _first_failure([result.report])


def _cmd_selftest(seed: int) -> int:
    checks: list[Verdict] = []
    params = PotentialParams()

    res = oracles.potential_fd_residuals(params, samples=1000, seed=seed)
    for name, value in res.items():
        checks.append(Verdict(f"fd_{name}", value, 1e-5, value <= 1e-5))

    fi = oracles.frame_indifference_residuals(params, samples=10000, seed=seed)
    checks.append(Verdict("frame_static", fi["static"], 1e-10, fi["static"] <= 1e-10))
    checks.append(Verdict("frame_dynamic", fi["dynamic"], 1e-10, fi["dynamic"] <= 1e-10))

    gap = oracles.dense_poisson_mismatch(n=9, seed=seed)
    checks.append(Verdict("poisson_dense_gap", gap, 1e-8, gap <= 1e-8))
    _, orders = oracles.vnorm_refinement()
    worst_order = min(orders)
    checks.append(Verdict("vnorm_order", worst_order, 1.9, worst_order >= 1.9, sense=">="))

    grid = Grid(2, 9)
    family = GentleBendFamily(amplitude=0.02, frequency=1.0, d=2, horizon=1.0)
    lap = NeumannLaplacian(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        t, y_prev, psi_prev, y, psi = oracles.random_admissible_state(
            grid, family, params, rng
        )
        problem = IncrementProblem(params, grid, family, lap, t, 0.01, y_prev, psi_prev)
        worst = max(worst, oracles.incremental_fd_residual(problem, y, psi, rng, num_dirs=6))
    checks.append(Verdict("fd_incremental_gradient", worst, 1e-5, worst <= 1e-5))

    report = VerificationReport("selftest", checks)
    for line in report.summary().splitlines():
        log.info("%s", line)
    return _first_failure([report])


def _load(args) -> RunConfig:
    path = args.config_path or args.config
    if path is None:
        raise GelstepError(f"{args.command}: a config file is required "
                           "(positional or --config)")
    cfg = load_config(path)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.psi_seed = args.seed
        cfg.verify_seed = args.seed
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gelstep",
        description="Incremental minimization for gel swelling with "
                    "viscoelastic relaxation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("config_path", nargs="?", default=None,
                           help="configuration file")
            p.add_argument("--config", default=None, help="configuration file")
            p.add_argument("--out", default=None, help="output directory override")
            p.add_argument("--threads", type=int, default=None,
                           help="thread cap (0 = auto, 1 = deterministic)")
        p.add_argument("--seed", type=int, default=None, help="seed override")

    common(sub.add_parser("simulate", help="run the scheme and write outputs"))
    common(sub.add_parser("verify", help="certify a config or check a snapshot"))
    common(sub.add_parser("refine", help="time-step refinement ladder"))
    common(sub.add_parser("selftest", help="run the oracle battery"),
           needs_config=False)

    args = parser.parse_args(argv)

    try:
        if args.command == "selftest":
            _setup_logging(None)
            return _cmd_selftest(args.seed if args.seed is not None else 0)

        if args.command == "verify":
            path = args.config_path or args.config
            if path is not None and os.path.exists(path):
                with open(path, "r", encoding="utf-8") as fh:
                    first = fh.readline()
                if first.startswith("# gelstep snapshot"):
                    _setup_logging(args.out)
                    return _cmd_verify(path, is_snapshot=True)
            cfg = _load(args)
            _setup_logging(cfg.out_dir)
            return _cmd_verify(cfg, is_snapshot=False)

        cfg = _load(args)
        _setup_logging(cfg.out_dir)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        return _cmd_refine(cfg)
    except GelstepError as err:
        message = str(err).replace("\n", " ")
        print(f"gelstep-error: {type(err).__name__}: {message}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"gelstep-error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
