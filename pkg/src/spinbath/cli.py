"""Command-line front end.

Subcommands::

    spinbath run      --config cfg.toml [--out DIR] [--seed N] [--resume]
                      [--seeds 1,2,3 --jobs 2] [--threads N]
    spinbath spectrum --config cfg.toml
    spinbath ldos     --config cfg.toml --out DIR
    spinbath fit      --config cfg.toml --out DIR     (fits DIR/metrics.csv)
    spinbath validate --config cfg.toml               (oracle cross-checks)

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 budget
exceeded.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import BudgetError, ConfigError, NumericalError, SpinbathError
from . import runner

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4


def _apply_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise ConfigError(f"--threads must be >= 1, got {n}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def _load(args) -> runner.RunConfig:
    config = runner.load_config(args.config)
    run_settings = config.run
    if args.seed is not None:
        run_settings = replace(run_settings, seed=args.seed)
    if args.out is not None:
        run_settings = replace(run_settings, out=str(args.out))
    if run_settings is not config.run:
        config = replace(config, run=run_settings)
    return config


def _run_one_seed(payload) -> str:
    config_path, seed, out_dir, threads = payload
    _apply_threads(threads)
    config = runner.load_config(config_path)
    config = replace(
        config, run=replace(config.run, seed=seed, out=str(Path(out_dir) / f"seed-{seed}"))
    )
    result = runner.run(config)
    return str(result.csv_path)


def cmd_run(args) -> int:
    if args.seeds:
        if args.out is None:
            raise ConfigError("--seeds batch mode needs --out")
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        payloads = [(args.config, s, args.out, args.threads) for s in seeds]
        if args.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for path in pool.map(_run_one_seed, payloads):
                    print(f"wrote {path}")
        else:
            for payload in payloads:
                print(f"wrote {_run_one_seed(payload)}")
        return EXIT_OK

    config = _load(args)
    if config.run.out is None:
        raise ConfigError("run needs an output directory (config run.out or --out)")
    result = runner.run(config, resume=args.resume)
    print(f"wrote {result.csv_path} ({len(result.samples)} rows)")
    if result.ldos is not None:
        print(f"wrote {result.out_dir / 'ldos.csv'} (total weight {result.ldos.total_weight():.6f})")
    if result.fit_report is not None:
        print(f"wrote {result.out_dir / 'fits.txt'}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    config = _load(args)
    print("index,energy,cluster")
    for k, energy, cid in runner.spectrum_table(config):
        print(f"{k},{energy:.12g},{cid}")
    return EXIT_OK


def cmd_ldos(args) -> int:
    config = _load(args)
    if config.run.out is None:
        raise ConfigError("ldos needs an output directory (config run.out or --out)")
    config = replace(config, run=replace(config.run, ldos=True, fit=False, n_steps=0))
    result = runner.run(config)
    spec = result.ldos
    print(f"wrote {result.out_dir / 'ldos.csv'}")
    print(f"total weight {spec.total_weight():.6f}")
    print(f"mean {spec.mean():.6f} variance {spec.variance():.6f}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _load(args)
    if config.run.out is None:
        raise ConfigError("fit needs the run output directory (config run.out or --out)")
    out_dir = Path(config.run.out)
    csv_path = out_dir / "metrics.csv"
    if not csv_path.exists():
        raise ConfigError(f"{csv_path} not found; run the trajectory first")
    lines = csv_path.read_text().splitlines()
    samples = runner._parse_rows(lines[0], lines[1:])
    spec = runner.build_spec(config)
    basis = runner.eigendecompose_system(spec, config.run.degeneracy_tol)
    result = runner.RunResult(config=config, spec=spec, basis=basis, samples=samples)
    report = runner._fit_report(result)
    text = runner._fit_report_text(report)
    (out_dir / "fits.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load(args)
    report = runner.validate(config)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinbath",
        description="Closed-system spin-bath dynamics: decoherence and thermalization diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--threads", type=int, default=None, help="kernel/BLAS thread cap")
        p.add_argument("--out", type=Path, default=None, help="override run.out directory")

    p_run = sub.add_parser("run", help="propagate a trajectory and write metric CSVs")
    common(p_run)
    p_run.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    p_run.add_argument("--seeds", default=None, help="comma-separated seed batch")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel processes for --seeds")
    p_run.set_defaults(fn=cmd_run)

    p_spec = sub.add_parser("spectrum", help="print the system eigenvalue table")
    common(p_spec)
    p_spec.set_defaults(fn=cmd_spectrum)

    p_ldos = sub.add_parser("ldos", help="local density of states of the initial state")
    common(p_ldos)
    p_ldos.set_defaults(fn=cmd_ldos)

    p_fit = sub.add_parser("fit", help="fit relaxation laws to an existing metrics.csv")
    common(p_fit)
    p_fit.set_defaults(fn=cmd_fit)

    p_val = sub.add_parser("validate", help="cross-check kernels against dense oracles")
    common(p_val)
    p_val.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SpinbathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
