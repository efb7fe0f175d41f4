"""Experiment harness for the strict-saddle library.

    python -m strict_saddle decompose --d 10 --seeds 10
    python -m strict_saddle ica --batch 100 --eta 0.003
    python -m strict_saddle verify --d 3
    python -m strict_saddle escape --d 10 --support 2 --seeds 100
    python -m strict_saddle minima --d 2 --starts 200

Settings come from utils.CONFIG, then the YAML file given with --config, then
the command-line flags (flags win). Every command writes CSV tables plus YAML
manifests into its output directory and returns an exit status: 0 on success,
1 when a run or check failed, 2 when the configuration was rejected.
"""

import argparse
import logging
import math
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ValidationError, root_validator, validator

from . import __version__
from .analysis import (
    balanced_saddle,
    enumerate_minima,
    escape_statistics,
    plateau_statistics,
    verification_suite,
)
from .ica import IcaModel, SimpleSampler, ica_oracle_for
from .objectives import OBJECTIVES, make_objective
from .sgd import SCHEDULES, SgdConfig, projected_noisy_sgd, run_parallel, spawn_rngs
from .tensor4 import OrthoBasis, make_orthogonal_tensor
from .utils import CONFIG, default_output_dir, load_config_file, setup_logging, write_csv, write_yaml

logger = logging.getLogger(__name__)

SAMPLERS = ("simple", "ica", "exact")
SCHEDULE_ALIASES = {"inv-t": "inverse_t"}


class ExperimentConfig(BaseModel):
    command: str
    d: int = 10
    objective: str = "correlation"
    sampler: str = "simple"
    batch_size: int = 1
    schedule: str = "constant"
    eta: float = 0.01
    eta_max: float = 0.1
    iterations: int = 10_000
    seed: int = 0
    n_seeds: int = 10
    noise: float = 1.0
    record_every: int = 10
    starts: int = 200
    support: int = 2
    workers: int = 1
    track_time: bool = True
    out: str | None = None
    overwrite: bool = False
    verbose: bool = False

    class Config:
        extra = "forbid"

    @validator("d", "iterations", "batch_size", "n_seeds", "record_every", "starts", "support", "workers")
    def at_least_one(cls, v, field):
        if v < 1:
            raise ValueError(f"{field.name} must be >= 1, got {v}")
        return v

    @validator("eta")
    def positive_eta(cls, v):
        if not v > 0:
            raise ValueError(f"eta must be positive, got {v}")
        return v

    @validator("noise")
    def nonnegative_noise(cls, v):
        if v < 0:
            raise ValueError(f"noise must be nonnegative, got {v}")
        return v

    @validator("seed")
    def nonnegative_seed(cls, v):
        if v < 0:
            raise ValueError(f"seed must be nonnegative, got {v}")
        return v

    @validator("objective")
    def known_objective(cls, v):
        if v not in OBJECTIVES:
            raise ValueError(f"objective must be one of {sorted(OBJECTIVES)}, got {v!r}")
        return v

    @validator("sampler")
    def known_sampler(cls, v):
        if v not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {v!r}")
        return v

    @validator("schedule")
    def known_schedule(cls, v):
        v = SCHEDULE_ALIASES.get(v, v)
        if v not in SCHEDULES:
            raise ValueError(f"schedule must be constant or inv-t, got {v!r}")
        return v

    @root_validator(skip_on_failure=True)
    def consistent(cls, values):
        if values["eta"] > values["eta_max"]:
            raise ValueError(f"eta={values['eta']} exceeds eta_max={values['eta_max']}")
        if values["command"] == "escape":
            if values["objective"] != "maxeig":
                raise ValueError("escape starts from a balanced saddle of the maxeig objective; use --objective maxeig")
            if not 2 <= values["support"] <= values["d"]:
                raise ValueError(f"support must be in [2, d={values['d']}], got {values['support']}")
        return values

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.n_seeds))

    def sgd_config(self, seed: int, **overrides) -> SgdConfig:
        settings = dict(
            eta=self.eta,
            eta_max=self.eta_max,
            iterations=self.iterations,
            schedule=self.schedule,
            noise_scale=self.noise,
            seed=seed,
            record_every=self.record_every,
            track_time=self.track_time,
        )
        settings.update(overrides)
        return SgdConfig(**settings)

    def snapshot(self) -> dict:
        return {k: v for k, v in self.dict().items() if k not in ("out", "overwrite", "verbose")}


class RunManifest(BaseModel):
    command: str
    settings: dict
    seed: int | None = None
    started: str
    finished: str | None = None
    outputs: list[str] = []
    version: str = __version__

    def finish(self, *paths: Path) -> "RunManifest":
        self.finished = _now()
        self.outputs.extend(p.name for p in paths)
        return self

    def write(self, path: Path) -> None:
        write_yaml(self.dict(), path)


def _now() -> str:
    """Current UTC time as an ISO string."""
    return datetime.now(timezone.utc).isoformat()


def _manifest(config: ExperimentConfig, seed: int | None = None) -> RunManifest:
    """Start a manifest for one run of a command."""
    return RunManifest(command=config.command, settings=config.snapshot(), seed=seed, started=_now())


def build_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    """CONFIG defaults, then the YAML file, then explicit flags."""
    settings = dict(CONFIG[command])
    settings.update(load_config_file(args.config))
    flags = {
        "d": args.d,
        "objective": args.objective,
        "sampler": args.sampler,
        "batch_size": args.batch,
        "schedule": args.schedule,
        "eta": args.eta,
        "iterations": args.iters,
        "seed": args.seed,
        "n_seeds": args.seeds,
        "noise": args.noise,
        "record_every": args.record_every,
        "starts": args.starts,
        "support": args.support,
        "workers": args.workers,
        "out": args.out,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if args.no_timing:
        settings["track_time"] = False
    settings["overwrite"] = args.overwrite
    settings["verbose"] = args.verbose
    return ExperimentConfig(command=command, **settings)


def prepare_output_dir(config: ExperimentConfig) -> Path:
    """Create the output directory, refusing a non-empty one without --overwrite."""
    out = Path(config.out) if config.out else default_output_dir(config.command)
    if out.exists() and any(out.iterdir()):
        if not config.overwrite:
            raise FileExistsError(f"output directory {out} is not empty; pass --overwrite to replace its files")
        print("\n❗❗❗ WARNING:", f"overwriting files in {out}\n")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _problem_for_seed(config: ExperimentConfig, seed: int):
    """Build the problem, sampler and run RNG for one seed."""
    basis_rng, run_rng = spawn_rngs(seed, 2)
    basis = OrthoBasis.random(config.d, basis_rng)
    problem = make_objective(config.objective, make_orthogonal_tensor(basis))
    sampler = None
    if config.sampler == "simple":
        sampler = SimpleSampler(basis, config.batch_size)
    elif config.sampler == "ica":
        problem = ica_oracle_for(problem, IcaModel.from_basis(basis), config.batch_size)
        sampler = problem.probe_sampler
    return problem, sampler, run_rng


def _final(record, column: str) -> float:
    """Last recorded value of a trace column."""
    values = getattr(record, column)
    return float(values[-1]) if values else float("nan")


def _decompose_seed(seed: int, config: ExperimentConfig, out: Path) -> dict:
    """Run one decomposition seed and write its trace."""
    manifest = _manifest(config, seed)
    problem, sampler, rng = _problem_for_seed(config, seed)
    w0 = problem.random_feasible(rng)
    record = projected_noisy_sgd(problem, sampler, w0, config.sgd_config(seed), rng)
    trace = out / f"trace_seed{seed}.csv"
    record.to_csv(trace)
    manifest.finish(trace).write(out / f"manifest_seed{seed}.yaml")
    return {
        "seed": seed,
        "status": record.status,
        "steps": record.steps,
        "final_f": _final(record, "f"),
        "final_grad_norm": _final(record, "grad_norm"),
        "final_recon_error": _final(record, "recon_error"),
        "noise_bound_violations": record.noise_bound_violations,
    }


def _ica_seed(seed: int, config: ExperimentConfig, out: Path) -> dict:
    """Run one ICA seed under both schedules and write the traces."""
    manifest = _manifest(config, seed)
    problem, sampler, rng = _problem_for_seed(config, seed)
    w0 = problem.random_feasible(rng)
    state = rng.bit_generator.state

    constant = projected_noisy_sgd(problem, sampler, w0, config.sgd_config(seed, schedule="constant"), rng)
    rng.bit_generator.state = state
    decaying = projected_noisy_sgd(
        problem,
        sampler,
        w0,
        config.sgd_config(
            seed,
            schedule="inverse_t",
            decay_start=config.iterations // 2,
            decay_scale=float(math.ceil(1.0 / config.eta)),
        ),
        rng,
    )

    paths = [out / f"trace_seed{seed}_constant.csv", out / f"trace_seed{seed}_inv-t.csv"]
    constant.to_csv(paths[0])
    decaying.to_csv(paths[1])
    manifest.finish(*paths).write(out / f"manifest_seed{seed}.yaml")

    errors = constant.recon_error or constant.f
    plateau = plateau_statistics(errors)
    decaying_final = _final(decaying, "recon_error" if decaying.recon_error else "f")
    return {
        "seed": seed,
        "status": constant.status if not constant.completed else decaying.status,
        "constant_final": float(errors[-1]),
        **plateau,
        "inv_t_final": decaying_final,
        "inv_t_below_plateau": bool(decaying_final < plateau["plateau_mean"]),
    }


def _summarize(rows: list[dict], out: Path, config: ExperimentConfig) -> pd.DataFrame:
    """Write the per-seed summary table and its manifest."""
    summary = pd.DataFrame(rows)
    path = out / "summary.csv"
    write_csv(summary, path)
    _manifest(config).finish(path).write(out / "manifest_summary.yaml")
    return summary


def _report_runs(summary: pd.DataFrame) -> int:
    """Print the runs that did not complete and return the exit status."""
    failed = summary[~summary["status"].isin(["completed", "stopped"])]
    if len(failed):
        print(f"\n❗ {len(failed)} of {len(summary)} runs did not complete:")
        print(failed[["seed", "status"]].to_string(index=False))
        return 1
    print("\n\nDONE ✅")
    return 0


def cmd_decompose(config: ExperimentConfig) -> int:
    """Decompose random orthogonal tensors with projected noisy SGD."""
    out = prepare_output_dir(config)
    print(f"Running {config.objective} decomposition, d={config.d}, {config.n_seeds} seed(s)...")
    rows = run_parallel(_decompose_seed, config.seeds, config.workers, config.verbose, config=config, out=out)
    summary = _summarize(rows, out, config)
    print(summary[["seed", "status", "final_recon_error"]].to_string(index=False))
    print(f"\n📄 Traces and summary saved to: {out}")
    return _report_runs(summary)


def cmd_ica(config: ExperimentConfig) -> int:
    """Compare constant and decaying step sizes on ICA samples."""
    out = prepare_output_dir(config)
    print(f"Running ICA decomposition, d={config.d}, batch {config.batch_size}, {config.n_seeds} seed(s)...")
    rows = run_parallel(_ica_seed, config.seeds, config.workers, config.verbose, config=config, out=out)
    summary = _summarize(rows, out, config)
    print(summary[["seed", "plateau_mean", "plateau_range", "inv_t_final"]].to_string(index=False))
    print(f"\n📄 Traces and summary saved to: {out}")
    return _report_runs(summary)


def cmd_verify(config: ExperimentConfig) -> int:
    """Run the numerical checks and save the report."""
    out = prepare_output_dir(config)
    print(f"Running verification checks, d={config.d}, seed={config.seed}...")
    manifest = _manifest(config, config.seed)
    report = verification_suite(d=config.d, seed=config.seed)
    path = out / "report.csv"
    write_csv(report, path)
    manifest.finish(path).write(out / "manifest.yaml")
    for row in report.itertuples():
        print(f"  {'✔' if row.passed else '✘'} {row.check}: {row.value:.3e} {row.detail}")
    if not report["passed"].all():
        print(f"\n❗ {int((~report['passed']).sum())} check(s) failed")
        return 1
    print("\n\nDONE ✅")
    return 0


def cmd_escape(config: ExperimentConfig) -> int:
    """Measure how often noisy SGD leaves a maxeig saddle."""
    out = prepare_output_dir(config)
    basis = OrthoBasis.standard(config.d)
    problem = make_objective("maxeig", make_orthogonal_tensor(basis))
    sampler = SimpleSampler(basis, config.batch_size) if config.sampler == "simple" else None
    saddle = balanced_saddle(basis, config.support)
    print(f"Starting {config.n_seeds} run(s) at the {config.support}-support saddle, d={config.d}...")

    manifest = _manifest(config, config.seed)
    stats = escape_statistics(
        problem,
        saddle,
        config.n_seeds,
        config.sgd_config(config.seed),
        seed=config.seed,
        sampler=sampler,
        workers=config.workers,
        progress=config.verbose,
    )
    trials, summary = out / "trials.csv", out / "summary.csv"
    write_csv(stats.to_frame(), trials)
    write_csv(
        pd.DataFrame(
            [{
                "escape_fraction": stats.escape_fraction,
                "median_steps": stats.median_steps,
                "mean_decrease": stats.mean_decrease,
                "threshold": stats.threshold,
            }]
        ),
        summary,
    )
    manifest.finish(trials, summary).write(out / "manifest.yaml")
    print(f"escape_fraction={stats.escape_fraction:.3f}")
    print(f"median_steps={stats.median_steps}")
    print(f"mean_decrease={stats.mean_decrease:.6g}")
    print("\n\nDONE ✅")
    return 0


def cmd_minima(config: ExperimentConfig) -> int:
    """Catalogue the distinct local minima reached from random starts."""
    out = prepare_output_dir(config)
    problem, sampler, _ = _problem_for_seed(config, config.seed)
    print(f"Searching for local minima of {config.objective}, d={config.d}, {config.starts} start(s)...")

    manifest = _manifest(config, config.seed)
    catalog = enumerate_minima(
        problem,
        config.starts,
        config.sgd_config(config.seed),
        seed=config.seed,
        sampler=sampler,
        workers=config.workers,
        progress=config.verbose,
    )
    path = out / "minima.csv"
    catalog.to_csv(path)
    manifest.finish(path).write(out / "manifest.yaml")
    print(catalog.to_text())
    print("\n\nDONE ✅")
    return 0


COMMANDS = {
    "decompose": cmd_decompose,
    "ica": cmd_ica,
    "verify": cmd_verify,
    "escape": cmd_escape,
    "minima": cmd_minima,
}


def get_args(argv=None) -> argparse.Namespace:
    """Set up command-line interface and get arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="path to a YAML file of experiment settings")
    common.add_argument("--seed", type=int, default=None, help="base seed; run k uses seed + k")
    common.add_argument("--seeds", type=int, default=None, help="number of seeds (runs or trials)")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--d", type=int, default=None, help="tensor dimension")
    common.add_argument("--eta", type=float, default=None, help="base learning rate")
    common.add_argument("--iters", type=int, default=None, help="iterations per run")
    common.add_argument("--schedule", type=str, choices=["constant", "inv-t"], default=None)
    common.add_argument("--batch", type=int, default=None, help="mini-batch size of the sampler")
    common.add_argument("--objective", type=str, choices=sorted(OBJECTIVES), default=None)
    common.add_argument("--sampler", type=str, choices=SAMPLERS, default=None)
    common.add_argument("--noise", type=float, default=None, help="scale of the added unit-sphere noise")
    common.add_argument("--record-every", type=int, default=None)
    common.add_argument("--starts", type=int, default=None, help="number of multi-starts (minima)")
    common.add_argument("--support", type=int, default=None, help="support size of the starting saddle (escape)")
    common.add_argument("--workers", type=int, default=None, help="size of the process pool")
    common.add_argument(
        "--overwrite",
        action="store_true",
        help="Boolean; if this flag is provided, files in an existing output directory are replaced",
    )
    common.add_argument(
        "--no-timing",
        action="store_true",
        help="Boolean; if this flag is provided, elapsed_ms is written as 0 so outputs are byte-reproducible",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="INFO logging and progress bars")
    common.add_argument("--log-json", action="store_true", help="emit log records as JSON lines")

    parser = argparse.ArgumentParser(prog="strict_saddle", description=__doc__.split("\n")[0])
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("decompose", parents=[common], help="tensor decomposition by projected noisy SGD")
    subparsers.add_parser("ica", parents=[common], help="ICA runs with constant and decaying step sizes")
    subparsers.add_parser("verify", parents=[common], help="numerical checks of the strict-saddle structure")
    subparsers.add_parser("escape", parents=[common], help="escape statistics from a balanced saddle")
    subparsers.add_parser("minima", parents=[common], help="multi-start catalogue of local minima")
    return parser.parse_args(argv)


def _one_line(err: Exception) -> str:
    """Short description of a rejected configuration."""
    if isinstance(err, ValidationError):
        return "; ".join(e["msg"] for e in err.errors())
    return str(err)


def main(argv=None) -> int:
    """Main function."""
    args = get_args(argv)
    setup_logging(args.verbose, args.log_json)
    try:
        config = build_config(args.command, args)
        return COMMANDS[args.command](config)
    except (ValidationError, ValueError, FileExistsError) as err:
        print(f"error: {_one_line(err)}")
        return 2
    except OSError as err:
        logger.error("I/O failure: %s", err)
        print(f"error: {err}")
        return 1
