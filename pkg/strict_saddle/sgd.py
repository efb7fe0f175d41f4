"""Noisy stochastic gradient (unconstrained) and its projected variant.

    w_{t+1} = w_t - eta_t (SG(w_t) + n_t)                 noisy_sgd
    w_{t+1} = Pi_W(w_t - eta_t (SG(w_t) + n_t))           projected_noisy_sgd

n_t is drawn uniformly from the unit sphere and scaled by ``noise_scale``.
Sample draw comes before noise draw at every step, so a seed fixes the run.
"""

import logging
import multiprocessing
import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np
import pandas as pd
from tqdm import tqdm

from .manifold import DegenerateProjectionError, chi
from .tensor4 import reconstruction_error
from .utils import TRACE_COLUMNS, write_csv

logger = logging.getLogger(__name__)

SCHEDULES = ("constant", "inverse_t")


@dataclass
class SgdConfig:
    eta: float = 0.01
    eta_max: float = 0.1
    iterations: int = 10_000
    kappa: float | None = None  # target accuracy; informational, T is given directly
    schedule: str = "constant"
    noise_scale: float = 1.0
    seed: int = 0
    record_every: int = 10
    decay_start: int = 0
    decay_scale: float = 1.0
    divergence_limit: float = 1e12
    keep_perturbations: bool = False
    track_time: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.eta > self.eta_max:
            raise ValueError(f"eta={self.eta} exceeds eta_max={self.eta_max}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be nonnegative, got {self.noise_scale}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if self.decay_start < 0 or not self.decay_scale > 0:
            raise ValueError("decay_start must be >= 0 and decay_scale > 0")


@dataclass
class RunRecord:
    iters: list[int] = field(default_factory=list)
    f: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    recon_error: list[float] = field(default_factory=list)
    elapsed_ms: list[float] = field(default_factory=list)
    xi_norm: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    final_point: np.ndarray | None = None
    steps: int = 0
    status: str = "completed"
    message: str = ""
    noise_bound: float = np.inf
    noise_bound_violations: int = 0
    perturbations: list[np.ndarray] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status in ("completed", "stopped")

    def to_frame(self) -> pd.DataFrame:
        n = len(self.iters)
        recon = self.recon_error if len(self.recon_error) == n else [np.nan] * n
        return pd.DataFrame(
            {
                "iter": self.iters,
                "f": self.f,
                "grad_norm": self.grad_norm,
                "recon_error": recon,
                "elapsed_ms": self.elapsed_ms,
            },
            columns=TRACE_COLUMNS,
        )

    def to_csv(self, path) -> None:
        write_csv(self.to_frame(), path)


def lr_schedule(config: SgdConfig, t: int) -> float:
    """constant: eta. inverse_t: eta before decay_start, then eta tau / (tau + t - decay_start)."""
    if config.schedule == "constant" or t < config.decay_start:
        return config.eta
    tau = config.decay_scale
    return config.eta * tau / (tau + t - config.decay_start)


def unit_sphere_noise(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on the unit sphere in R^dim (normalised isotropic Gaussian)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    while True:
        g = rng.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """One independent generator per trial index."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_parallel(fn, jobs: list, workers: int = 1, progress: bool = False, **kwargs) -> list:
    """fn(job, **kwargs) for every job, results in job order."""
    worker = partial(fn, **kwargs)
    bar = tqdm(total=len(jobs), disable=not progress, leave=False)
    try:
        if workers <= 1 or len(jobs) <= 1:
            results = []
            for job in jobs:
                results.append(worker(job))
                bar.update()
            return results
        with multiprocessing.Pool(processes=min(workers, len(jobs))) as pool:
            results = []
            for result in pool.imap(worker, jobs):
                results.append(result)
                bar.update()
            return results
    finally:
        bar.close()


def sgd_step(w, grad, noise, eta: float, constraints=None) -> np.ndarray:
    v = w - eta * (grad + noise)
    return v if constraints is None else constraints.project(v)


def _gradient_norm(objective, w) -> float:
    if getattr(objective, "constraints", None) is None:
        return float(np.linalg.norm(objective.gradient(w)))
    return float(np.linalg.norm(chi(objective, w)))


def _reconstruction(objective, w) -> float | None:
    tensor = getattr(objective, "tensor", None)
    if tensor is None or objective.n_blocks != tensor.d:
        return None
    return reconstruction_error(tensor, w)


def _append(record: RunRecord, objective, w, t: int, start: float, config: SgdConfig) -> float:
    f = objective.value(w)
    record.iters.append(t)
    record.f.append(f)
    record.grad_norm.append(_gradient_norm(objective, w))
    err = _reconstruction(objective, w)
    if err is not None:
        record.recon_error.append(err)
    record.elapsed_ms.append((time.perf_counter() - start) * 1e3 if config.track_time else 0.0)
    record.iterates.append(w.copy())
    return f


def _run(objective, sampler, w0, config: SgdConfig, rng, constraints=None, stop_below=None) -> RunRecord:
    w = np.array(w0, dtype=float)
    record = RunRecord()
    if sampler is not None:
        record.noise_bound = objective.oracle_bound + config.noise_scale
    else:
        record.noise_bound = config.noise_scale
    start = time.perf_counter()
    _append(record, objective, w, 0, start, config)

    zeros = np.zeros_like(w)
    for t in range(config.iterations):
        sample = sampler(rng) if sampler is not None else None
        g = objective.stochastic_gradient(w, sample)
        n = config.noise_scale * unit_sphere_noise(w.size, rng) if config.noise_scale > 0 else zeros
        recording = (t + 1) % config.record_every == 0 or t + 1 == config.iterations
        if recording or config.keep_perturbations:
            xi = g - objective.gradient(w) + n
            if config.keep_perturbations:
                record.perturbations.append(xi)
            if recording:
                record.xi_norm.append(float(np.linalg.norm(xi)))
                if record.xi_norm[-1] > record.noise_bound:
                    record.noise_bound_violations += 1

        try:
            w = sgd_step(w, g, n, lr_schedule(config, t), constraints)
        except DegenerateProjectionError as err:
            record.status, record.message = "degenerate", f"step {t + 1}: {err}"
            logger.warning("run aborted: %s", record.message)
            break
        record.steps = t + 1

        if not np.all(np.isfinite(w)) or np.linalg.norm(w) > config.divergence_limit:
            record.status, record.message = "diverged", f"step {t + 1}: iterate left the divergence limit"
            logger.warning("run aborted: %s", record.message)
            break
        if stop_below is not None and objective.value(w) <= stop_below:
            _append(record, objective, w, t + 1, start, config)
            record.status, record.message = "stopped", f"f reached {stop_below:.6g} at step {t + 1}"
            break
        if recording:
            f = _append(record, objective, w, t + 1, start, config)
            if not np.isfinite(f) or abs(f) > config.divergence_limit:
                record.status, record.message = "diverged", f"step {t + 1}: |f| left the divergence limit"
                logger.warning("run aborted: %s", record.message)
                break

    record.final_point = w
    logger.debug("%s run finished: %s after %d steps", getattr(objective, "name", "objective"), record.status, record.steps)
    return record


def noisy_sgd(objective, sampler, w0, config: SgdConfig, rng: np.random.Generator, stop_below=None) -> RunRecord:
    """Noisy stochastic gradient on an unconstrained objective."""
    if getattr(objective, "constraints", None) is not None:
        raise ValueError(f"{objective.name} is constrained; use projected_noisy_sgd")
    w0 = np.asarray(w0, dtype=float)
    if not np.all(np.isfinite(w0)):
        raise ValueError("starting point must be finite")
    return _run(objective, sampler, w0, config, rng, stop_below=stop_below)


def projected_noisy_sgd(problem, sampler, w0, config: SgdConfig, rng: np.random.Generator, stop_below=None) -> RunRecord:
    """Projected noisy stochastic gradient on a problem with equality constraints."""
    w0 = np.asarray(w0, dtype=float)
    if not problem.constraints.is_feasible(w0):
        raise ValueError(f"{problem.name}: starting point is not feasible")
    return _run(problem, sampler, w0, config, rng, constraints=problem.constraints, stop_below=stop_below)
