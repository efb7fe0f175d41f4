"""Numerical certificates for the strict-saddle structure.

Finite-difference oracles, stationary-point classification, multi-start minima
catalogues, saddle-escape statistics, the closed-form coupling sequence of SGD
on a quadratic model, the manifold geometry inequalities, and the battery of
checks run by ``strict_saddle verify``.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
import scipy.linalg

from .ica import (
    IcaModel,
    exhaustive_mean,
    minibatch_gradient,
    z_minus_y4_form,
)
from .manifold import (
    SaddleParams,
    chi,
    lagrange_multipliers,
    lagrangian_hessian,
    min_tangent_eig,
    sphere_product,
    tangent_frame,
)
from .objectives import (
    correlation_objective,
    maxeig_objective,
    nearest_known_minimum,
    reconstruction_objective,
)
from .sgd import SgdConfig, projected_noisy_sgd, run_parallel, spawn_rngs, unit_sphere_noise
from .tensor4 import OrthoBasis, form_scalar, make_orthogonal_tensor
from .utils import relative_error, write_csv

logger = logging.getLogger(__name__)

DEDUP_THRESHOLD = 1e-3
NEIGHBORHOOD_SAMPLES = 8
GEOMETRY_SLACK = 1e-12


def _default_step(w: np.ndarray) -> float:
    return 1e-5 * max(1.0, float(np.linalg.norm(w)))


def _finite(value):
    if not np.all(np.isfinite(value)):
        raise FloatingPointError("finite-difference evaluation returned a non-finite value")
    return value


def fd_gradient(f, w, h: float | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    w = np.asarray(w, dtype=float)
    h = _default_step(w) if h is None else h
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    grad = np.zeros_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        grad[j] = (_finite(f(w + e)) - _finite(f(w - e))) / (2 * h)
    return grad


def fd_hessian(f, w, h: float | None = None) -> np.ndarray:
    """Central-difference Hessian of a scalar function, symmetrised."""
    w = np.asarray(w, dtype=float)
    h = _default_step(w) if h is None else h
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    n = w.size
    H = np.zeros((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            H[i, j] = (
                _finite(f(w + eye[i] + eye[j]))
                - _finite(f(w + eye[i] - eye[j]))
                - _finite(f(w - eye[i] + eye[j]))
                + _finite(f(w - eye[i] - eye[j]))
            ) / (4 * h * h)
            H[j, i] = H[i, j]
    return H


def fd_jacobian(fn, w, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of a vector function; column j is d fn / d w_j."""
    w = np.asarray(w, dtype=float)
    h = _default_step(w) if h is None else h
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    columns = []
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        columns.append((_finite(fn(w + e)) - _finite(fn(w - e))) / (2 * h))
    return np.column_stack(columns)


def tangent_jacobian_check(problem, w, h: float | None = None) -> float:
    """Relative gap between P_T (d chi / d w) P_T and P_T M P_T at w."""
    P = tangent_frame(problem.constraints, w).P_tangent
    J = fd_jacobian(lambda v: chi(problem, v), w, h)
    return relative_error(P @ J @ P, P @ lagrangian_hessian(problem, w) @ P)


class Classification(str, Enum):
    LARGE_GRADIENT = "LargeGradient"
    NEGATIVE_CURVATURE = "NegativeCurvature"
    NEAR_LOCAL_MINIMUM = "NearLocalMinimum"
    UNCLASSIFIED = "Unclassified"


@dataclass
class SaddleReport:
    point: np.ndarray
    classification: Classification
    chi_norm: float
    min_eig: float
    witness: np.ndarray
    params: SaddleParams
    matched_minimum: np.ndarray | None = None
    distance: float | None = None
    neighborhood_min_eig: float | None = None

    def as_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "chi_norm": self.chi_norm,
            "min_tangent_eig": self.min_eig,
            "distance_to_minimum": self.distance,
            "neighborhood_min_eig": self.neighborhood_min_eig,
            "alpha": self.params.alpha,
            "gamma": self.params.gamma,
            "epsilon": self.params.epsilon,
            "delta": self.params.delta,
        }

    def to_text(self) -> str:
        return "\n".join(f"{key}={value}" for key, value in self.as_dict().items())


def neighborhood_min_eig(problem, center, radius: float, n_samples: int, rng: np.random.Generator) -> float:
    """Smallest tangent eigenvalue at the center and at sampled points within ``radius``."""
    center = np.asarray(center, dtype=float)
    frame = tangent_frame(problem.constraints, center)
    smallest = min_tangent_eig(problem, center).value
    for _ in range(n_samples):
        v = frame.tangent @ rng.standard_normal(frame.tangent.shape[1])
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        w = problem.constraints.project(center + rng.uniform(0, radius) * v / norm)
        smallest = min(smallest, min_tangent_eig(problem, w).value)
    return smallest


def _polish(problem, w, steps: int = 2000, eta: float = 0.01) -> np.ndarray:
    config = SgdConfig(eta=eta, iterations=steps, noise_scale=0.0, record_every=steps, track_time=False)
    return projected_noisy_sgd(problem, None, w, config, np.random.default_rng(0)).final_point


def _nearest(problem, w, catalog):
    if catalog is not None:
        points = catalog.points() if isinstance(catalog, MinimaCatalog) else list(catalog)
        if points:
            distances = [float(np.linalg.norm(w - p)) for p in points]
            k = int(np.argmin(distances))
            return np.asarray(points[k]), distances[k]
    if problem.tensor.basis is not None:
        return nearest_known_minimum(problem, w)
    candidate = _polish(problem, w)
    return candidate, float(np.linalg.norm(w - candidate))


def classify_point(
    problem,
    w,
    params: SaddleParams,
    catalog=None,
    rng: np.random.Generator | None = None,
    n_neighborhood: int = NEIGHBORHOOD_SAMPLES,
    cache: dict | None = None,
) -> SaddleReport:
    """Which branch of the strict-saddle definition covers w.

    Large tangent gradient first, then a tangent direction of curvature <= -gamma,
    then a minimum within delta whose 2 delta neighborhood keeps curvature >= alpha
    (sampled at finitely many points, so this branch is evidence, not proof).
    """
    w = np.asarray(w, dtype=float)
    chi_norm = float(np.linalg.norm(chi(problem, w)))
    eig = min_tangent_eig(problem, w)
    report = SaddleReport(w.copy(), Classification.UNCLASSIFIED, chi_norm, eig.value, eig.direction, params)
    if chi_norm >= params.epsilon:
        report.classification = Classification.LARGE_GRADIENT
        return report
    if eig.value <= -params.gamma:
        report.classification = Classification.NEGATIVE_CURVATURE
        return report

    minimum, distance = _nearest(problem, w, catalog)
    report.matched_minimum, report.distance = minimum, distance
    if distance <= params.delta:
        key = (minimum.round(12).tobytes(), params.delta)
        if cache is not None and key in cache:
            smallest = cache[key]
        else:
            smallest = neighborhood_min_eig(
                problem, minimum, 2 * params.delta, n_neighborhood, rng if rng is not None else np.random.default_rng(0)
            )
            if cache is not None:
                cache[key] = smallest
        report.neighborhood_min_eig = smallest
        if smallest >= params.alpha:
            report.classification = Classification.NEAR_LOCAL_MINIMUM
    return report


@dataclass
class MinimumEntry:
    point: np.ndarray
    min_eig: float
    value: float
    hits: int = 1


@dataclass
class MinimaCatalog:
    dedup_threshold: float = DEDUP_THRESHOLD
    entries: list[MinimumEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def points(self) -> list[np.ndarray]:
        return [e.point for e in self.entries]

    def add(self, point, min_eig: float, value: float) -> bool:
        """Count a hit on an existing entry within the threshold, else add one. True if new."""
        point = np.asarray(point, dtype=float)
        for entry in self.entries:
            if np.linalg.norm(entry.point - point) <= self.dedup_threshold:
                entry.hits += 1
                return False
        self.entries.append(MinimumEntry(point.copy(), min_eig, value))
        logger.debug("catalog grew to %d minima", len(self.entries))
        return True

    def sort(self) -> None:
        self.entries.sort(key=lambda e: tuple(np.round(e.point, 6)))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, e in enumerate(self.entries):
            row = {"minimum": k, "value": e.value, "min_tangent_eig": e.min_eig, "hits": e.hits}
            row.update({f"w{j}": x for j, x in enumerate(e.point)})
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path) -> None:
        write_csv(self.to_frame(), path)

    def to_text(self) -> str:
        lines = [f"minima={len(self)}", f"dedup_threshold={self.dedup_threshold}"]
        for k, e in enumerate(self.entries):
            lines.append(f"minimum_{k}.hits={e.hits}")
            lines.append(f"minimum_{k}.min_tangent_eig={e.min_eig:.12g}")
        return "\n".join(lines)


def _endpoint(rng, problem, config: SgdConfig, sampler, polish_steps: int):
    w0 = problem.random_feasible(rng)
    record = projected_noisy_sgd(problem, sampler, w0, config, rng)
    if not record.completed:
        return None
    return _polish(problem, record.final_point, steps=polish_steps, eta=config.eta)


def enumerate_minima(
    problem,
    n_starts: int,
    config: SgdConfig,
    params: SaddleParams | None = None,
    seed: int = 0,
    sampler=None,
    polish_steps: int = 2000,
    dedup_threshold: float = DEDUP_THRESHOLD,
    workers: int = 1,
    progress: bool = False,
) -> MinimaCatalog:
    """Distinct local minima reached by multi-start projected noisy SGD plus a noiseless polish."""
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    params = params or SaddleParams(alpha=1e-6, gamma=1e-6, epsilon=1e-6, delta=1e-3)
    endpoints = run_parallel(
        _endpoint, spawn_rngs(seed, n_starts), workers, progress,
        problem=problem, config=config, sampler=sampler, polish_steps=polish_steps,
    )
    catalog = MinimaCatalog(dedup_threshold=dedup_threshold)
    cache: dict = {}
    for w in endpoints:
        if w is None:
            continue
        report = classify_point(problem, w, params, cache=cache)
        if report.classification is Classification.NEAR_LOCAL_MINIMUM:
            catalog.add(w, report.min_eig, problem.value(w))
        else:
            logger.info("start ended at a %s point (chi=%.2e)", report.classification.value, report.chi_norm)
    catalog.sort()
    return catalog


def coupling_closed_form(g, H, noise_stream, eta: float, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and displacement after t SGD steps on the quadratic model.

        grad_t = (1 - eta H)^t g - eta H sum_{tau<t} (1 - eta H)^{t-tau-1} xi_tau
        disp_t = -eta sum_{tau<t} (1 - eta H)^tau g - eta sum_{tau<t} (1 - eta H)^{t-tau-1} xi_tau
    """
    g = np.asarray(g, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-12:
        raise ValueError("H must be symmetric")
    if t == 0:
        return g.copy(), np.zeros_like(g)
    xi = np.asarray(noise_stream, dtype=float)[:t]
    if xi.shape[0] < t:
        raise ValueError(f"noise stream has {xi.shape[0]} entries, need {t}")
    lam, Q = scipy.linalg.eigh(H)
    r = 1.0 - eta * lam
    g_hat = Q.T @ g
    xi_hat = xi @ Q
    powers = r[None, :] ** np.arange(t)[:, None]  # row tau holds r^tau
    noise_sum = np.sum(powers[::-1] * xi_hat, axis=0)  # sum_tau r^{t-tau-1} xi_tau
    grad_hat = r**t * g_hat - eta * lam * noise_sum
    disp_hat = -eta * powers.sum(axis=0) * g_hat - eta * noise_sum
    return Q @ grad_hat, Q @ disp_hat


def simulate_coupling(g, H, noise_stream, eta: float, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Step-by-step SGD on the quadratic model with a given noise stream."""
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    disp = np.zeros_like(g)
    for tau in range(t):
        disp = disp - eta * (g + H @ disp + noise_stream[tau])
    return g + H @ disp, disp


@dataclass
class EscapeStats:
    escape_fraction: float
    median_steps: float
    mean_decrease: float
    threshold: float
    steps: list[int]
    escaped: list[bool]
    decreases: list[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"trial": range(len(self.steps)), "escaped": self.escaped, "steps": self.steps, "f_decrease": self.decreases})


def _escape_trial(rng, problem, saddle_point, config, sampler, level):
    record = projected_noisy_sgd(problem, sampler, saddle_point, config, rng, stop_below=level)
    return record.status == "stopped", record.steps, problem.value(record.final_point)


def escape_statistics(
    problem,
    saddle_point,
    n_trials: int,
    config: SgdConfig,
    seed: int = 0,
    threshold: float | None = None,
    params: SaddleParams | None = None,
    sampler=None,
    workers: int = 1,
    progress: bool = False,
) -> EscapeStats:
    """Fraction of seeded runs started at a saddle whose f drops by ``threshold`` within the budget."""
    saddle_point = np.asarray(saddle_point, dtype=float)
    if params is not None:
        report = classify_point(problem, saddle_point, params)
        if report.classification is not Classification.NEGATIVE_CURVATURE:
            raise ValueError(f"start point is {report.classification.value}, not a saddle")
    elif not min_tangent_eig(problem, saddle_point).value < 0:
        raise ValueError("start point has no direction of negative curvature")
    f0 = problem.value(saddle_point)
    threshold = max(0.1 * abs(f0), 1e-3) if threshold is None else threshold
    results = run_parallel(
        _escape_trial, spawn_rngs(seed, n_trials), workers, progress,
        problem=problem, saddle_point=saddle_point, config=config, sampler=sampler, level=f0 - threshold,
    )
    escaped = [r[0] for r in results]
    steps = [r[1] for r in results]
    decreases = [f0 - r[2] for r in results]
    escaped_steps = [s for s, e in zip(steps, escaped) if e]
    return EscapeStats(
        escape_fraction=float(np.mean(escaped)),
        median_steps=float(np.median(escaped_steps)) if escaped_steps else float("nan"),
        mean_decrease=float(np.mean(decreases)),
        threshold=threshold,
        steps=steps,
        escaped=escaped,
        decreases=decreases,
    )


def balanced_saddle(basis: OrthoBasis, p: int) -> np.ndarray:
    """(1/sqrt(p)) sum_{i<p} a_i, a critical point of the maxeig problem."""
    if not 1 <= p <= basis.d:
        raise ValueError(f"support size must be in [1, {basis.d}], got {p}")
    return basis.vectors[:p].sum(axis=0) / np.sqrt(p)


def sphere_geometry_checks(
    n_blocks: int,
    block_dim: int,
    n_pairs: int,
    rng: np.random.Generator,
    etas=(1e-1, 1e-2, 1e-3),
) -> dict[str, int]:
    """Violation counts of the four sphere-product geometry inequalities.

    curvature:     ||P_N0 (w - w0)|| <= ||w - w0||^2 / (2R)
    tangent_drift: ||P_N0 v|| <= ||w - w0|| / R      for unit v tangent at w
    normal_drift:  ||P_T0 v|| <= ||w - w0|| / R      for unit v normal at w
    projection:    ||Pi(w0 + eta v) - (w0 + eta P_T0 v)|| <= 4 eta^2 / R   for unit v
    """
    sphere = sphere_product(n_blocks, block_dim)
    R = sphere.curvature_radius
    violations = {"curvature": 0, "tangent_drift": 0, "normal_drift": 0, "projection": 0}
    for _ in range(n_pairs):
        w0 = sphere.project(rng.standard_normal(sphere.dim))
        w = sphere.project(w0 + 10 ** rng.uniform(-3, 0) * rng.standard_normal(sphere.dim))
        gap = np.linalg.norm(w - w0)
        frame0 = tangent_frame(sphere, w0)
        frame = tangent_frame(sphere, w)

        if np.linalg.norm(frame0.project_normal(w - w0)) > gap**2 / (2 * R) + GEOMETRY_SLACK:
            violations["curvature"] += 1
        v = frame.tangent @ unit_sphere_noise(frame.tangent.shape[1], rng)
        if np.linalg.norm(frame0.project_normal(v)) > gap / R + GEOMETRY_SLACK:
            violations["tangent_drift"] += 1
        v = frame.normal @ unit_sphere_noise(frame.normal.shape[1], rng)
        if np.linalg.norm(frame0.project_tangent(v)) > gap / R + GEOMETRY_SLACK:
            violations["normal_drift"] += 1
        v = unit_sphere_noise(sphere.dim, rng)
        for eta in etas:
            moved = sphere.project(w0 + eta * v) - (w0 + eta * frame0.project_tangent(v))
            if np.linalg.norm(moved) > 4 * eta**2 / R + GEOMETRY_SLACK:
                violations["projection"] += 1
    return violations


def plateau_statistics(errors, trailing: float = 0.2, window_frac: float = 0.05) -> dict:
    """Mean and range of the trailing part of a rolling-mean-smoothed error trace."""
    errors = pd.Series(np.asarray(errors, dtype=float))
    window = max(1, int(round(window_frac * len(errors))))
    smooth = errors.rolling(window, min_periods=1).mean()
    tail = smooth.iloc[-max(1, int(round(trailing * len(errors)))) :]
    mean = float(tail.mean())
    spread = float(tail.max() - tail.min())
    return {"plateau_mean": mean, "plateau_range": spread, "plateau_stable": bool(spread < 0.5 * mean)}


# ---------------------------------------------------------------------------
# verification battery
# ---------------------------------------------------------------------------


def _gradient_checks(problems, rng, n_points):
    worst_grad = worst_chi = worst_hess = 0.0
    for problem in problems:
        for _ in range(n_points):
            w = problem.random_feasible(rng)
            lam = lagrange_multipliers(problem, w)
            worst_grad = max(worst_grad, relative_error(problem.gradient(w), fd_gradient(problem.value, w)))
            worst_chi = max(worst_chi, relative_error(chi(problem, w), fd_gradient(lambda v: problem.lagrangian(v, lam), w)))
            worst_hess = max(
                worst_hess,
                relative_error(lagrangian_hessian(problem, w), fd_jacobian(lambda v: problem.lagrangian_gradient(v, lam), w)),
            )
    return worst_grad, worst_chi, worst_hess


def _closed_form_checks(problems, rng, n_points):
    worst_lam = worst_chi = worst_hess = 0.0
    for problem in problems:
        for _ in range(n_points):
            w = problem.random_feasible(rng)
            worst_lam = max(worst_lam, float(np.max(np.abs(lagrange_multipliers(problem, w) - problem.closed_form_multipliers(w)))))
            worst_chi = max(worst_chi, float(np.max(np.abs(chi(problem, w) - problem.closed_form_chi(w)))))
            worst_hess = max(worst_hess, float(np.max(np.abs(lagrangian_hessian(problem, w) - problem.closed_form_hessian(w)))))
    return worst_lam, worst_chi, worst_hess


def _z_tensor_gap(d, rng):
    model = IcaModel.from_basis(OrthoBasis.random(d, rng))
    T = make_orthogonal_tensor(model.basis)
    u, v = rng.standard_normal((2, d))
    expected = form_scalar(T, u, u, v, v)
    return abs(exhaustive_mean(lambda y: z_minus_y4_form(y, u, v), model) - expected) / max(1.0, abs(expected))


def _ica_unbiased_gap(d, rng, ica_gradient):
    model = IcaModel.from_basis(OrthoBasis.random(d, rng))
    problem = correlation_objective(make_orthogonal_tensor(model.basis), halved=True)
    w = problem.random_feasible(rng)
    U = problem.rows(w)
    mean = exhaustive_mean(lambda y: ica_gradient(U, y[None, :]), model)
    return float(np.max(np.abs(mean - problem.gradient(w))))


def _simple_unbiased_gap(d, rng):
    basis = OrthoBasis.random(d, rng)
    T = make_orthogonal_tensor(basis)
    outcomes = d**0.25 * basis.vectors
    worst = 0.0
    for problem in (maxeig_objective(T), correlation_objective(T), reconstruction_objective(T)):
        w = problem.random_feasible(rng)
        mean = np.mean([problem.sample_gradient(w, x) for x in outcomes], axis=0)
        worst = max(worst, float(np.max(np.abs(mean - problem.gradient(w)))))
    return worst


def _saddle_eigenvalue_gaps(d):
    """(largest min-eig over balanced saddles + 7/d, smallest min-eig at +-e_i)."""
    basis = OrthoBasis.standard(d)
    problem = maxeig_objective(make_orthogonal_tensor(basis))
    worst_saddle = max(min_tangent_eig(problem, balanced_saddle(basis, p)).value for p in range(2, d + 1))
    worst_minimum = min(min_tangent_eig(problem, s * basis.vectors[i]).value for i in range(d) for s in (1.0, -1.0))
    return worst_saddle + 7.0 / d, worst_minimum


def _coupling_gap(rng, n_instances, dim=5, t=500, eta=0.01):
    worst = 0.0
    for _ in range(n_instances):
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        H = Q @ np.diag(rng.uniform(-0.5, 1.0, dim)) @ Q.T
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(dim)
        xi = np.array([unit_sphere_noise(dim, rng) for _ in range(t)])
        closed = coupling_closed_form(g, H, xi, eta, t)
        simulated = simulate_coupling(g, H, xi, eta, t)
        worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in zip(closed, simulated)))
    return worst


def _minima_count(seed):
    T = make_orthogonal_tensor(OrthoBasis.standard(2))
    problem = correlation_objective(T)
    config = SgdConfig(eta=0.01, iterations=500, noise_scale=1.0, record_every=500, track_time=False)
    catalog = enumerate_minima(problem, 100, config, seed=seed, polish_steps=1000)
    return len(catalog), min((e.min_eig for e in catalog.entries), default=np.nan)


def verification_suite(d: int = 5, seed: int = 0, ica_gradient=minibatch_gradient, only=None, n_points: int = 10) -> pd.DataFrame:
    """Run the invariant battery; one row per check with pass/fail."""
    rng = np.random.default_rng(seed)
    rows = []

    def check(name, value, tolerance, passed, detail=""):
        rows.append({"check": name, "passed": bool(passed), "value": float(value), "tolerance": tolerance, "detail": detail})
        logger.info("%s: %s (value=%.3e)", name, "pass" if passed else "FAIL", value)

    def wanted(name):
        return only is None or name in only

    T = make_orthogonal_tensor(OrthoBasis.random(d, rng))
    problems = [maxeig_objective(T), correlation_objective(T), reconstruction_objective(T)]
    closed = [maxeig_objective(T), correlation_objective(T, halved=True), correlation_objective(T)]

    if wanted("derivatives_fd"):
        g, c, h = _gradient_checks(problems, rng, n_points)
        check("gradient_fd", g, 1e-5, g <= 1e-5, f"d={d}")
        check("chi_fd", c, 1e-5, c <= 1e-5, f"d={d}")
        check("lagrangian_hessian_fd", h, 1e-5, h <= 1e-5, f"d={d}")
    if wanted("closed_forms"):
        lam, c, h = _closed_form_checks(closed, rng, n_points)
        check("multipliers_closed_form", lam, 1e-8, lam <= 1e-8)
        check("chi_closed_form", c, 1e-10, c <= 1e-10)
        check("lagrangian_hessian_closed_form", h, 1e-10, h <= 1e-10)
    if wanted("tangent_jacobian"):
        gap = max(tangent_jacobian_check(p, p.random_feasible(rng)) for p in problems)
        check("tangent_jacobian_fd", gap, 1e-5, gap <= 1e-5)
    if wanted("z_tensor"):
        gap = max(_z_tensor_gap(k, rng) for k in range(1, min(d, 4) + 1))
        check("z_tensor_expectation", gap, 1e-12, gap <= 1e-12, "exhaustive over sign vectors")
    if wanted("ica_unbiased"):
        gap = max(_ica_unbiased_gap(k, rng, ica_gradient) for k in (2, 3))
        check("ica_unbiased", gap, 1e-10, gap <= 1e-10, "exhaustive over sign vectors")
    if wanted("simple_unbiased"):
        gap = _simple_unbiased_gap(d, rng)
        check("simple_sampler_unbiased", gap, 1e-12 * d**2, gap <= 1e-12 * d**2)
    if wanted("saddle_eigenvalues"):
        saddle_gap, minimum_eig = _saddle_eigenvalue_gaps(max(d, 2))
        check("saddle_curvature", saddle_gap, 1e-9, saddle_gap <= 1e-9, "min tangent eig + 7/d at balanced saddles")
        check("minimum_curvature", minimum_eig, 3.0, minimum_eig >= 3.0 - 1e-9, "min tangent eig at +-a_i")
    if wanted("geometry"):
        counts = sphere_geometry_checks(3, 3, 2000, rng)
        total = sum(counts.values())
        check("sphere_geometry", total, 0, total == 0, ", ".join(f"{k}={v}" for k, v in counts.items()))
    if wanted("coupling"):
        gap = _coupling_gap(rng, 5)
        check("coupling_closed_form", gap, 1e-10, gap <= 1e-10)
    if wanted("minima_count"):
        count, eig = _minima_count(seed)
        check("minima_count_d2", count, 8, count == 8 and eig >= 1.0, f"smallest min tangent eig {eig:.3g}")

    return pd.DataFrame(rows, columns=["check", "passed", "value", "tolerance", "detail"])
