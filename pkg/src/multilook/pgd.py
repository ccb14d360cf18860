"""Projected gradient descent on the multilook likelihood.

Each iteration takes a likelihood gradient step using the tracked
covariance inverse, clips to [x_min, 1], projects onto the decoder
prior (bagged by default), and optionally blends projection and
gradient results with a residual weight.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import bagging, decoder, likelihood, metrics
from .errors import ValidationError
from .invtrack import DEFAULT_DELTA, InverseTracker
from .sensing import DEFAULT_X_MIN, MeasurementEnsemble, Scene, init_estimate

MODES = ("bagged", "dip-simple", "dip-m3")
# residual weights used with the simple decoder, keyed by number of looks
DIP_M3_LAMBDA = {25: 0.3, 50: 0.2, 100: 0.1}


@dataclass
class PgdConfig:
    outer_iters: int = 100
    mu: float = 0.01
    lambda_residual: float | None = None   # None: mode default (1.0 except dip-m3)
    delta_threshold: float = DEFAULT_DELTA
    mode: str = "bagged"
    plan: bagging.BaggingPlan | None = None
    seed: int = 0
    x_min: float = DEFAULT_X_MIN
    ns_steps: int = 1
    force_exact: bool = False
    freeze_after: int | None = None        # stop inverse updates after this iteration

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.mu <= 0:
            raise ValidationError("mu must be positive")
        if self.lambda_residual is not None and not 0 <= self.lambda_residual <= 1:
            raise ValidationError("lambda_residual must be in [0, 1]")

    def resolved_lambda(self, num_looks: int) -> float:
        if self.lambda_residual is not None:
            return self.lambda_residual
        if self.mode == "dip-m3":
            return DIP_M3_LAMBDA.get(num_looks, 0.2)
        return 1.0


@dataclass
class ReconState:
    x: np.ndarray
    tracker: InverseTracker
    t: int = 0
    trace: list[dict] = field(default_factory=list)


def make_state(ens: MeasurementEnsemble, config: PgdConfig,
               x0: np.ndarray | None = None) -> ReconState:
    swc, szc = likelihood.component_sigmas(ens)
    tracker = InverseTracker(ens.a, swc, szc,
                             delta_threshold=config.delta_threshold,
                             ns_steps=config.ns_steps)
    tracker.force_exact = config.force_exact
    if x0 is None:
        x0 = init_estimate(ens, x_min=config.x_min)
    return ReconState(x=np.clip(np.asarray(x0, dtype=float), config.x_min, 1.0),
                      tracker=tracker)


def _iteration_plan(config: PgdConfig, shape: tuple[int, int],
                    t: int) -> bagging.BaggingPlan:
    seed = int(np.random.SeedSequence(
        entropy=config.seed, spawn_key=(t,)).generate_state(1)[0])
    if config.mode == "bagged":
        base = config.plan or bagging.BaggingPlan()
        return bagging.BaggingPlan(patch_sizes=base.patch_sizes,
                                   budgets=dict(base.budgets), arch=base.arch,
                                   lr=base.lr, base_seed=seed)
    # simple presets project with a single whole-image decoder
    base = config.plan
    budgets = dict(base.budgets) if base else {shape[0]: 300}
    return bagging.BaggingPlan(patch_sizes=(shape,), budgets=budgets,
                               arch=decoder.simple_arch(),
                               lr=base.lr if base else 1e-3, base_seed=seed)


def gradient_step(state: ReconState, ens: MeasurementEnsemble, mu: float,
                  x_min: float = DEFAULT_X_MIN) -> np.ndarray:
    """Tracked-inverse likelihood gradient step, clipped to [x_min, 1]."""
    inv = state.tracker.update(state.x)
    grad = likelihood.grad_fl_ensemble(state.x, inv, ens)
    return np.clip(state.x - mu * grad, x_min, 1.0)


def project_step(x_grad: np.ndarray, config: PgdConfig, shape: tuple[int, int],
                 t: int) -> np.ndarray:
    """Project the clipped gradient iterate onto the decoder prior."""
    plan = _iteration_plan(config, shape, t)
    proj = bagging.bagged_project(x_grad.reshape(shape), plan)
    return np.clip(proj.reshape(-1), config.x_min, 1.0)


def iterate(state: ReconState, ens: MeasurementEnsemble, config: PgdConfig,
            shape: tuple[int, int], reference: Scene | None = None):
    """Run the PGD loop; returns (final estimate, trace rows)."""
    lam = config.resolved_lambda(ens.num_looks)
    if config.mode == "bagged":
        # resolve the tiling once so per-iteration plans stay quiet
        base = config.plan or bagging.BaggingPlan()
        config = replace(config, plan=base.for_image(*shape))
    for t in range(1, config.outer_iters + 1):
        start = time.perf_counter()
        if config.freeze_after is not None and t > config.freeze_after:
            state.tracker.frozen = True
        x_grad = gradient_step(state, ens, config.mu, x_min=config.x_min)
        if lam > 0.0:
            x_proj = project_step(x_grad, config, shape, t)
            x_new = lam * x_proj + (1.0 - lam) * x_grad
        else:
            x_new = x_grad
        state.x = np.clip(x_new, config.x_min, 1.0)
        state.t = t
        row = {
            "iter": t,
            "psnr": np.nan,
            "ssim": np.nan,
            "exact_inversions": state.tracker.exact_count,
            "ns_steps": state.tracker.ns_count,
            "seconds": time.perf_counter() - start,
        }
        if reference is not None:
            est = state.x.reshape(shape)
            row["psnr"] = metrics.psnr(est, reference.pixels)
            if min(shape) >= metrics.SSIM_WINDOW:
                row["ssim"] = metrics.ssim(est, reference.pixels)
        state.trace.append(row)
    return state.x, state.trace


def write_trace(path, trace) -> None:
    cols = ["iter", "psnr", "ssim", "exact_inversions", "ns_steps", "seconds"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=cols)
        writer.writeheader()
        for row in trace:
            writer.writerow({c: row.get(c, "") for c in cols})
