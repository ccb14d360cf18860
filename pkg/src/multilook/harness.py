"""Experiment runner: end-to-end reconstruction and the study protocols.

Configs are flat key=value text files; command-line flags override file
values.  Every run is deterministic under (config, seed) and writes its
raw numbers as CSV next to any figure-like output.
"""

from __future__ import annotations

import json
import csv
import logging
import statistics
import time
from dataclasses import dataclass, field, asdict
from importlib.metadata import version
from pathlib import Path

import numpy as np
import scipy.linalg

from . import bagging, cxla, decoder, likelihood, metrics, pgd, sensing
from .errors import ValidationError

log = logging.getLogger(__name__)

DESK_SIZE = 64
PAPER_SIZE = 128


@dataclass
class ExperimentConfig:
    experiment: str = "reconstruct"
    scene: str | None = None          # path; None generates a synthetic scene
    height: int = DESK_SIZE
    width: int = DESK_SIZE
    m_over_n: float = 0.5
    num_looks: int = 50
    sigma_w: float = 1.0
    sigma_z: float = 0.0
    mu: float = 0.01
    lambda_residual: float | None = None
    delta_x: float = 0.12
    mode: str = "bagged"
    kernel: int = 3
    channels: tuple[int, ...] = (128, 128, 128, 128)
    patch_sizes: tuple[int, ...] = (32, 64, 128)
    budgets: dict[int, int] = field(default_factory=lambda: dict(bagging.DEFAULT_BUDGETS))
    outer_iters: int | None = None
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2)
    trials: int = 100
    deltas: tuple[float, ...] = (0.10, 0.11, 0.12, 0.13, 0.14, 0.15)
    fit_iters: int = 2000
    noise_sigma: float = 25.0 / 255.0
    paper_scale: bool = False
    out_dir: str = "out"

    def validate(self) -> None:
        if not 0 < self.m_over_n <= 1:
            raise ValidationError("m_over_n must be in (0, 1]")
        if self.num_looks < 1:
            raise ValidationError("L must be at least 1")
        if self.sigma_w < 0 or self.sigma_z < 0:
            raise ValidationError("noise levels must be nonnegative")
        if self.mu <= 0:
            raise ValidationError("mu must be positive")
        if self.delta_x <= 0:
            raise ValidationError("delta_x must be positive")
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")


_TUPLE_KEYS = {"patch_sizes", "seeds", "deltas", "channels"}
_INT_KEYS = {"height", "width", "num_looks", "outer_iters", "seed", "trials",
             "fit_iters", "kernel"}
_FLOAT_KEYS = {"m_over_n", "sigma_w", "sigma_z", "mu", "lambda_residual",
               "delta_x", "noise_sigma"}
_ALIASES = {"L": "num_looks", "lambda": "lambda_residual", "looks": "num_looks"}


def parse_config(path=None, overrides=None) -> ExperimentConfig:
    """Read key=value lines (``#`` comments allowed), then apply overrides."""
    values: dict = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig()
    for key, val in values.items():
        key = _ALIASES.get(key, key)
        if not hasattr(cfg, key):
            raise ValidationError(f"unknown config key: {key}")
        if isinstance(val, str):
            if key in _TUPLE_KEYS:
                parts = [p for p in val.replace(",", " ").split() if p]
                val = tuple(float(p) if key == "deltas" else int(p) for p in parts)
            elif key == "budgets":
                val = {int(k): int(v) for k, v in
                       (item.split(":") for item in val.replace(",", " ").split())}
            elif key in _INT_KEYS:
                val = int(val)
            elif key in _FLOAT_KEYS:
                val = float(val)
            elif key == "paper_scale":
                val = val.lower() in ("1", "true", "yes")
        setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _load_scene(cfg: ExperimentConfig) -> sensing.Scene:
    if cfg.scene:
        path = Path(cfg.scene)
        if not path.exists():
            raise ValidationError(f"scene file not found: {path}")
        return sensing.load_scene(path)
    size = PAPER_SIZE if cfg.paper_scale else cfg.height
    if cfg.paper_scale:
        log.warning("paper scale selected: expect a long run")
        return sensing.synthetic_scene(PAPER_SIZE, PAPER_SIZE, seed=cfg.seed)
    return sensing.synthetic_scene(size, cfg.width if not cfg.paper_scale else PAPER_SIZE,
                                   seed=cfg.seed)


def _arch(cfg: ExperimentConfig) -> decoder.DecoderArch:
    return decoder.DecoderArch(channels=tuple(cfg.channels), kernel=cfg.kernel)


def _plan(cfg: ExperimentConfig) -> bagging.BaggingPlan:
    sizes = tuple((s, s) for s in cfg.patch_sizes)
    return bagging.BaggingPlan(patch_sizes=sizes, budgets=dict(cfg.budgets),
                               arch=_arch(cfg), base_seed=cfg.seed)


def _default_outer_iters(m_over_n: float) -> int:
    # harder sampling ratios need a longer outer loop to converge
    if m_over_n >= 0.5:
        return 100
    if m_over_n >= 0.25:
        return 200
    return 300


def _pgd_config(cfg: ExperimentConfig, **kw) -> pgd.PgdConfig:
    outer = cfg.outer_iters or _default_outer_iters(cfg.m_over_n)
    base = dict(outer_iters=outer, mu=cfg.mu, lambda_residual=cfg.lambda_residual,
                delta_threshold=cfg.delta_x, mode=cfg.mode, plan=_plan(cfg),
                seed=cfg.seed)
    base.update(kw)
    return pgd.PgdConfig(**base)


def _make_problem(cfg: ExperimentConfig, seed: int | None = None):
    scene = _load_scene(cfg)
    n = scene.n
    m = max(1, round(cfg.m_over_n * n))
    seed = cfg.seed if seed is None else seed
    if cfg.m_over_n == 1.0:
        a = np.eye(n, dtype=complex)
    else:
        a = sensing.haar_partial(m, n, seed)
    ens = sensing.simulate(scene, a, cfg.num_looks, cfg.sigma_w, cfg.sigma_z,
                           seed=seed + 1)
    return scene, ens


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(out: Path, cfg: ExperimentConfig, payload: dict) -> None:
    payload = dict(payload)
    payload["config"] = {k: (list(v) if isinstance(v, tuple) else v)
                         for k, v in asdict(cfg).items()}
    payload["rng_id"] = sensing.RNG_ID
    payload["version"] = version("multilook")
    (out / "report.json").write_text(json.dumps(payload, indent=2, default=str))


def run_reconstruct(cfg: ExperimentConfig) -> dict:
    """Full reconstruction: simulate, PGD, write image + trace + report."""
    cfg.validate()
    out = _out_dir(cfg)
    start = time.perf_counter()
    scene, ens = _make_problem(cfg)
    config = _pgd_config(cfg)
    state = pgd.make_state(ens, config)
    psnr0 = metrics.psnr(state.x.reshape(scene.shape), scene.pixels)
    x_hat, trace = pgd.iterate(state, ens, config, scene.shape, reference=scene)
    est = x_hat.reshape(scene.shape)
    sensing.save_image(out / "final.png", est)
    np.save(out / "final.npy", est)
    pgd.write_trace(out / "trace.csv", trace)
    result = {
        "psnr_init": psnr0,
        "psnr": metrics.psnr(est, scene.pixels),
        "ssim": metrics.ssim(est, scene.pixels) if min(scene.shape) >= 11 else None,
        "exact_inversions": state.tracker.exact_count,
        "ns_steps": state.tracker.ns_count,
        "seconds": time.perf_counter() - start,
    }
    _write_report(out, cfg, result)
    return result


def _run_variant(cfg: ExperimentConfig, scene, ens, config: pgd.PgdConfig):
    state = pgd.make_state(ens, config)
    t0 = time.perf_counter()
    pgd.iterate(state, ens, config, scene.shape, reference=scene)
    elapsed = time.perf_counter() - t0
    return [row["psnr"] for row in state.trace], elapsed


def step_timing(ens, x: np.ndarray, repeats: int = 5) -> dict:
    """Median wall time of one exact inversion vs one Newton-Schulz refinement."""
    swc, szc = likelihood.component_sigmas(ens)
    b = cxla.assemble_b(x, ens.a, swc, szc)
    inv = cxla.exact_inverse(b)
    exact_times, ns_times = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        cxla.exact_inverse(b)
        exact_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        cxla.newton_schulz_step(b, inv)
        ns_times.append(time.perf_counter() - t0)
    return {"exact_median_s": statistics.median(exact_times),
            "ns_median_s": statistics.median(ns_times)}


def run_ns_compare(cfg: ExperimentConfig) -> dict:
    """Tracked vs exact vs frozen-inverse PGD trajectories from identical seeds."""
    cfg.validate()
    out = _out_dir(cfg)
    scene, ens = _make_problem(cfg)
    variants = {
        "tracked": _pgd_config(cfg),
        "exact": _pgd_config(cfg, force_exact=True),
        "frozen5": _pgd_config(cfg, freeze_after=5),
        "frozen10": _pgd_config(cfg, freeze_after=10),
        "frozen20": _pgd_config(cfg, freeze_after=20),
    }
    curves, timings = {}, {}
    for name, config in variants.items():
        curves[name], timings[name] = _run_variant(cfg, scene, ens, config)
    iters = len(next(iter(curves.values())))
    with open(out / "ns_compare.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter"] + list(curves))
        for i in range(iters):
            writer.writerow([i + 1] + [f"{curves[k][i]:.4f}" for k in curves])
    report = {
        "max_gap_tracked_exact": float(np.max(np.abs(
            np.array(curves["tracked"]) - np.array(curves["exact"])))),
        "timings_seconds": timings,
        "step_timing": step_timing(ens, sensing.init_estimate(ens)),
        "curves": {k: [float(v) for v in c] for k, c in curves.items()},
    }
    _write_report(out, cfg, report)
    return report


def ns_convergence_trial(a: np.ndarray, delta: float, rng: np.random.Generator,
                         max_steps: int = 20, x_min: float = 0.001,
                         tol: float = 1e-12) -> bool:
    """One warm-start Newton-Schulz stability trial in the complex domain.

    Draws x ~ U[x_min, 1], flips each pixel by +-delta, starts from the
    exact inverse of B0 = A X^2 A^H and refines toward
    B1 = A (X+dX)^2 A^H.  Success means the residual ||I - M_k B1||
    decreases at every step (declared early once it falls below ``tol``,
    where further steps only churn roundoff).

    The refinement M' = M + M(I - B1 M) satisfies
    I - B1 M' = (I - B1 M)^2, so the trial squares the initial residual
    E0 = B0^{-1}(B0 - B1) rather than carrying M itself, which halves
    the matrix products per step.
    """
    n = a.shape[1]
    x = rng.uniform(x_min, 1.0, size=n)
    dx = delta * rng.choice([-1.0, 1.0], size=n)
    ax = a * x
    axp = a * (x + dx)
    # Hermitian rank-k assembly fills only the upper triangles
    b0u = scipy.linalg.blas.zherk(1.0, ax)
    b1u = scipy.linalg.blas.zherk(1.0, axp)
    diff = b0u - b1u
    diff = np.triu(diff) + np.triu(diff, 1).conj().T
    cf = scipy.linalg.cho_factor(b0u, lower=False, check_finite=False)
    e = scipy.linalg.cho_solve(cf, diff, check_finite=False)
    prev = float(np.linalg.norm(e))
    for _ in range(max_steps):
        e = e @ e
        res = float(np.linalg.norm(e))
        if not np.isfinite(res) or res >= prev:
            return False
        if res < tol:
            return True
        prev = res
    return True


def run_threshold_study(cfg: ExperimentConfig) -> dict:
    """Success rate of warm-start Newton-Schulz vs perturbation size."""
    cfg.validate()
    out = _out_dir(cfg)
    n = cfg.height * cfg.width
    m = max(1, round(cfg.m_over_n * n))
    rows = []
    for delta in cfg.deltas:
        a = sensing.haar_partial(m, n, seed=cfg.seed + int(round(delta * 1000)))
        rng = np.random.default_rng(cfg.seed)
        successes = sum(
            ns_convergence_trial(a, delta, rng) for _ in range(cfg.trials))
        rate = successes / cfg.trials
        rows.append((delta, rate))
        log.info("delta=%.3f success rate %.2f", delta, rate)
    with open(out / "threshold.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["delta", "success_rate"])
        writer.writerows(rows)
    report = {"rates": {f"{d:.3f}": r for d, r in rows}}
    _write_report(out, cfg, report)
    return report


def run_scaling_study(cfg: ExperimentConfig,
                      m_over_n_grid=(0.125, 0.25, 0.5),
                      looks_grid=(25, 50, 100)) -> dict:
    """Mean PSNR over a (m, L) grid and the implied doubling gains."""
    cfg.validate()
    out = _out_dir(cfg)
    results = {}
    rows = []
    for mon in m_over_n_grid:
        for looks in looks_grid:
            psnrs = []
            for seed in cfg.seeds:
                sub = parse_config(None, {**_cfg_dict(cfg), "m_over_n": mon,
                                          "num_looks": looks, "seed": seed})
                scene, ens = _make_problem(sub, seed=seed)
                config = _pgd_config(sub)
                state = pgd.make_state(ens, config)
                x_hat, _ = pgd.iterate(state, ens, config, scene.shape,
                                       reference=scene)
                val = metrics.psnr(x_hat.reshape(scene.shape), scene.pixels)
                psnrs.append(val)
                rows.append((mon, looks, seed, val))
                log.info("m/n=%.3f L=%d seed=%d psnr=%.2f", mon, looks, seed, val)
            results[(mon, looks)] = float(np.mean(psnrs))
    with open(out / "scaling.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["m_over_n", "num_looks", "seed", "psnr"])
        writer.writerows(rows)
    gains_m = [results[(m_over_n_grid[i + 1], looks)] - results[(m_over_n_grid[i], looks)]
               for i in range(len(m_over_n_grid) - 1) for looks in looks_grid]
    gains_l = [results[(mon, looks_grid[i + 1])] - results[(mon, looks_grid[i])]
               for mon in m_over_n_grid for i in range(len(looks_grid) - 1)]
    report = {
        "mean_psnr": {f"{mon}/{looks}": v for (mon, looks), v in results.items()},
        "doubling_gain_m_db": float(np.mean(gains_m)),
        "doubling_gain_l_db": float(np.mean(gains_l)),
    }
    _write_report(out, cfg, report)
    return report


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    return d


OVERFIT_PRESETS = {
    "k1-simple": decoder.DecoderArch(channels=(100, 50, 25, 10), kernel=1),
    "k3-simple": decoder.DecoderArch(channels=(100, 50, 25, 10), kernel=3),
    "k1-wide": decoder.DecoderArch(channels=(128, 128, 128, 128), kernel=1),
    "k3-wide": decoder.DecoderArch(channels=(128, 128, 128, 128), kernel=3),
}


def decoder_fit_curve(target: np.ndarray, clean: np.ndarray,
                      arch: decoder.DecoderArch, iters: int, seed: int,
                      lr: float = 1e-3, record_every: int = 10):
    """Fit to ``target`` while recording PSNR of the output against ``clean``."""
    rng = np.random.default_rng(seed)
    params = decoder.init_params(arch, target.shape[0], target.shape[1], rng)
    curve = []
    out = decoder.forward(params, arch)
    for it in range(1, iters + 1):
        gws, gbs = decoder.backward(params, arch, out - target)
        decoder.adam_step(params, gws, gbs, lr)
        out = decoder.forward(params, arch)
        if it % record_every == 0 or it == iters:
            curve.append((it, metrics.psnr(out, clean)))
    return curve


def run_overfit_study(cfg: ExperimentConfig) -> dict:
    """PSNR-to-clean fitting curves for the four decoder presets on a clean
    and a Gaussian-noise-corrupted target."""
    cfg.validate()
    out = _out_dir(cfg)
    clean = _load_scene(cfg).pixels
    rng = np.random.default_rng(cfg.seed)
    noisy = np.clip(clean + cfg.noise_sigma * rng.standard_normal(clean.shape), 0, 1)
    curves = {}
    for name, arch in OVERFIT_PRESETS.items():
        for label, target in (("clean", clean), ("noisy", noisy)):
            key = f"{name}-{label}"
            curves[key] = decoder_fit_curve(target, clean, arch, cfg.fit_iters,
                                            seed=cfg.seed)
            log.info("%s final psnr-to-clean %.2f", key, curves[key][-1][1])
    with open(out / "overfit.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["preset", "target", "iter", "psnr_to_clean"])
        for key, curve in curves.items():
            preset, label = key.rsplit("-", 1)
            for it, val in curve:
                writer.writerow([preset, label, it, f"{val:.4f}"])
    report = {key: {"final": curve[-1][1],
                    "peak": max(v for _, v in curve),
                    "peak_iter": max(curve, key=lambda p: p[1])[0]}
              for key, curve in curves.items()}
    _write_report(out, cfg, report)
    return report
