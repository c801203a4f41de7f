"""End-to-end acceptance checks at their pinned tolerances.

Each criterion is a zero-argument callable returning a
:class:`CriterionResult`; ``run_all`` executes a selection and the CLI
``check`` subcommand prints one pass/fail line per criterion.  Seeds are
fixed constants so every run reproduces the same numbers.

The checks, in order:
  1. coupled agreement rate of the nearest-lift proposal against the
     exact bridge (sigma 0.8, 2000 pairs) inside [0.65, 0.92];
  2. terminal convergence of the proposal: 99% quantile of terminal
     torus distance <= 0.10 at dt 1e-3, non-increasing under refinement;
  3. single-endpoint bridge law at mid-time: mean and variance within
     3 standard errors of the closed form;
  4. weight martingale mean 1 and importance-sampling consistency of
     weighted moments against direct driftless simulation;
  5. uniform drift bound, fuzzed over 1e5 points, plus the pathwise
     integral bound with C_S = 0.5 / (T - S)^2;
  6. the softmax drift equals sigma^2 times the numerical gradient of
     the wrapped Gaussian log density (relative tolerance 1e-5);
  7. the wrapped Gaussian density integrates to 1 over the fundamental
     domain within 1e-6 (400 x 400 midpoint rule);
  8. byte-identical CSV output under re-runs and any worker count.
"""

from __future__ import annotations

import filecmp
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import agreement_rate, terminal_convergence
from .drift import (
    EuclideanBridge,
    FreeBrownianMotion,
    ProposedBridge,
    TrueBridge,
    proposed_drift,
    true_bridge_drift,
    wrapped_gaussian_log_density,
)
from .engine import SimConfig, simulate_batch

__all__ = ["CriterionResult", "CRITERIA", "run_all"]


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    details: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  criterion {self.index} ({self.name}): {self.details}"


def check_agreement_rate() -> CriterionResult:
    """Coupled proposal/exact-bridge agreement rate in [0.65, 0.92]."""
    a = (0.0, 0.0)
    base = dict(start=a, n_steps=1000, seed=1001, n_paths=2000)
    prop = SimConfig(model=ProposedBridge(sigma=0.8, horizon=1.0, target=a), **base)
    true = SimConfig(model=TrueBridge(sigma=0.8, horizon=1.0, target=a, truncation=2), **base)
    report = agreement_rate(prop, true)
    lo, hi = 0.65, 0.92
    ok = lo <= report.rate <= hi
    return CriterionResult(
        1,
        "agreement-rate",
        ok,
        f"rate={report.rate:.4f} (wilson [{report.wilson_low:.4f}, {report.wilson_high:.4f}]) "
        f"target band [{lo}, {hi}], n_pairs={report.n_pairs}",
    )


def check_terminal_convergence() -> CriterionResult:
    """Terminal torus distance: q99 <= 0.10 at dt=1e-3, refining monotonely."""
    a = (0.0, 0.0)
    q99 = {}
    for n_steps, seed in ((250, 1002), (500, 1003), (1000, 1004)):
        cfg = SimConfig(
            model=ProposedBridge(sigma=0.8, horizon=1.0, target=a),
            start=a,
            n_steps=n_steps,
            seed=seed,
            n_paths=2000,
        )
        batch = simulate_batch(cfg, keep_paths=False)
        q99[n_steps] = terminal_convergence(batch, a).q99
    fine_ok = q99[1000] <= 0.10
    # Non-increasing under refinement, with 10% Monte Carlo slack.
    mono_ok = q99[500] <= 1.10 * q99[250] and q99[1000] <= 1.10 * q99[500]
    return CriterionResult(
        2,
        "terminal-convergence",
        fine_ok and mono_ok,
        "q99 = "
        + ", ".join(f"{1.0 / n:g}: {q99[n]:.4f}" for n in (250, 500, 1000))
        + f"; q99(dt=1e-3) <= 0.10: {fine_ok}, refinement monotone within 10%: {mono_ok}",
    )


def check_euclidean_bridge_law() -> CriterionResult:
    """Mid-time marginal of the single-endpoint bridge matches the closed form."""
    endpoint = (0.3, 0.2)
    cfg = SimConfig(
        model=EuclideanBridge(sigma=1.0, horizon=1.0, endpoint=endpoint),
        start=(0.0, 0.0),
        n_steps=1000,
        seed=1005,
        n_paths=10_000,
    )
    batch = simulate_batch(cfg, keep_paths=False, snapshot_steps=[500])
    x = batch.snapshots[500]
    n = x.shape[0]
    mean_expect = np.array([0.15, 0.10])  # (t/T) * endpoint at t = 0.5
    var_expect = 0.25  # sigma^2 t (T - t) / T
    mean = x.mean(axis=0)
    var = x.var(axis=0, ddof=1)
    se_mean = x.std(axis=0, ddof=1) / np.sqrt(n)
    se_var = var * np.sqrt(2.0 / (n - 1))
    mean_ok = np.all(np.abs(mean - mean_expect) <= 3 * se_mean)
    var_ok = np.all(np.abs(var - var_expect) <= 3 * se_var)
    return CriterionResult(
        3,
        "euclidean-bridge-law",
        bool(mean_ok and var_ok),
        f"mean={mean.round(4).tolist()} vs {mean_expect.tolist()} (3se={3 * se_mean.round(5)}), "
        f"var={var.round(4).tolist()} vs {var_expect} (3se={3 * se_var.round(5)})",
    )


def check_girsanov_consistency() -> CriterionResult:
    """Weight martingale mean 1; weighted moments match direct simulation."""
    a = (0.0, 0.0)
    S = 0.5
    cfg_prop = SimConfig(
        model=ProposedBridge(sigma=1.0, horizon=1.0, target=a),
        start=a,
        n_steps=1000,
        seed=1006,
        n_paths=10_000,
    )
    cfg_free = SimConfig(
        model=FreeBrownianMotion(sigma=1.0, horizon=1.0),
        start=a,
        n_steps=1000,
        seed=1007,
        n_paths=10_000,
    )
    prop = simulate_batch(cfg_prop, keep_paths=False, snapshot_steps=[500], weight_cutoff=S)
    free = simulate_batch(cfg_free, keep_paths=False, snapshot_steps=[500])
    w = np.exp(prop.log_weights)
    n = len(w)
    mart_dev = abs(w.mean() - 1.0)
    mart_ok = mart_dev <= 3 * w.std(ddof=1) / np.sqrt(n)

    xp = prop.snapshots[500]
    xf = free.snapshots[500]
    moment_ok = True
    worst = 0.0
    for f_p, f_f in ((xp, xf), (xp**2, xf**2)):
        wf = w[:, None] * f_p
        est_p = wf.mean(axis=0)
        se_p = wf.std(axis=0, ddof=1) / np.sqrt(n)
        est_f = f_f.mean(axis=0)
        se_f = f_f.std(axis=0, ddof=1) / np.sqrt(n)
        z = np.abs(est_p - est_f) / np.sqrt(se_p**2 + se_f**2)
        worst = max(worst, float(z.max()))
        moment_ok = moment_ok and bool(np.all(z <= 3.0))
    return CriterionResult(
        4,
        "girsanov-consistency",
        bool(mart_ok and moment_ok),
        f"mean(exp(logw))={w.mean():.4f} (dev {mart_dev:.4f} <= 3se {3 * w.std(ddof=1) / np.sqrt(n):.4f}: "
        f"{mart_ok}); worst moment z-score {worst:.2f} <= 3: {moment_ok}",
    )


def check_drift_bound() -> CriterionResult:
    """Uniform and pathwise drift bounds with C_S = 0.5 / (T - S)^2."""
    a = (0.0, 0.0)
    S, T = 0.5, 1.0
    model = ProposedBridge(sigma=1.0, horizon=T, target=a)
    rng = np.random.default_rng(1008)
    t = rng.uniform(0.0, S, size=100_000)
    x = rng.uniform(-2.0, 2.0, size=(100_000, 2))
    b = proposed_drift(t, x, model)
    sup_bound = np.sqrt(0.5) / (T - S)
    n_viol = int(np.sum(np.linalg.norm(b, axis=-1) > sup_bound * (1 + 1e-12)))

    cfg = SimConfig(model=model, start=a, n_steps=1000, seed=1009, n_paths=1000)
    batch = simulate_batch(cfg, keep_paths=True)
    times = cfg.time_grid()
    k = 500  # steps strictly before S
    dt = cfg.dt
    c_s = 0.5 / (T - S) ** 2
    states = np.stack([p.states for p in batch.paths])  # (n_paths, n+1, 2)
    bsq = np.empty((cfg.n_paths, k))
    for i in range(k):
        bi = proposed_drift(times[i], states[:, i], model)
        bsq[:, i] = (bi * bi).sum(axis=-1)
    partial = np.cumsum(bsq * dt, axis=1)
    limits = times[1 : k + 1] * c_s
    n_path_viol = int(np.sum(partial > limits * (1 + 1e-12)))
    ok = n_viol == 0 and n_path_viol == 0
    return CriterionResult(
        5,
        "drift-bound",
        ok,
        f"fuzz violations {n_viol}/100000 of |b| <= {sup_bound:.4f}; "
        f"pathwise violations {n_path_viol} of sum |b|^2 dt <= t * C_S (C_S={c_s})",
    )


def check_gradient_identity() -> CriterionResult:
    """Softmax drift equals sigma^2 times the numerical log-density gradient."""
    a = (0.0, 0.0)
    sigma, T, K = 0.8, 1.0, 3
    model = TrueBridge(sigma=sigma, horizon=T, target=a, truncation=K)
    rng = np.random.default_rng(1010)
    h = 1e-5
    checked = 0
    worst = 0.0
    while checked < 100:
        t = rng.uniform(0.0, 0.9)
        x = rng.uniform(-0.45, 0.45, size=2)
        b = true_bridge_drift(t, x, model)
        norm_b = np.linalg.norm(b)
        if norm_b < 1e-2:
            continue  # keep the relative comparison well conditioned
        grad = np.empty(2)
        for c in range(2):
            e = np.zeros(2)
            e[c] = h
            fp = wrapped_gaussian_log_density(t, x + e, T, a, sigma, K)
            fm = wrapped_gaussian_log_density(t, x - e, T, a, sigma, K)
            grad[c] = (fp - fm) / (2 * h)
        rel = np.linalg.norm(sigma**2 * grad - b) / norm_b
        worst = max(worst, float(rel))
        checked += 1
    ok = worst <= 1e-5
    return CriterionResult(
        6,
        "h-transform-gradient",
        ok,
        f"worst relative error {worst:.2e} over 100 points (tolerance 1e-5)",
    )


def check_density_normalization() -> CriterionResult:
    """Wrapped Gaussian integrates to 1 over the fundamental domain within 1e-6."""
    m, K, sigma, delta = 400, 5, 1.0, 0.1
    grid = (np.arange(m) + 0.5) / m - 0.5
    g1, g2 = np.meshgrid(grid, grid, indexing="ij")
    points = np.stack([g1.ravel(), g2.ravel()], axis=1)
    worst = 0.0
    for y in ((0.0, 0.0), (0.13, -0.27), (-0.5, -0.5)):
        total = 0.0
        for block in np.array_split(points, 16):
            ld = wrapped_gaussian_log_density(0.0, block, delta, y, sigma, K)
            total += np.exp(ld).sum()
        integral = total / m**2
        worst = max(worst, abs(integral - 1.0))
    ok = worst <= 1e-6
    return CriterionResult(
        7,
        "density-normalization",
        ok,
        f"max |integral - 1| = {worst:.2e} over 3 targets (tolerance 1e-6, {m}x{m} midpoint, K={K})",
    )


def check_determinism() -> CriterionResult:
    """Re-runs and different worker counts produce byte-identical CSVs."""
    from . import cli  # imported lazily; cli imports this module

    mismatches = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        sim_dir = root / "simulate_0"
        jobs = [
            ("simulate",
             ["simulate", "--model", "proposed", "--target", "0,0", "--sigma", "0.8",
              "--T", "1", "--steps", "200", "--paths", "64", "--seed", "42",
              "--cutoff", "0.5"],
             True, ["paths.csv", "endpoints.csv"]),
            ("compare",
             ["compare", "--sigma", "0.8", "--T", "1", "--steps", "200", "--pairs", "32",
              "--truncation", "2", "--seed", "5"],
             True, ["agreement.csv"]),
            ("field",
             ["field", "--model", "true-bridge", "--target", "0.1,-0.2", "--sigma", "0.8",
              "--T", "1", "--t", "0.9", "--grid", "9"],
             False, ["field.csv"]),
            ("weights",
             ["weights", "--manifest", str(sim_dir / "manifest.json"), "--cutoff", "0.5"],
             True, ["weights.csv"]),
        ]
        for name, args, threaded, files in jobs:
            dirs = [root / f"{name}_{i}" for i in range(3)]
            workers = ["1", "1", "4"] if threaded else ["1", "1", "1"]
            for d, w in zip(dirs, workers):
                extra = ["--workers", w] if threaded else []
                rc = cli.main(args + ["--out", str(d)] + extra)
                if rc != 0:
                    return CriterionResult(8, "determinism", False, f"{name} run failed (exit {rc})")
            for f in files:
                for other in dirs[1:]:
                    if not filecmp.cmp(dirs[0] / f, other / f, shallow=False):
                        mismatches.append(f"{name}/{f}")
    ok = not mismatches
    return CriterionResult(
        8,
        "determinism",
        ok,
        "all commands byte-identical across re-runs and workers {1,4}"
        if ok else f"mismatch in {mismatches}",
    )


CRITERIA: list[Callable[[], CriterionResult]] = [
    check_agreement_rate,
    check_terminal_convergence,
    check_euclidean_bridge_law,
    check_girsanov_consistency,
    check_drift_bound,
    check_gradient_identity,
    check_density_normalization,
    check_determinism,
]


def run_all(indices: list[int] | None = None) -> list[CriterionResult]:
    """Run the selected criteria (1-based indices; all by default)."""
    selected = indices or list(range(1, len(CRITERIA) + 1))
    results = []
    for i in selected:
        if not (1 <= i <= len(CRITERIA)):
            raise ValueError(f"criterion index must be in [1, {len(CRITERIA)}]; got {i}")
        results.append(CRITERIA[i - 1]())
    return results
