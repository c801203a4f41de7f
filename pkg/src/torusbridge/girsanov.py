"""Change-of-measure weights for simulated bridge proposals.

For a path of ``dX = b dt + sigma dW`` the exponential
``exp(-int b dW - 1/2 int |b|^2 dt)`` over [0, S], S < T, reweights
proposal expectations back to those of the driftless scaled process.
The stochastic integral is discretised with the left-point rule on the
same grid and increments that drove the simulation, so the weight
corresponds exactly to the discrete path actually produced.

The nearest-lift drift is uniformly bounded away from the terminal time
(no point of the plane is farther than half a square diagonal from its
attracting lift), which gives the explicit constant behind the moment
bound ensuring the exponential is a true martingale on [0, S].  Both the
constant and the resulting bound are exposed for the tests that verify
them against simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .drift import DriftModel, ProposedBridge, drift

if TYPE_CHECKING:  # pragma: no cover
    from .engine import PathSample

__all__ = [
    "WeightedPath",
    "cutoff_index",
    "path_log_weights",
    "log_girsanov_weight",
    "weigh_path",
    "drift_bound_constant",
    "novikov_bound",
]

# sup |nearest lift - x|^2 over points off the cut locus: the squared
# half diagonal of the unit square.
SUP_PULL_SQ = 0.5

_GRID_TOL = 1e-9


def cutoff_index(dt: float, n_steps: int, horizon: float, cutoff_S: float) -> int:
    """Grid index of the weight cutoff S, validating 0 < S < T on-grid.

    Raises:
        ValueError: if S is outside (0, T) or not a grid time.
    """
    if not (np.isfinite(cutoff_S) and 0.0 < cutoff_S < horizon):
        raise ValueError(
            f"cutoff must lie strictly inside (0, {horizon}); got {cutoff_S}"
        )
    j = int(round(cutoff_S / dt))
    if j < 1 or j > n_steps - 1 or abs(j * dt - cutoff_S) > _GRID_TOL * max(1.0, horizon):
        raise ValueError(
            f"cutoff {cutoff_S} does not lie on the time grid (dt={dt}) before T"
        )
    return j


def path_log_weights(
    times: np.ndarray,
    states: np.ndarray,
    increments: np.ndarray,
    model: DriftModel,
    cutoff_S: float,
) -> np.ndarray | float:
    """Discretised log weights over [0, S] for one path or a stack of paths.

    Computes ``- sum_{t_i < S} b(t_i, x_i) . dW_i
    - 1/2 sum_{t_i < S} |b(t_i, x_i)|^2 dt`` with the model's drift.

    Args:
        times: grid of length n_steps + 1.
        states: shape (..., n_steps + 1, 2).
        increments: driving dW, shape (..., n_steps, 2).
        model: drift model the path was simulated under.
        cutoff_S: grid time strictly inside (0, T).

    Returns:
        Log weight(s) with the leading shape of ``states``.
    """
    if increments is None:
        raise ValueError("log weights require recorded increments")
    states = np.asarray(states, dtype=float)
    increments = np.asarray(increments, dtype=float)
    n_steps = increments.shape[-2]
    if states.shape[-2] != n_steps + 1 or len(times) != n_steps + 1:
        raise ValueError("states, increments and times disagree on the step count")
    dt = model.horizon / n_steps
    k = cutoff_index(dt, n_steps, model.horizon, cutoff_S)
    acc = np.zeros(states.shape[:-2])
    for i in range(k):
        b = drift(times[i], states[..., i, :], model)
        acc = acc - (b * increments[..., i, :]).sum(axis=-1) \
                  - 0.5 * (b * b).sum(axis=-1) * dt
    if acc.ndim == 0:
        return float(acc)
    return acc


def log_girsanov_weight(path: "PathSample", model: DriftModel, cutoff_S: float) -> float:
    """Log change-of-measure weight of one recorded path on [0, S].

    The path must carry recorded increments; S must be a grid time with
    0 < S < T.  A zero-drift model gives exactly 0.  Under this weight,
    expectations of path functionals on [0, S] computed from proposal
    samples estimate those of the driftless sigma-scaled process.
    """
    if path.increments is None:
        raise ValueError("path does not carry recorded increments")
    out = path_log_weights(path.times, path.states, path.increments, model, cutoff_S)
    return float(out)


@dataclass(frozen=True)
class WeightedPath:
    """A path together with its log weight on [0, cutoff_S]."""

    path: "PathSample"
    log_weight: float
    cutoff_S: float


def weigh_path(path: "PathSample", model: DriftModel, cutoff_S: float) -> WeightedPath:
    """Attach the Girsanov log weight on [0, S] to a recorded path."""
    return WeightedPath(
        path=path,
        log_weight=log_girsanov_weight(path, model, cutoff_S),
        cutoff_S=cutoff_S,
    )


def drift_bound_constant(model: DriftModel, cutoff_S: float) -> float:
    """Uniform squared-drift bound C_S for the nearest-lift model on [0, S].

    Off the cut locus every point is within half a square diagonal of its
    attracting lift, so ``|b(t, x)|^2 <= (1/2) / (T - S)^2 =: C_S`` for
    all x and all t <= S.  If the model scales its drift by sigma^2 the
    bound carries the matching sigma^4 factor.

    Raises:
        TypeError: for model variants other than the nearest-lift bridge.
        ValueError: unless 0 <= S < T.
    """
    if not isinstance(model, ProposedBridge):
        raise TypeError(
            f"drift bound applies to the nearest-lift model; got {type(model).__name__}"
        )
    if not (0.0 <= cutoff_S < model.horizon):
        raise ValueError(f"need 0 <= S < T={model.horizon}; got S={cutoff_S}")
    c = SUP_PULL_SQ / (model.horizon - cutoff_S) ** 2
    if model.scale_by_sigma_sq:
        c *= model.sigma**4
    return c


def novikov_bound(model: DriftModel, t: float, cutoff_S: float) -> float:
    """Upper bound exp(t * C_S) for E[exp(int_0^t |b|^2 ds)], t <= S.

    The pathwise integral never exceeds t * C_S, so the expectation bound
    holds sample by sample; Monte Carlo estimates of the left side must
    stay below this value.

    Raises:
        ValueError: if t is outside [0, cutoff_S].
    """
    if not (0.0 <= t <= cutoff_S):
        raise ValueError(f"need 0 <= t <= S={cutoff_S}; got t={t}")
    return float(np.exp(t * drift_bound_constant(model, cutoff_S)))
