"""Noisy projected SGD with a fresh-sample stopping rule, plus utility probes.

The main loop draws a uniform dataset index each step. The first time an
index appears, a subgradient is computed at the current iterate and the
update uses gradient + Gaussian noise; on repeat draws the update is
noise-only. The run halts once more than half the indices have been seen,
and outputs the average of the iterates held at the fresh steps.

Noise convention: sigma is the per-coordinate standard deviation, i.e.
noise is N(0, sigma^2 * I). This matches the accountant in privacy.py.

A single run is strictly sequential; independent runs (distinct seeds) are
safe to execute concurrently since all state is per-run.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, OverrunError
from .geometry import Potential, mirror_step
from .losses import draw_arrays, draw_dataset
from .sampler import FreshSet, fresh_target, sample_index

DEFAULT_MAX_STEPS_FACTOR = 4


@dataclass(frozen=True)
class RunConfig:
    """Full parameterization of one private run.

    max_steps defaults to 4n; exceeding it raises OverrunError rather than
    silently truncating (the stopping rule makes overrun exponentially
    unlikely at that cap).
    """

    n: int
    d: int
    eta: float
    sigma: float
    feasible_set: object
    oracle: object
    w1: np.ndarray
    seed: int
    max_steps: int = None

    def resolved_max_steps(self):
        if self.max_steps is None:
            return DEFAULT_MAX_STEPS_FACTOR * self.n
        return self.max_steps

    def validate(self):
        if self.n < 1:
            raise ConfigurationError(f"RunConfig: n must be >= 1, got {self.n}")
        if self.d != self.feasible_set.dimension:
            raise ConfigurationError(
                f"RunConfig: d={self.d} != set dimension {self.feasible_set.dimension}"
            )
        if self.eta <= 0:
            raise ConfigurationError(f"RunConfig: eta must be positive, got {self.eta}")
        if self.sigma < 0:
            raise ConfigurationError(f"RunConfig: sigma must be >= 0, got {self.sigma}")
        if self.resolved_max_steps() < self.n:
            raise ConfigurationError("RunConfig: max_steps must be at least n")
        w1 = np.asarray(self.w1, dtype=float)
        if w1.shape != (self.d,):
            raise ConfigurationError("RunConfig: w1 does not match dimension d")
        if not self.feasible_set.contains(w1):
            raise ConfigurationError("RunConfig: w1 lies outside the feasible set")


@dataclass(frozen=True)
class StepRecord:
    t: int
    index: int
    fresh: bool
    iterate_before: np.ndarray
    noise_norm: float


@dataclass
class RunTrace:
    steps: list
    tau: int
    fresh_step_times: list
    output: np.ndarray


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    eval_samples: int


def run_streams(seed):
    """Two independent generators (index draws, noise draws) from one seed.

    Keeping the streams separate means the sampled index sequence is
    invariant to sigma, so noisy and noiseless runs with the same seed see
    the same data order.
    """
    idx_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(idx_ss), np.random.default_rng(noise_ss)


def private_sgd(config, dataset):
    """Run the private optimizer on a dataset of exactly config.n points.

    Each step: draw an index; if unseen, step against the noisy subgradient
    at the current iterate and mark it seen; otherwise step against noise
    alone. Both step kinds go through the mirror-descent update and are
    projected back onto the feasible set.

    Returns a RunTrace whose output is the average of the iterates at fresh
    steps (the iterate the subgradient was evaluated at, not the updated
    one). Fully deterministic given config.seed.

    Raises OverrunError (carrying the partial trace) if the stopping rule
    has not fired within max_steps.
    """
    config.validate()
    if len(dataset) != config.n:
        raise ConfigurationError(
            f"private_sgd: dataset has {len(dataset)} points, config.n={config.n}"
        )
    idx_rng, noise_rng = run_streams(config.seed)
    potential = Potential.euclidean(config.d)
    max_steps = config.resolved_max_steps()

    w = np.asarray(config.w1, dtype=float).copy()
    fresh = FreshSet(config.n)
    steps = []
    fresh_times = []
    fresh_iterate_sum = np.zeros(config.d)
    t = 0
    while not fresh.should_stop():
        t += 1
        if t > max_steps:
            partial = RunTrace(steps=steps, tau=t - 1,
                               fresh_step_times=fresh_times, output=None)
            raise OverrunError(
                f"private_sgd: no stop after max_steps={max_steps} "
                f"({fresh.count}/{fresh_target(config.n)} fresh)", trace=partial)
        idx = sample_index(idx_rng, config.n)
        # Always drawn, so the noise stream position is sigma-independent.
        xi = config.sigma * noise_rng.standard_normal(config.d)
        was_fresh = fresh.record(idx)
        if was_fresh:
            g = config.oracle.subgradient(w, dataset[idx]) + xi
            fresh_times.append(t)
            fresh_iterate_sum += w
        else:
            g = xi
        steps.append(StepRecord(t=t, index=idx, fresh=was_fresh,
                                iterate_before=w.copy(),
                                noise_norm=float(np.linalg.norm(xi))))
        w = mirror_step(potential, config.feasible_set, w, g, config.eta)

    output = fresh_iterate_sum / len(fresh_times)
    return RunTrace(steps=steps, tau=t, fresh_step_times=fresh_times, output=output)


def estimate_regret(trace, dataset, comparator, config):
    """Sum over fresh steps of f(w_t, x_t) - f(u, x_t).

    Stale steps contribute nothing: their loss is a pure noise linear term
    with zero mean, so only the fresh-step losses carry signal.
    """
    u = np.asarray(comparator, dtype=float)
    if not config.feasible_set.contains(u):
        raise ConfigurationError("estimate_regret: comparator lies outside the set")
    total = 0.0
    for t in trace.fresh_step_times:
        rec = trace.steps[t - 1]
        point = dataset[rec.index]
        total += config.oracle.value(rec.iterate_before, point)
        total -= config.oracle.value(u, point)
    return total


def estimate_risk(w, population, oracle, eval_samples, rng=None):
    """Monte-Carlo mean and standard error of the loss at w on fresh draws."""
    if eval_samples < 1:
        raise ConfigurationError("estimate_risk: eval_samples must be >= 1")
    features, labels = draw_arrays(population, eval_samples, rng)
    values = oracle.batch_values(np.asarray(w, dtype=float), features, labels)
    mean = float(values.mean())
    if eval_samples == 1:
        return RiskEstimate(mean=mean, stderr=0.0, eval_samples=1)
    stderr = float(values.std(ddof=1) / math.sqrt(eval_samples))
    return RiskEstimate(mean=mean, stderr=stderr, eval_samples=eval_samples)


@dataclass(frozen=True)
class BaselineResult:
    """Non-private reference minimizer and a bound on its own suboptimality."""

    w: np.ndarray
    error_bound: float
    budget_steps: int
    holdout_size: int


def baseline_minimizer(population, oracle, feasible_set, budget_steps,
                       seed=0, holdout_size=None):
    """Averaged projected subgradient descent as a stand-in for the true optimum.

    Runs budget_steps of SGD with step size D/(L*sqrt(t)) over a held-out
    sample, returning the uniform iterate average. The reported error_bound
    combines the standard averaged-SGD guarantee (1.5*D*L/sqrt(T)) with a
    holdout-size term (D*L/sqrt(m)); callers should fold it into any bound
    they check against this reference point.
    """
    if budget_steps < 10_000:
        raise ConfigurationError("baseline_minimizer: budget_steps must be >= 10^4")
    if holdout_size is None:
        holdout_size = max(100_000, budget_steps)
    D = feasible_set.diameter()
    L = oracle.lipschitz_L
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, 0x6261]))
    holdout = draw_dataset(population, holdout_size, rng)

    w = feasible_set.project(np.zeros(feasible_set.dimension))
    average = np.zeros(feasible_set.dimension)
    for t in range(1, budget_steps + 1):
        point = holdout[int(rng.integers(0, holdout_size))]
        g = oracle.subgradient(w, point)
        average += w
        eta_t = D / (L * math.sqrt(t))
        w = feasible_set.project(w - eta_t * g)
    average /= budget_steps

    error = 1.5 * D * L / math.sqrt(budget_steps) + D * L / math.sqrt(holdout_size)
    return BaselineResult(w=average, error_bound=error,
                          budget_steps=budget_steps, holdout_size=holdout_size)


def write_trace_csv(trace, path):
    """Columns: t,index,fresh,noise_norm."""
    with open(path, "w") as fh:
        fh.write("t,index,fresh,noise_norm\n")
        for rec in trace.steps:
            fresh = "true" if rec.fresh else "false"
            fh.write(f"{rec.t},{rec.index},{fresh},{rec.noise_norm:.17g}\n")


def write_run_summary(path, config, trace, regret=None, risk=None):
    """Self-describing JSON record of one run: config echo plus results."""
    payload = {
        "config": {
            "n": config.n, "d": config.d, "eta": config.eta,
            "sigma": config.sigma, "seed": config.seed,
            "max_steps": config.resolved_max_steps(),
            "set": config.feasible_set.kind,
            "diameter": config.feasible_set.diameter(),
            "loss": config.oracle.kind,
            "lipschitz_L": config.oracle.lipschitz_L,
            "w1": [float(v) for v in np.asarray(config.w1)],
        },
        "tau": trace.tau,
        "fresh_steps": len(trace.fresh_step_times),
        "output": [float(v) for v in trace.output],
    }
    if regret is not None:
        payload["regret"] = regret
    if risk is not None:
        payload["risk"] = {"mean": risk.mean, "stderr": risk.stderr,
                           "eval_samples": risk.eval_samples}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
