"""Privacy accountant for the noisy-SGD loop, plus an empirical audit.

The accounting pipeline has four stages:

  per-step      a single noisy gradient step with Gaussian noise of scale
                sigma = L*sqrt(3*ln(1/delta))/eps_tilde is (eps_tilde, delta)-DP
  subsampled    drawing the gradient index uniformly amplifies one step to
                ((m/n)*(e^eps_tilde - 1), (m/n)*delta)-DP
  composed      advanced composition over tau fixed steps, using
                e^eps_tilde - 1 <= 2*eps_tilde (valid for eps_tilde <= 1.256):
                eps = 2*eps_tilde*sqrt(2*tau*ln(1/delta_prime))/n
                      + 4*tau*eps_tilde^2/n^2,
                delta = tau*delta/n + delta_prime
  end-to-end    the whole run at tau = 2n with the stopping-time failure
                mass 2*exp(-n/16) folded into delta.

All logarithms are natural. Out-of-regime parameters raise RegimeError
instead of being clamped: a clamped answer would misstate the guarantee.
Monte-Carlo auditing of the per-step claim lives in audit_single_step.
Accountant functions are pure and safe to call concurrently.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, RegimeError

STAGE_PER_STEP = "per_step"
STAGE_SUBSAMPLED = "subsampled"
STAGE_COMPOSED = "composed"
STAGE_END_TO_END = "end_to_end"

# e^x - 1 <= 2x holds exactly up to this point.
LINEARIZATION_LIMIT = 1.256

# Audit needs this many trials per grid cell for stable tail estimates.
MIN_TRIALS_PER_CELL = 2000
MAX_GRID_CELLS = 500
# Interior grid half-width in noise units; everything beyond is lumped into
# the two outermost cells so no event has near-zero expected count.
AUDIT_RANGE_SIGMAS = 3.0


@dataclass(frozen=True)
class StepPrivacy:
    """Per-step guarantee before amplification: (epsilon_tilde, delta)-DP
    for a mechanism touching m of the n records."""

    epsilon_tilde: float
    delta: float
    n: int
    m: int = 1

    def report(self):
        return PrivacyReport(epsilon=self.epsilon_tilde, delta_total=self.delta,
                             stage=STAGE_PER_STEP)


@dataclass(frozen=True)
class PrivacyReport:
    epsilon: float
    delta_total: float
    stage: str
    assumptions: tuple = ()

    def to_dict(self):
        return {
            "stage": self.stage,
            "epsilon": self.epsilon,
            "delta_total": self.delta_total,
            "assumptions": list(self.assumptions),
        }


def _check_delta(delta, name="delta"):
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {delta}")


def calibrate_sigma(L, delta, epsilon_tilde):
    """Noise scale making one gradient step (epsilon_tilde, delta)-DP.

    sigma = L * sqrt(3 * ln(1/delta)) / epsilon_tilde, with L the bound on
    gradient norms (the step's sensitivity).
    """
    if L <= 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    if epsilon_tilde <= 0:
        raise ConfigurationError(f"epsilon_tilde must be positive, got {epsilon_tilde}")
    _check_delta(delta)
    return L * math.sqrt(3.0 * math.log(1.0 / delta)) / epsilon_tilde


def amplify_by_subsampling(step):
    """Amplify a per-step guarantee by the uniform-subsampling factor m/n."""
    if step.m > step.n:
        raise ConfigurationError(
            f"subsample size m={step.m} exceeds dataset size n={step.n}"
        )
    if step.m < 1 or step.n < 1:
        raise ConfigurationError("m and n must be >= 1")
    if step.epsilon_tilde <= 0:
        raise ConfigurationError("epsilon_tilde must be positive")
    _check_delta(step.delta)
    rate = step.m / step.n
    return PrivacyReport(
        epsilon=rate * math.expm1(step.epsilon_tilde),
        delta_total=rate * step.delta,
        stage=STAGE_SUBSAMPLED,
    )


def compose(step, tau, delta_prime):
    """Advanced composition of tau subsampled steps (m = 1).

    Valid only while e^eps_tilde - 1 <= 2*eps_tilde, i.e. eps_tilde <= 1.256,
    and for tau fixed in advance; both assumptions are recorded on the
    report. tau = 0 is allowed and gives the empty composition (0, delta').
    """
    if step.m != 1:
        raise ConfigurationError(
            f"compose covers the m=1 sampling scheme, got m={step.m}"
        )
    if tau < 0:
        raise ConfigurationError(f"tau must be >= 0, got {tau}")
    if step.epsilon_tilde > LINEARIZATION_LIMIT:
        raise RegimeError(
            f"epsilon_tilde={step.epsilon_tilde} > {LINEARIZATION_LIMIT}: "
            "the linearization e^x - 1 <= 2x fails, composed bound invalid"
        )
    if step.epsilon_tilde <= 0:
        raise ConfigurationError("epsilon_tilde must be positive")
    _check_delta(step.delta)
    _check_delta(delta_prime, "delta_prime")
    n = step.n
    eps = (2.0 * step.epsilon_tilde * math.sqrt(2.0 * tau * math.log(1.0 / delta_prime)) / n
           + 4.0 * tau * step.epsilon_tilde ** 2 / n ** 2)
    return PrivacyReport(
        epsilon=eps,
        delta_total=tau * step.delta / n + delta_prime,
        stage=STAGE_COMPOSED,
        assumptions=(
            f"e^x - 1 <= 2x linearization (requires epsilon_tilde <= {LINEARIZATION_LIMIT})",
            "tau fixed in advance, not data-dependent",
        ),
    )


@dataclass(frozen=True)
class EndToEndPlan:
    sigma: float
    eta: float
    report: PrivacyReport
    risk_bound: float

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "eta": self.eta,
            "risk_bound": self.risk_bound,
            "report": self.report.to_dict(),
        }


def end_to_end(n, epsilon, delta, delta_prime, L, D, d):
    """Full-run parameters and guarantee for a target per-record epsilon.

    Requires n >= 16 and epsilon <= 1/(2*sqrt(n)). Returns
      sigma = 8*L*sqrt(ln(1/delta)) / (sqrt(n)*epsilon)
      eta   = D / (sqrt(n)*(L + sigma*sqrt(d)))
    and the guarantee (4*epsilon*(sqrt(ln(1/delta')) + 2),
    delta + delta' + 2*exp(-n/16)), where the exponential term is the
    probability the run fails to stop within 2n steps. risk_bound is the
    matching excess-risk value 5LD/sqrt(n) + 20LD*sqrt(d*ln(1/delta))/(eps*n).
    """
    if n < 16:
        raise ConfigurationError(f"end_to_end requires n >= 16, got {n}")
    limit = 1.0 / (2.0 * math.sqrt(n))
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if epsilon > limit:
        raise RegimeError(
            f"epsilon={epsilon} violates epsilon <= 1/(2*sqrt(n)) = {limit}; "
            "the end-to-end guarantee only covers this regime"
        )
    _check_delta(delta)
    _check_delta(delta_prime, "delta_prime")
    if L <= 0 or D <= 0 or d < 1:
        raise ConfigurationError("L and D must be positive and d >= 1")

    sigma = 8.0 * L * math.sqrt(math.log(1.0 / delta)) / (math.sqrt(n) * epsilon)
    eta = D / (math.sqrt(n) * (L + sigma * math.sqrt(d)))
    report = PrivacyReport(
        epsilon=4.0 * epsilon * (math.sqrt(math.log(1.0 / delta_prime)) + 2.0),
        delta_total=delta + delta_prime + 2.0 * math.exp(-n / 16.0),
        stage=STAGE_END_TO_END,
        assumptions=(
            "conditioned on stopping within 2n steps; failure mass "
            "2*exp(-n/16) added to delta",
            "per-step epsilon_tilde = sqrt(n)*epsilon composed over tau = 2n",
        ),
    )
    risk_bound = (5.0 * L * D / math.sqrt(n)
                  + 20.0 * L * D * math.sqrt(d * math.log(1.0 / delta)) / (epsilon * n))
    return EndToEndPlan(sigma=sigma, eta=eta, report=report, risk_bound=risk_bound)


@dataclass(frozen=True)
class InternalBudget:
    epsilon: float
    delta: float
    delta_prime: float

    def to_dict(self):
        return {"epsilon": self.epsilon, "delta": self.delta,
                "delta_prime": self.delta_prime}


def from_target(eps_bar, delta_bar, n):
    """Split an overall (eps_bar, delta_bar) target into internal parameters.

    delta = delta' = delta_bar/3 and epsilon = eps_bar/(8*sqrt(ln(1/delta'))).
    Feeding the result to end_to_end yields a report dominated by the target,
    provided 6*exp(-n/16) <= delta_bar <= 3*e^-4 and the derived epsilon
    stays within end_to_end's regime epsilon <= 1/(2*sqrt(n)).
    """
    if eps_bar <= 0:
        raise ConfigurationError(f"eps_bar must be positive, got {eps_bar}")
    if n < 16:
        raise ConfigurationError(f"from_target requires n >= 16, got {n}")
    floor = 6.0 * math.exp(-n / 16.0)
    ceiling = 3.0 * math.exp(-4.0)
    if not floor <= delta_bar <= ceiling:
        raise RegimeError(
            f"delta_bar={delta_bar} violates 6*exp(-n/16) = {floor:.6g} "
            f"<= delta_bar <= 3*e^-4 = {ceiling:.6g}"
        )
    delta = delta_bar / 3.0
    epsilon = eps_bar / (8.0 * math.sqrt(math.log(1.0 / delta)))
    limit = 1.0 / (2.0 * math.sqrt(n))
    if epsilon > limit:
        raise RegimeError(
            f"derived epsilon={epsilon:.6g} violates epsilon <= 1/(2*sqrt(n)) "
            f"= {limit:.6g}; lower eps_bar or raise n "
            f"(need eps_bar <= 4*sqrt(ln(3/delta_bar)/n))"
        )
    return InternalBudget(epsilon=epsilon, delta=delta, delta_prime=delta)


@dataclass(frozen=True)
class AuditEvent:
    lo: float
    hi: float
    p_s: float
    p_sprime: float
    violation: float
    stderr: float


@dataclass
class AuditResult:
    """Outcome of a Monte-Carlo single-step DP audit.

    max_violation is the largest estimate of P[M(S) in E] - e^eps * P[M(S') in E]
    - delta over the tested events (both directions); significant is True if
    any event exceeded three times its own binomial standard error. cells
    holds the per-interval table in grid order for export.
    """

    max_violation: float
    max_violation_stderr: float
    significant: bool
    worst_lo: float
    worst_hi: float
    cells: list = field(default_factory=list)

    def to_dict(self):
        return {
            "max_violation": self.max_violation,
            "max_violation_stderr": self.max_violation_stderr,
            "significant": self.significant,
            "worst_lo": self.worst_lo,
            "worst_hi": self.worst_hi,
        }


def _direction_violations(p_a, p_b, eps, delta, trials):
    # p_a, p_b are empirical event probabilities; returns (violation, stderr)
    # for the direction "a against e^eps * b + delta". Products are clipped
    # at zero: cumulative probabilities can round a hair past 1.
    amp = math.exp(eps)
    violation = p_a - amp * p_b - delta
    var_a = max(p_a * (1.0 - p_a), 0.0) / trials
    var_b = max(p_b * (1.0 - p_b), 0.0) / trials
    return violation, math.sqrt(var_a + amp * amp * var_b)


def audit_single_step(sigma, L, epsilon_tilde, delta, trials,
                      grid_cells=MAX_GRID_CELLS, seed=0):
    """Empirically test the (epsilon_tilde, delta)-DP claim of one noisy step.

    Simulates the one-dimensional mechanism on two neighboring single-point
    datasets whose gradients at the audited iterate differ by exactly L:
    outputs are N(0, sigma^2) versus N(L, sigma^2). The partition is a
    deterministic grid spanning 3 noise units around both means; whatever
    falls outside is lumped into the two outermost (half-line) cells. Each
    partition cell is tested in both directions. The lumping keeps every
    event's expected count large enough that the 3-stderr rule is an honest
    significance test; splitting the far tails into slivers of a few counts
    would make false positives routine.

    Requires trials >= 2000 per grid cell (10^6 at the 500-cell default).
    """
    if sigma <= 0 or L <= 0:
        raise ConfigurationError("sigma and L must be positive")
    if epsilon_tilde <= 0:
        raise ConfigurationError("epsilon_tilde must be positive")
    _check_delta(delta)
    if grid_cells < 3 or grid_cells > MAX_GRID_CELLS:
        raise ConfigurationError(
            f"grid_cells must lie in [3, {MAX_GRID_CELLS}], got {grid_cells}"
        )
    if trials < MIN_TRIALS_PER_CELL * grid_cells:
        raise ConfigurationError(
            f"insufficient trials for {grid_cells} grid cells: need at least "
            f"{MIN_TRIALS_PER_CELL * grid_cells}, got {trials}"
        )

    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, 0xA0D1]))
    out_s = sigma * rng.standard_normal(trials)
    out_sprime = L + sigma * rng.standard_normal(trials)

    lo, hi = audit_grid_range(sigma, L)
    interior = np.linspace(lo, hi, grid_cells - 1)
    edges = np.concatenate([[-np.inf], interior, [np.inf]])
    p_s = np.histogram(out_s, bins=edges)[0] / trials
    p_sp = np.histogram(out_sprime, bins=edges)[0] / trials

    best = (-math.inf, 0.0, lo, hi)
    significant = False
    cells = []
    for i in range(grid_cells):
        worst = (-math.inf, 0.0)
        for a, b in ((p_s[i], p_sp[i]), (p_sp[i], p_s[i])):
            v, se = _direction_violations(a, b, epsilon_tilde, delta, trials)
            if v > worst[0]:
                worst = (v, se)
            if v > 0.0 and v > 3.0 * se:
                significant = True
        if worst[0] > best[0]:
            best = (worst[0], worst[1], float(edges[i]), float(edges[i + 1]))
        cells.append(AuditEvent(lo=float(edges[i]), hi=float(edges[i + 1]),
                                p_s=float(p_s[i]), p_sprime=float(p_sp[i]),
                                violation=float(worst[0]), stderr=float(worst[1])))

    return AuditResult(max_violation=float(best[0]),
                       max_violation_stderr=float(best[1]),
                       significant=significant,
                       worst_lo=best[2], worst_hi=best[3],
                       cells=cells)


def audit_grid_range(sigma, L):
    """Interior grid span used by the audit: 3 noise units past both means."""
    margin = AUDIT_RANGE_SIGMAS * sigma
    return min(0.0, L) - margin, max(0.0, L) + margin


def write_audit_csv(result, path):
    """Columns: interval_lo,interval_hi,p_S,p_Sprime,violation."""
    with open(path, "w") as fh:
        fh.write("interval_lo,interval_hi,p_S,p_Sprime,violation\n")
        for c in result.cells:
            fh.write(f"{c.lo:.17g},{c.hi:.17g},{c.p_s:.17g},"
                     f"{c.p_sprime:.17g},{c.violation:.17g}\n")
