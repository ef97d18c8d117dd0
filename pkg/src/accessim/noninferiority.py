"""Multivariate non-inferiority testing.

For each performance measure, a one-sided hypothesis test checks that a
candidate configuration's mean is not worse than a reference's by more
than a tolerance.  With a lower-is-better measure the null is
mean_C - mean_R >= delta, rejected when the one-sided upper confidence
limit of the difference falls below delta; a higher-is-better measure
flips the direction.  Confidence limits use the unequal-variance
two-sample construction with Welch-Satterthwaite degrees of freedom.
Per-measure verdicts combine by intersection-union: the configurations
are equivalent only if every measure passes.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

LOWER_BETTER = "lower"
HIGHER_BETTER = "higher"


@dataclass(frozen=True)
class SampleSet:
    """Per-replication values of one measure, with its quality direction."""

    metric: str
    values: tuple
    direction: str

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError(f"{self.metric}: need >=2 replications, got {len(self.values)}")
        if self.direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise ValueError(f"unknown direction {self.direction!r}")
        if any(math.isnan(v) for v in self.values):
            raise ValueError(f"{self.metric}: NaN sample value")

    @property
    def mean(self):
        return float(np.mean(self.values))


@dataclass(frozen=True)
class ToleranceSpec:
    fraction: float = 0.10
    alpha: float = 0.05

    def __post_init__(self):
        if self.fraction <= 0:
            raise ValueError("tolerance fraction must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class MetricVerdict:
    metric: str
    direction: str
    delta: float
    difference: float       # mean_C - mean_R
    limit: float            # one-sided confidence limit of the difference
    passed: bool


@dataclass(frozen=True)
class NonInferiorityOutcome:
    verdicts: tuple
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", all(v.passed for v in self.verdicts))

    def verdict_for(self, metric):
        for v in self.verdicts:
            if v.metric == metric:
                return v
        raise KeyError(metric)


def tolerance_from_reference(reference, spec=ToleranceSpec()):
    """delta = fraction of the absolute reference sample mean."""
    mean = reference.mean
    if mean == 0:
        raise ValueError(f"{reference.metric}: zero reference mean gives a degenerate tolerance")
    return spec.fraction * abs(mean)


def _welch_limit(candidate, reference, alpha, side):
    """One-sided (1-alpha) confidence limit of mean_C - mean_R."""
    c = np.asarray(candidate, dtype=float)
    r = np.asarray(reference, dtype=float)
    nc, nr = len(c), len(r)
    diff = c.mean() - r.mean()
    vc = c.var(ddof=1) / nc
    vr = r.var(ddof=1) / nr
    se = math.sqrt(vc + vr)
    if se == 0.0:
        return diff, diff
    dof = (vc + vr) ** 2 / (vc**2 / (nc - 1) + vr**2 / (nr - 1))
    t = stats.t.ppf(1.0 - alpha, dof)
    limit = diff + t * se if side == "upper" else diff - t * se
    return diff, limit


def test_noninferior(candidate, reference, delta, alpha=0.05):
    """Per-measure verdict: is the candidate at most delta worse?"""
    if candidate.metric != reference.metric:
        raise ValueError(f"metric mismatch: {candidate.metric!r} vs {reference.metric!r}")
    if candidate.direction != reference.direction:
        raise ValueError(f"{candidate.metric}: direction mismatch")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if candidate.values == reference.values:
        # self-comparison: both sides are the same measurements, so the
        # difference is identically zero with zero spread
        return MetricVerdict(candidate.metric, candidate.direction, delta,
                             0.0, 0.0, True)
    if candidate.direction == LOWER_BETTER:
        diff, limit = _welch_limit(candidate.values, reference.values, alpha, "upper")
        passed = limit < delta
    else:
        diff, limit = _welch_limit(candidate.values, reference.values, alpha, "lower")
        passed = limit > -delta
    return MetricVerdict(candidate.metric, candidate.direction, delta, diff,
                         limit, passed)


def iut_combine(verdicts):
    """Intersection-union verdict: pass only if every component passes."""
    verdicts = tuple(verdicts)
    if not verdicts:
        raise ValueError("no per-metric verdicts to combine")
    return NonInferiorityOutcome(verdicts)


def compare_sample_sets(candidates, references, spec=ToleranceSpec()):
    """Run the full procedure over matched candidate/reference sample sets."""
    if [c.metric for c in candidates] != [r.metric for r in references]:
        raise ValueError("candidate and reference metric sets differ")
    verdicts = []
    for cand, ref in zip(candidates, references):
        delta = tolerance_from_reference(ref, spec)
        verdicts.append(test_noninferior(cand, ref, delta, spec.alpha))
    return iut_combine(verdicts)


@dataclass(frozen=True)
class ScanPoint:
    value: int              # scanned n or N
    outcome: NonInferiorityOutcome


@dataclass(frozen=True)
class ScanResult:
    variable: str           # "users" | "subscribers"
    points: tuple
    max_equivalent: int     # largest scanned value that passed; 0 if none


def _scan(variable, values, runner):
    points = []
    best = 0
    for value in values:
        outcome = runner(value)
        points.append(ScanPoint(value, outcome))
        if outcome.passed:
            best = max(best, value)
    return ScanResult(variable, tuple(points), best)


def find_max_n_eqv(runner, n_max, spec=ToleranceSpec()):
    """Largest users-per-subscriber whose shaped QoE is non-inferior.

    runner(n) must produce the NonInferiorityOutcome of the shaped
    configuration with n users against the unshaped reference at the same
    n.  The whole range 1..n_max is scanned and the maximal passing value
    returned, so a noisy dip at some intermediate n cannot truncate the
    answer.
    """
    del spec  # tolerance handling lives inside the runner's comparison
    return _scan("users", range(1, n_max + 1), runner)


def find_max_N_eqv(runner, N_max, spec=ToleranceSpec()):
    """Largest subscriber count whose shaped QoE is non-inferior.

    runner(N) compares the shaped configuration with N subscribers against
    the unshaped single-subscriber reference with the same users count.
    """
    del spec
    return _scan("subscribers", range(1, N_max + 1), runner)
