"""Tests for unreliable unlabeled data: too few latent negatives, or a shift.

Both procedures score two samples with a trained (or random) scorer and
compare the score distributions with a two-sided Mann-Whitney U test.

* High alpha: labeled positives vs unlabeled. Indistinguishable outputs
  (``p > p_crit``) mean the unlabeled data holds almost no negatives.
* Negative shift: train-time vs test-time unlabeled. Different outputs
  (``p < p_crit``) mean the negative distribution moved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .stats import Alternative, mann_whitney_u

DEFAULT_P_CRIT = 0.1
MIN_SAMPLE = 20
MIN_CALIBRATION_SAMPLE = 40


class Mode(str, enum.Enum):
    HIGH_ALPHA = "HighAlpha"
    NEGATIVE_SHIFT = "NegativeShift"


class Recommendation(str, enum.Enum):
    USE_PU = "UsePu"
    USE_OC = "UseOcOrRobustPuOc"


@dataclass(frozen=True)
class ReliabilityVerdict:
    p_value: float
    p_crit: float
    unreliable: bool
    mode: Mode
    recommendation: Recommendation

    def to_dict(self):
        return {
            "p_value": self.p_value,
            "p_crit": self.p_crit,
            "unreliable": self.unreliable,
            "mode": self.mode.value,
            "recommendation": self.recommendation.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["p_value"], d["p_crit"], d["unreliable"], Mode(d["mode"]), Recommendation(d["recommendation"]))


def verdict(p_value, p_crit, mode):
    """Apply the decision rule of ``mode`` to a p-value."""
    mode = Mode(mode)
    if mode is Mode.HIGH_ALPHA:
        unreliable = p_value > p_crit
    else:
        unreliable = p_value < p_crit
    rec = Recommendation.USE_OC if unreliable else Recommendation.USE_PU
    return ReliabilityVerdict(float(p_value), float(p_crit), bool(unreliable), mode, rec)


def _scores(scorer, X, name, minimum):
    X = np.asarray(X, dtype=float)
    if len(X) < minimum:
        raise ValueError(f"{name} has {len(X)} points, need at least {minimum}")
    return scorer.decision_function(X)


def score_test(scorer, sample_a, sample_b, minimum=MIN_SAMPLE):
    a = _scores(scorer, sample_a, "first sample", minimum)
    b = _scores(scorer, sample_b, "second sample", minimum)
    return mann_whitney_u(a, b, Alternative.TWO_SIDED)


def detect_high_alpha(scorer, pos_sample, unl_sample, p_crit=DEFAULT_P_CRIT):
    report = score_test(scorer, pos_sample, unl_sample)
    return verdict(report.p_value, p_crit, Mode.HIGH_ALPHA)


def calibrate_p_crit(scorer, reference_sample, seed):
    """p-value of the test between two seeded random halves of one sample."""
    X = np.asarray(reference_sample, dtype=float)
    if len(X) < MIN_CALIBRATION_SAMPLE:
        raise ValueError(f"reference sample has {len(X)} points, need at least {MIN_CALIBRATION_SAMPLE}")
    perm = np.random.default_rng(int(seed)).permutation(len(X))
    half = len(X) // 2
    return score_test(scorer, X[perm[:half]], X[perm[half:]]).p_value


def detect_negative_shift(scorer, unl_train, unl_test, p_crit):
    report = score_test(scorer, unl_train, unl_test)
    return verdict(report.p_value, p_crit, Mode.NEGATIVE_SHIFT)
