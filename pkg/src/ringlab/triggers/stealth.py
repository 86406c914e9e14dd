"""Mahalanobis-distance stealth screening of trigger samples.

Raw observations are position-speed data; convex combinations of positions
are not plausible states, so the screen works in spacing-speed coordinates
(v_av, v_leader, spacing), where the genuine cloud is convex-friendly.
"""

from dataclasses import dataclass

import numpy as np

from ringlab.errors import ConfigurationError

COND_LIMIT = 1e12


@dataclass
class StealthReport:
    """Per-trigger distances against the genuine-data ellipsoid."""

    distances: np.ndarray          # one per trigger sample
    genuine_distances: np.ndarray
    threshold: float               # p-percentile of genuine distances
    percentile: float
    passes: np.ndarray             # distances <= threshold

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passes))


def mahalanobis_distances(points: np.ndarray, mean: np.ndarray,
                          cov_inv: np.ndarray) -> np.ndarray:
    diff = np.atleast_2d(points) - mean
    return np.sqrt(np.einsum("ij,jk,ik->i", diff, cov_inv, diff))


def _inverse_cov(genuine: np.ndarray) -> tuple:
    mean = genuine.mean(axis=0)
    cov = np.cov(genuine, rowvar=False)
    cov = np.atleast_2d(cov)
    if np.linalg.cond(cov) > COND_LIMIT:
        dim = cov.shape[0]
        cov = cov + 1e-8 * np.trace(cov) / dim * np.eye(dim)
    if np.linalg.cond(cov) > COND_LIMIT:
        raise ConfigurationError("genuine covariance singular after regularization")
    return mean, np.linalg.inv(cov)


def mahalanobis_stealth(trigger_features: np.ndarray, genuine_features: np.ndarray,
                        percentile: float = 99.0) -> StealthReport:
    """Distance of each trigger from the genuine cloud, thresholded at the
    genuine distances' percentile. Features are spacing-speed rows."""
    genuine = np.atleast_2d(np.asarray(genuine_features, dtype=float))
    triggers = np.atleast_2d(np.asarray(trigger_features, dtype=float))
    if genuine.shape[0] < genuine.shape[1] + 1:
        raise ConfigurationError("need more genuine samples than dimensions")
    if triggers.shape[1] != genuine.shape[1]:
        raise ConfigurationError("feature dimensionality mismatch")
    mean, cov_inv = _inverse_cov(genuine)
    d_gen = mahalanobis_distances(genuine, mean, cov_inv)
    d_trig = mahalanobis_distances(triggers, mean, cov_inv)
    thr = float(np.percentile(d_gen, percentile))
    return StealthReport(d_trig, d_gen, thr, percentile, d_trig <= thr)
