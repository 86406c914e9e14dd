"""Latent-space backdoor audits: spectral signatures and activation clustering.

Both detectors work on penultimate-layer activations of the audited policy,
split into acceleration and deceleration sets by the sign of the labeled
action, mirroring how the defenses are run against regression controllers.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans
from sklearn.decomposition import FastICA, PCA
from sklearn.metrics import silhouette_score

from ringlab.errors import ConfigurationError

ICA_DIMS = 10
SILHOUETTE_GAP_THRESHOLD = 0.1
REMOVAL_MULTIPLIER = 1.5   # removal fraction = multiplier * poison rate
SILHOUETTE_SAMPLE = 4000   # pairwise-distance subsample for large batches


@dataclass
class RepresentationBatch:
    """Penultimate activations with per-row origin and action-class labels."""

    activations: np.ndarray   # (n, hidden_dim)
    origins: np.ndarray       # (n,) 0 genuine, 1 trigger
    action_class: np.ndarray  # (n,) +1 acceleration, -1 deceleration

    def __post_init__(self):
        if not (len(self.activations) == len(self.origins) == len(self.action_class)):
            raise ConfigurationError("batch arrays must share length")

    @classmethod
    def from_actions(cls, activations, origins, actions) -> "RepresentationBatch":
        accel = np.asarray(actions).reshape(len(activations), -1)[:, 0]
        return cls(np.asarray(activations), np.asarray(origins),
                   np.where(accel >= 0, 1, -1))

    def subset(self, mask) -> "RepresentationBatch":
        return RepresentationBatch(self.activations[mask], self.origins[mask],
                                   self.action_class[mask])


def spectral_scores(batch: RepresentationBatch) -> np.ndarray:
    """Squared projection of each centered row onto the top right-singular
    vector of the centered activation matrix."""
    if len(batch.activations) < 2:
        raise ConfigurationError("need at least 2 samples")
    centered = batch.activations - batch.activations.mean(axis=0)
    if not np.any(centered):
        warnings.warn("rank-0 activation matrix; all spectral scores are 0")
        return np.zeros(len(centered))
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return (centered @ vt[0]) ** 2


def spectral_separation_test(scores: np.ndarray, origins: np.ndarray,
                             removal_fraction: float | None = None) -> dict:
    """Detection verdict: flagged iff the top-scoring removal set captures
    more than half of the trigger samples."""
    scores = np.asarray(scores)
    origins = np.asarray(origins)
    if not (np.any(origins == 0) and np.any(origins == 1)):
        raise ConfigurationError("need both genuine and trigger samples")
    poison_rate = np.mean(origins == 1)
    frac = removal_fraction if removal_fraction is not None \
        else REMOVAL_MULTIPLIER * poison_rate
    n_remove = max(1, int(round(frac * len(scores))))
    removed = np.argsort(scores)[::-1][:n_remove]
    caught = int(np.sum(origins[removed] == 1))
    n_triggers = int(np.sum(origins == 1))
    detected = caught > 0.5 * n_triggers
    return {
        "detected": bool(detected),
        "removal_fraction": frac,
        "n_removed": n_remove,
        "triggers_caught": caught,
        "n_triggers": n_triggers,
    }


def _silhouette(x: np.ndarray, labels: np.ndarray, seed: int) -> float:
    if len(np.unique(labels)) < 2:
        return 0.0
    kw = {}
    if len(x) > SILHOUETTE_SAMPLE:
        kw = {"sample_size": SILHOUETTE_SAMPLE,
              "random_state": np.random.RandomState(seed)}
    return float(silhouette_score(x, labels, **kw))


def activation_clustering(batch: RepresentationBatch, ica_dims: int = ICA_DIMS,
                          k: int = 2, seed: int = 0,
                          gap_threshold: float = SILHOUETTE_GAP_THRESHOLD) -> dict:
    """ICA reduction then k-means; poisoning is called when the poisoned
    batch clusters much better than the genuine-only batch."""
    x = batch.activations
    if not len(x) > ica_dims >= 2:
        raise ConfigurationError("need sample count > ica_dims >= 2")
    ica_dims = min(ica_dims, x.shape[1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ica = FastICA(n_components=ica_dims, random_state=seed, max_iter=500)
        reduced = ica.fit_transform(x)
        non_converged = any("did not converge" in str(w.message) for w in caught)
    if non_converged:
        warnings.warn("ICA did not converge; falling back to principal components")
        reduced = PCA(n_components=ica_dims, random_state=seed).fit_transform(x)

    km = KMeans(n_clusters=k, n_init=10, random_state=seed)
    labels = km.fit_predict(reduced)
    sil_poisoned = _silhouette(reduced, labels, seed)

    gen_mask = batch.origins == 0
    gen_reduced = reduced[gen_mask]
    km_gen = KMeans(n_clusters=k, n_init=10, random_state=seed)
    gen_labels = km_gen.fit_predict(gen_reduced)
    sil_genuine = _silhouette(gen_reduced, gen_labels, seed)

    gap = sil_poisoned - sil_genuine
    return {
        "labels": labels,
        "silhouette_poisoned": sil_poisoned,
        "silhouette_genuine": sil_genuine,
        "silhouette_gap": gap,
        "verdict": "poisoned" if gap > gap_threshold else "clean",
        "ica_converged": not non_converged,
    }


@dataclass
class AuditSummary:
    """Both detectors over both action-class sets."""

    spectral: dict = field(default_factory=dict)      # set name -> verdict dict
    clustering: dict = field(default_factory=dict)
    detected: bool = False

    @classmethod
    def run(cls, batch: RepresentationBatch, seed: int = 0) -> "AuditSummary":
        out = cls()
        for name, cls_val in (("acceleration", 1), ("deceleration", -1)):
            sub = batch.subset(batch.action_class == cls_val)
            if np.any(sub.origins == 1) and np.any(sub.origins == 0):
                scores = spectral_scores(sub)
                out.spectral[name] = spectral_separation_test(scores, sub.origins)
                out.clustering[name] = activation_clustering(sub, seed=seed)
        out.detected = any(v["detected"] for v in out.spectral.values()) or any(
            v["verdict"] == "poisoned" for v in out.clustering.values())
        return out


def save_audit_csv(path, batch: RepresentationBatch, scores: np.ndarray,
                   labels: np.ndarray) -> None:
    """Per-sample audit log: origin, action set, spectral score, cluster."""
    import csv
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["origin", "set", "score", "cluster"])
        for i in range(len(scores)):
            w.writerow(["trigger" if batch.origins[i] else "genuine",
                        "acceleration" if batch.action_class[i] > 0 else "deceleration",
                        f"{scores[i]:.8g}", int(labels[i])])
