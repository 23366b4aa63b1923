"""Correlation-alignment (CORAL) loss over embedding clusters.

The distance between two clusters is the squared Frobenius norm of the
difference of their sample covariance matrices, scaled by 1/(4d^2). Training
combines cross-entropy with a ratio of two such distances over three
clusters: keyword embeddings (real-pos), ordinary negatives (real-neg) and
synthetic confusion negatives (synt-neg). Minimizing the ratio pulls the two
negative clusters together while pushing positives away from negatives. All
gradients here are with respect to the embedding features and are meant to be
injected into the network backward pass at the embedding tap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CLUSTERS

EPSILON = 1e-8


@dataclass(frozen=True)
class EmbeddingCluster:
    """n x d feature rows sharing one cluster tag; n >= 2 so the sample
    covariance exists."""

    features: np.ndarray
    cluster_tag: str

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", f)
        if f.ndim != 2:
            raise ValueError("features must be an n x d matrix")
        if f.shape[0] < 2:
            raise ValueError(
                f"cluster {self.cluster_tag!r} needs >= 2 rows for a covariance, "
                f"got {f.shape[0]}"
            )
        if self.cluster_tag not in CLUSTERS:
            raise ValueError(f"unknown cluster tag {self.cluster_tag!r}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features contain non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class CovarianceMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"covariance must be square, got {v.shape}")
        if np.max(np.abs(v - v.T)) > 1e-10:
            raise ValueError("covariance is not symmetric")

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue; a valid sample covariance satisfies
        min_eig >= -1e-8 * trace up to round-off."""
        return float(np.linalg.eigvalsh(self.values)[0])


def covariance(cluster: EmbeddingCluster) -> CovarianceMatrix:
    """Sample covariance with n-1 normalization, computed as
    (D'D - (1'D)'(1'D)/n) / (n-1)."""
    d_mat = cluster.features
    n = d_mat.shape[0]
    col_sum = d_mat.sum(axis=0)
    c = (d_mat.T @ d_mat - np.outer(col_sum, col_sum) / n) / (n - 1)
    return CovarianceMatrix(c)


def coral_loss(c_s: CovarianceMatrix, c_t: CovarianceMatrix) -> float:
    """Squared Frobenius distance between covariances over 4 d^2."""
    if c_s.d != c_t.d:
        raise ValueError(f"dimension mismatch: {c_s.d} vs {c_t.d}")
    diff = c_s.values - c_t.values
    return float(np.sum(diff * diff) / (4.0 * c_s.d * c_s.d))


def ratio_term(a: float, b: float, eps: float = EPSILON) -> float:
    """a / (a + b + eps); in [0, 1] for nonnegative a, b, eps."""
    return a / (a + b + eps)


def _coral_grad(features: np.ndarray, c_self: CovarianceMatrix,
                c_other: CovarianceMatrix) -> np.ndarray:
    """d coral_loss(C_self, C_other) / d features, for the matrix whose
    covariance is C_self: centered(D) (C_self - C_other) / (d^2 (n-1))."""
    n, d = features.shape
    centered = features - features.mean(axis=0)
    return centered @ (c_self.values - c_other.values) / (d * d * (n - 1))


@dataclass(frozen=True)
class JointLossResult:
    loss: float
    ce: float
    ratio: float
    dist_neg_pair: float    # real-neg vs synt-neg (the numerator)
    dist_pos_neg: float     # real-pos vs real-neg
    grad_real_pos: np.ndarray
    grad_real_neg: np.ndarray
    grad_synt_neg: np.ndarray


def joint_loss(ce: float, emb_real_pos: EmbeddingCluster,
               emb_real_neg: EmbeddingCluster,
               emb_synt_neg: EmbeddingCluster) -> JointLossResult:
    """Cross-entropy plus A/(A + B + eps) where A is the alignment distance
    between the two negative clusters and B the distance between positives
    and real negatives. Returns the loss and dL/dfeatures per cluster."""
    if emb_real_pos.cluster_tag != "real-pos" \
            or emb_real_neg.cluster_tag != "real-neg" \
            or emb_synt_neg.cluster_tag != "synt-neg":
        raise ValueError("clusters passed in the wrong order")
    if not (emb_real_pos.d == emb_real_neg.d == emb_synt_neg.d):
        raise ValueError(
            f"embedding widths differ: {emb_real_pos.d}, {emb_real_neg.d}, "
            f"{emb_synt_neg.d}"
        )

    c_rp = covariance(emb_real_pos)
    c_rn = covariance(emb_real_neg)
    c_sn = covariance(emb_synt_neg)

    a = coral_loss(c_rn, c_sn)
    b = coral_loss(c_rp, c_rn)
    denom = a + b + EPSILON
    ratio = a / denom
    loss = ce + ratio

    # d ratio / dA and / dB via the quotient rule
    da = (b + EPSILON) / (denom * denom)
    db = -a / (denom * denom)

    grad_rp = db * _coral_grad(emb_real_pos.features, c_rp, c_rn)
    grad_sn = da * _coral_grad(emb_synt_neg.features, c_sn, c_rn)
    grad_rn = (da * _coral_grad(emb_real_neg.features, c_rn, c_sn)
               + db * _coral_grad(emb_real_neg.features, c_rn, c_rp))

    return JointLossResult(
        loss=float(loss), ce=float(ce), ratio=float(ratio),
        dist_neg_pair=a, dist_pos_neg=b,
        grad_real_pos=grad_rp, grad_real_neg=grad_rn, grad_synt_neg=grad_sn,
    )
