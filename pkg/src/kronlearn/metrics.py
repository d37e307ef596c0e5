"""Scoring learned graphs against ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphrep import ProductKind, compose_product, laplacian_from_weights

CSV_HEADER = ("seed", "n", "kind", "rel_err_product", "rel_err_f1", "rel_err_f2",
              "pr_auc_product", "pr_auc_f1", "pr_auc_f2")


def rel_err(L_hat, L_true, normalize: bool = False) -> float:
    """Relative Frobenius error ``||L_hat - L_true||_F / ||L_true||_F``.

    With ``normalize`` both matrices are first rescaled to ``p L / tr(L)``,
    which removes the scale ambiguity of individual Kronecker factors.
    """
    L_hat = np.asarray(L_hat, dtype=float)
    L_true = np.asarray(L_true, dtype=float)
    if L_hat.shape != L_true.shape:
        raise ValueError(f"shape mismatch: {L_hat.shape} vs {L_true.shape}")
    if normalize:
        p = L_true.shape[0]
        t_hat, t_true = np.trace(L_hat), np.trace(L_true)
        if t_hat <= 0 or t_true <= 0:
            raise ValueError("trace normalization needs positive traces")
        L_hat = p * L_hat / t_hat
        L_true = p * L_true / t_true
    denom = np.linalg.norm(L_true)
    if denom == 0:
        raise ValueError("reference Laplacian is zero")
    return float(np.linalg.norm(L_hat - L_true) / denom)


def pr_auc(w_hat, w_true) -> float:
    """Area under the precision-recall curve for edge detection.

    Pairs are ranked by learned weight; tied scores form one operating point
    and the area is the step-wise (average precision) sum
    ``sum_k (R_k - R_{k-1}) P_k``.
    """
    scores = np.asarray(getattr(w_hat, "w", w_hat), dtype=float).ravel()
    truth = np.asarray(getattr(w_true, "w", w_true), dtype=float).ravel() > 0
    if scores.shape != truth.shape:
        raise ValueError(f"length mismatch: {scores.size} vs {truth.size}")
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise ValueError("ground truth has no edges; recall is undefined")
    order = np.argsort(-scores, kind="stable")
    scores, truth = scores[order], truth[order]
    # last position of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(scores) != 0), scores.size - 1]
    tp = np.cumsum(truth)[ends]
    precision = tp / (ends + 1)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def fit_rate(ns, errs) -> float:
    """Least-squares slope of ``log(err)`` against ``log(n)``."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if ns.shape != errs.shape or ns.ndim != 1:
        raise ValueError("ns and errs must be 1-D and equally long")
    if ns.size < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if np.any(ns <= 0) or np.any(errs <= 0):
        raise ValueError("sample counts and errors must be positive")
    slope, _ = np.polyfit(np.log(ns), np.log(errs), 1)
    return float(slope)


@dataclass
class EvalReport:
    rel_err_product: float
    rel_err_factor1: float
    rel_err_factor2: float
    pr_auc_product: float
    pr_auc_factor1: float
    pr_auc_factor2: float
    n: int
    seed: int
    kind: ProductKind = ProductKind.KRONECKER

    def csv_row(self) -> list:
        return [self.seed, self.n, ProductKind.parse(self.kind).value,
                self.rel_err_product, self.rel_err_factor1, self.rel_err_factor2,
                self.pr_auc_product, self.pr_auc_factor1, self.pr_auc_factor2]


def evaluate(w1_hat, w2_hat, w1_true, w2_true, kind=ProductKind.KRONECKER, *,
             n: int = 0, seed: int = 0) -> EvalReport:
    """Score learned factors against the truth.

    The product is compared unnormalized; each factor after trace normalization.
    """
    kind = ProductKind.parse(kind)
    prod_hat = compose_product(w1_hat, w2_hat, kind)
    prod_true = compose_product(w1_true, w2_true, kind)
    return EvalReport(
        rel_err_product=rel_err(prod_hat.laplacian(), prod_true.laplacian()),
        rel_err_factor1=rel_err(laplacian_from_weights(w1_hat),
                                laplacian_from_weights(w1_true), normalize=True),
        rel_err_factor2=rel_err(laplacian_from_weights(w2_hat),
                                laplacian_from_weights(w2_true), normalize=True),
        pr_auc_product=pr_auc(prod_hat, prod_true),
        pr_auc_factor1=pr_auc(w1_hat, w1_true),
        pr_auc_factor2=pr_auc(w2_hat, w2_true),
        n=int(n),
        seed=int(seed),
        kind=kind,
    )
