"""Score-matrix SMS for embedding data (speaker embeddings and the like).

Instead of an h-ball, each point's neighbourhood is the set of k others
with the highest entries in an externally supplied similarity matrix
(PLDA scores between utterance embeddings are the typical source).  The
update moves the drawn point onto the unweighted mean of those
neighbours, in the original coordinate space.  The spherical
normalisation pipeline (l2 normalise, PCA projection, whitening, l2
renormalise) prepares raw embeddings for such scoring.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .algorithms import AlgoConfig, RandomIndexStream, RunTrace, _Recorder
from .core import check_state

__all__ = ["PreprocessConfig", "spherical_normalize", "top_score_neighbors", "knn_sms_run"]


@dataclass(frozen=True)
class PreprocessConfig:
    """PCA target dimension and whitening regulariser."""

    target_dim: int
    whiten_epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.target_dim < 1:
            raise ValueError("target_dim must be >= 1")
        if self.whiten_epsilon < 0:
            raise ValueError("whiten_epsilon must be >= 0")


def spherical_normalize(points, cfg: PreprocessConfig) -> np.ndarray:
    """l2-normalise, project on top principal directions, whiten, renormalise.

    Returns an (n, q) array of unit rows.  Principal directions come from
    the SVD of the centred normalised data with a deterministic sign
    convention; eigenvalues are regularised by ``whiten_epsilon`` before
    the inverse square root, and a rank-deficient covariance with a zero
    epsilon raises instructing a positive one.
    """
    pts = check_state(points)
    n, d = pts.shape
    q = cfg.target_dim
    if q > d:
        raise ValueError(f"target_dim {q} exceeds data dimension {d}")
    if n < q:
        raise ValueError(f"need at least target_dim={q} points, got {n}")

    norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    if np.any(norms == 0.0):
        raise ValueError("zero-norm input row cannot be normalised")
    unit = pts / norms[:, None]

    centered = unit - unit.mean(axis=0)
    if not np.any(centered):
        raise ValueError("all points identical after normalisation; no principal directions")
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    # deterministic sign: largest-magnitude loading of each direction positive
    flip = np.sign(vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)])
    vt = vt * flip[:, None]

    eigvals = svals[:q] ** 2 / max(n - 1, 1)
    if cfg.whiten_epsilon == 0.0 and np.any(eigvals <= n * np.finfo(float).eps * max(eigvals.max(), 1.0)):
        raise ValueError(
            "covariance is rank deficient in the retained subspace; "
            "set a positive whiten_epsilon"
        )
    scores = centered @ vt[:q].T
    whitened = scores / np.sqrt(eigvals + cfg.whiten_epsilon)

    out_norms = np.sqrt(np.einsum("ij,ij->i", whitened, whitened))
    if np.any(out_norms == 0.0):
        raise ValueError("a row collapsed to zero in the whitened subspace")
    return whitened / out_norms[:, None]


def _check_scores(scores, n: int) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != (n, n):
        raise ValueError(f"score matrix must be ({n}, {n}), got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("score matrix entries must be finite")
    return s


def top_score_neighbors(scores, k: int) -> np.ndarray:
    """For each column i, the k rows j != i with the highest scores[j, i].

    Ties break toward the lower index.  Returns an (n, k) int array of
    neighbour indices, each row sorted by descending score.
    """
    s = np.asarray(scores, dtype=np.float64)
    n = s.shape[0]
    s = _check_scores(s, n)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, n-1] = [1, {n - 1}], got {k}")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        order = np.argsort(-s[:, i], kind="stable")
        out[i] = order[order != i][:k]
    return out


def knn_sms_run(points, scores, k: int, cfg: AlgoConfig, score_update=None):
    """SMS over top-k score neighbourhoods; returns (final_points, RunTrace).

    Draws an index uniformly and moves that point onto the unweighted
    mean of its k best-scoring neighbours (self excluded).  The score
    matrix is static by default; callers owning a scoring model may pass
    ``score_update(positions) -> scores`` to refresh it after every
    move.  The stopping rule is the SMS one: enough small last shifts
    plus full index coverage since the last large shift.
    """
    pts = check_state(points).copy()
    n, d = pts.shape
    if cfg.max_updates < n:
        raise ValueError(f"max_updates={cfg.max_updates} must be >= n={n}")
    neighbor_sets = top_score_neighbors(scores, k)
    rng = RandomIndexStream(cfg.seed)
    tol = cfg.move_tolerance

    rec = _Recorder(False, False)
    initial = pts.copy()
    snapshots: list[tuple[int, np.ndarray]] = []
    if cfg.snapshot_every is not None:
        snapshots.append((0, pts.copy()))

    small = np.zeros(n, dtype=bool)
    n_small = 0
    target = int(np.ceil(cfg.sms_stop_fraction * n))
    stamp = np.full(n, -1, dtype=np.int64)
    epoch = 0
    covered = 0

    t0 = time.perf_counter()
    steps = 0
    stop_reason = "max_updates"
    while steps < cfg.max_updates:
        i = rng.draw(n)
        new = pts[neighbor_sets[i]].mean(axis=0)
        dx = new - pts[i]
        shift = float(np.sqrt(dx @ dx))
        pts[i] = new
        steps += 1
        rec.append(i, shift, None, None)
        if score_update is not None:
            neighbor_sets = top_score_neighbors(score_update(pts), k)
        if cfg.snapshot_every is not None and steps % cfg.snapshot_every == 0:
            snapshots.append((steps, pts.copy()))

        if shift < tol:
            if stamp[i] != epoch:
                stamp[i] = epoch
                covered += 1
            if not small[i]:
                small[i] = True
                n_small += 1
            if n_small >= target and covered == n:
                stop_reason = "converged"
                break
        else:
            epoch += 1
            covered = 0
            if small[i]:
                small[i] = False
                n_small -= 1
    duration = time.perf_counter() - t0

    if cfg.snapshot_every is not None and (not snapshots or snapshots[-1][0] != steps):
        snapshots.append((steps, pts.copy()))
    idx, shifts, _, _, _ = rec.trimmed()
    trace = RunTrace(
        algorithm="sms",
        moved_index=idx,
        shift=shifts,
        objective=None,
        objective_delta=None,
        grad_norm=None,
        initial_objective=None,
        initial_points=initial,
        final_points=pts.copy(),
        snapshots=snapshots,
        total_updates=steps,
        duration=duration,
        stop_reason=stop_reason,
    )
    return pts, trace
