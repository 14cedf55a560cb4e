"""Hard partitions from converged positions.

Converged states place points either on top of each other (within a
cluster) or at least a bandwidth apart (across clusters), so clusters
are recovered as connected components of the "closer than a fraction of
h" graph.  Single linkage matches the pairwise-distance form of that
dichotomy directly; the default merge radius h/3 keeps merged clusters
from bridging the h-separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import check_bandwidth, check_state

__all__ = ["MergePolicy", "Partition", "extract_clusters", "cluster_count", "cluster_summary"]


@dataclass(frozen=True)
class MergePolicy:
    """Linkage radius as a fraction of the bandwidth (tau = factor * h)."""

    merge_radius_factor: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        f = self.merge_radius_factor
        if not (0.0 < f < 0.5):
            raise ValueError(f"merge_radius_factor must lie in (0, 0.5), got {f}")


@dataclass(frozen=True)
class Partition:
    """Cluster ids (contiguous from 1) for each of the n input indices."""

    assignment: np.ndarray
    n_clusters: int

    def __post_init__(self) -> None:
        ids = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", ids)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError("assignment must be a non-empty 1-D array")
        present = np.unique(ids)
        if present[0] != 1 or present[-1] != self.n_clusters or present.size != self.n_clusters:
            raise ValueError("cluster ids must be exactly 1..n_clusters")

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters + 1)[1:]


def extract_clusters(final_positions, h, policy: MergePolicy = MergePolicy()) -> Partition:
    """Connected components of the graph linking pairs within factor * h.

    Components are found by min-label propagation over the thresholded
    pairwise-distance graph (each point repeatedly adopts the smallest
    label in its closed neighbourhood, with pointer jumping in between),
    which is exact and needs no edge materialisation even when whole
    clusters have collapsed onto a point.  Component ids are assigned by
    order of first appearance (index ascending), so the labelling is
    deterministic and permutations of the input only relabel the same
    set family.
    """
    pos = check_state(final_positions)
    h = check_bandwidth(h)
    n = pos.shape[0]
    tau_sq = (policy.merge_radius_factor * h) ** 2

    sqn = np.einsum("ij,ij->i", pos, pos)
    chunk = max(1, min(n, (1 << 22) // max(n, 1)))
    labels = np.arange(n)
    while True:
        changed = False
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            block = pos[lo:hi]
            sq = sqn[lo:hi, None] - 2.0 * (block @ pos.T) + sqn[None, :]
            neigh_min = np.where(sq <= tau_sq, labels[None, :], n).min(axis=1)
            if np.any(neigh_min < labels[lo:hi]):
                labels[lo:hi] = np.minimum(labels[lo:hi], neigh_min)
                changed = True
        while True:
            jumped = labels[labels]
            if np.array_equal(jumped, labels):
                break
            labels = jumped
        if not changed:
            break

    ids = np.zeros(n, dtype=np.int64)
    label_of_root: dict[int, int] = {}
    for i, root in enumerate(labels.tolist()):
        if root not in label_of_root:
            label_of_root[root] = len(label_of_root) + 1
        ids[i] = label_of_root[root]
    return Partition(assignment=ids, n_clusters=len(label_of_root))


def cluster_count(partition: Partition) -> int:
    return int(partition.n_clusters)


def cluster_summary(positions, partition: Partition) -> list[dict]:
    """Per-cluster size, centroid and diameter (for the JSON export)."""
    pos = check_state(positions)
    out = []
    for cid in range(1, partition.n_clusters + 1):
        members = pos[partition.assignment == cid]
        diff = members[:, None, :] - members[None, :, :]
        diam = float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max())) if len(members) else 0.0
        out.append(
            {
                "cluster_id": cid,
                "size": int(members.shape[0]),
                "centroid": [float(c) for c in members.mean(axis=0)],
                "diameter": diam,
            }
        )
    return out
