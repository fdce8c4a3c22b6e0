"""Maximal-clique enumeration and iterative clique clustering.

Vertex sets are Python ints used as bitsets (bit i set <=> vertex i present).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .graph import AffinityMatrix, _check_binary_symmetric


@dataclass(frozen=True)
class Clustering:
    """Disjoint, exhaustive partition of users 0..n_users-1.

    ``window`` is (start frame, length in frames, tau in frames).
    """

    clusters: tuple[tuple[int, ...], ...]
    n_users: int
    algorithm: str = "clique"
    window: tuple[int, int, int] = (0, 1, 1)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        clusters = tuple(tuple(int(u) for u in c) for c in self.clusters)
        seen: set[int] = set()
        for c in clusters:
            if not c:
                raise ValueError("empty cluster")
            if len(set(c)) != len(c) or seen.intersection(c):
                raise ValueError("clusters overlap")
            seen.update(c)
        if seen != set(range(self.n_users)):
            raise ValueError("clusters do not cover exactly the users 0..n_users-1")
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "window", tuple(int(v) for v in self.window))

    @property
    def K(self) -> int:
        return len(self.clusters)

    def labels(self) -> np.ndarray:
        out = np.empty(self.n_users, dtype=np.int64)
        for k, c in enumerate(self.clusters):
            out[list(c)] = k
        return out

    @classmethod
    def from_labels(cls, labels: Sequence[int], **kwargs) -> "Clustering":
        """Group users by label; clusters ordered by their smallest member."""
        groups: dict[int, list[int]] = {}
        for u, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(u)
        clusters = sorted((tuple(g) for g in groups.values()), key=lambda c: c[0])
        return cls(tuple(clusters), n_users=len(labels), **kwargs)

    def to_dict(self, user_ids: Sequence[str] | None = None) -> dict:
        ids = list(user_ids) if user_ids is not None else list(range(self.n_users))
        if len(ids) != self.n_users:
            raise ValueError("user_ids length does not match the clustering")
        start, length, tau = self.window
        return {
            "window": {"start": start, "T": length, "tau": tau},
            "algorithm": self.algorithm,
            "clusters": [[ids[u] for u in c] for c in self.clusters],
        }

    def to_json(self, user_ids: Sequence[str] | None = None) -> str:
        return json.dumps(self.to_dict(user_ids), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict, user_ids: Sequence[str]) -> "Clustering":
        index = {uid: i for i, uid in enumerate(user_ids)}
        try:
            clusters = tuple(tuple(index[uid] for uid in c) for c in data["clusters"])
        except KeyError as exc:
            raise ValueError(f"unknown user id {exc.args[0]!r} in clustering") from None
        w = data.get("window", {})
        return cls(clusters, n_users=len(user_ids), algorithm=str(data.get("algorithm", "external")),
                   window=(w.get("start", 0), w.get("T", 1), w.get("tau", 1)))


# ---------------------------------------------------------------------------
# Bron-Kerbosch


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _neighbour_masks(adj: np.ndarray) -> list[int]:
    out = []
    for row in adj:
        m = 0
        for j in np.flatnonzero(row):
            m |= 1 << int(j)
        out.append(m)
    return out


def _tomita(nbrs: list[int], candidates: int, min_size: int = 0) -> Iterator[int]:
    """Yield maximal cliques (as bitsets) inside ``candidates`` with >= ``min_size`` members.

    Pivot on the vertex of P | X with most neighbours in P.  Branches that
    cannot reach ``min_size`` are cut, which never drops a qualifying clique.
    """
    stack = [(0, 0, candidates, 0)]
    while stack:
        r, size, p, x = stack.pop()
        if not p:
            if not x and size >= min_size:
                yield r
            continue
        if size + p.bit_count() < min_size:
            continue
        pivot_nbrs = max((nbrs[u] for u in _bits(p | x)), key=lambda m: (m & p).bit_count())
        for v in _bits(p & ~pivot_nbrs):
            bit = 1 << v
            stack.append((r | bit, size + 1, p & nbrs[v], x & nbrs[v]))
            p &= ~bit
            x |= bit


def _to_sorted(mask: int) -> list[int]:
    return list(_bits(mask))


def bron_kerbosch(adjacency) -> list[list[int]]:
    """All maximal cliques, each a sorted vertex list, in lexicographic order.

    Isolated vertices come out as singleton cliques.
    """
    adj = _check_binary_symmetric(adjacency)
    n = adj.shape[0]
    if n == 0:
        return []
    nbrs = _neighbour_masks(adj)
    cliques = [_to_sorted(c) for c in _tomita(nbrs, (1 << n) - 1)]
    cliques.sort()
    return cliques


def _best_clique(nbrs: list[int], candidates: int) -> int:
    """Largest maximal clique of the subgraph on ``candidates``, ties broken by
    lexicographically smallest sorted member list.

    Same answer as enumerating every maximal clique and picking the arg max,
    but branches that cannot beat the best size found so far are cut.
    """
    best_size = 0
    best: list[int] | None = None
    stack = [(0, 0, candidates, 0)]
    while stack:
        r, size, p, x = stack.pop()
        if not p:
            if not x:
                members = _to_sorted(r)
                if size > best_size or (size == best_size and members < best):
                    best_size, best = size, members
            continue
        if size + p.bit_count() < best_size:
            continue
        pivot_nbrs = max((nbrs[u] for u in _bits(p | x)), key=lambda m: (m & p).bit_count())
        for v in _bits(p & ~pivot_nbrs):
            bit = 1 << v
            stack.append((r | bit, size + 1, p & nbrs[v], x & nbrs[v]))
            p &= ~bit
            x |= bit
    mask = 0
    for v in best or ():
        mask |= 1 << v
    return mask


def _select_exhaustive(nbrs: list[int], candidates: int) -> int:
    cliques = [_to_sorted(c) for c in _tomita(nbrs, candidates)]
    best = min(cliques, key=lambda c: (-len(c), c))
    mask = 0
    for v in best:
        mask |= 1 << v
    return mask


def clique_clusters(adjacency, exhaustive: bool = False) -> list[list[int]]:
    """Repeatedly take the most populated maximal clique and delete its vertices.

    ``exhaustive=True`` enumerates every maximal clique of each residual graph
    before choosing; the default prunes the search but selects the same clique.
    """
    adj = _check_binary_symmetric(adjacency)
    n = adj.shape[0]
    nbrs = _neighbour_masks(adj)
    select = _select_exhaustive if exhaustive else _best_clique
    remaining = (1 << n) - 1
    out = []
    while remaining:
        # restricting P to the residual vertex set is the same as running on
        # the residual graph, since X starts empty
        chosen = select(nbrs, remaining)
        out.append(_to_sorted(chosen))
        remaining &= ~chosen
    return out


def clique_clustering(affinity: AffinityMatrix, exhaustive: bool = False) -> Clustering:
    clusters = clique_clusters(affinity.adjacency, exhaustive=exhaustive)
    return Clustering(
        tuple(tuple(c) for c in clusters),
        n_users=affinity.n,
        algorithm="clique",
        window=(affinity.start, affinity.length, affinity.tau),
    )
