"""Heterogeneity check by average-linkage clustering of pairwise p-values.

Subjects are numbered 1..n (by convention the case is last).  Pairwise
p-values form a similarity matrix with unit diagonal; clusters are merged
greedily by highest mean cross-pair similarity (UPGMA), and a merge sits at
height ``1 - similarity``.  A case that only joins the tree at the final
merge is "approved": it looks unlike every control subgroup.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .adfamily import PairCache
from .errors import UnknownLeaf
from .flr import FlrConfig, _FitCache, _stat
from .mixture import _as_sample

RULES = ("last-merge", "average")


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ValueError("similarity matrix must be square with at least 2 subjects")
        if not np.allclose(v, v.T, atol=1e-12, rtol=0):
            raise ValueError("similarity matrix must be symmetric")
        if np.any(np.diag(v) != 1.0):
            raise ValueError("similarity matrix must have a unit diagonal")
        if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
            raise ValueError("similarities must lie in [0, 1]")
        v = (v + v.T) / 2
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def permuted(self, order: Sequence[int]) -> "SimilarityMatrix":
        idx = np.asarray(order)
        return SimilarityMatrix(self.values[np.ix_(idx, idx)])


def flr_pair_similarity(p_max: int = 4, config=None) -> Callable:
    """Pairwise FLR similarity ``min(1, exp(l))``, ``l`` the pooled-minus-separate loglik."""
    cfg = config or FlrConfig.desk().em
    cache = _FitCache(p_max, cfg)

    def sim(x, y):
        return float(min(1.0, math.exp(min(0.0, _stat(cache, _as_sample(x), _as_sample(y)).value))))

    return sim


def similarity_matrix(subjects: Sequence, pair_test="ad", seed: int = 0, n_perm: int = 999,
                      p_max: int = 4) -> SimilarityMatrix:
    """Pairwise p-values between all subjects, each unordered pair computed once.

    ``pair_test`` is ``"ad"`` (permutation Anderson-Darling), ``"flr"``, or a
    callable ``(x, y) -> value in [0, 1]``.
    """
    n = len(subjects)
    if n < 2:
        raise ValueError("need at least two subjects")
    if pair_test == "ad":
        test = PairCache(n_perm, seed)
    elif pair_test == "flr":
        test = flr_pair_similarity(p_max)
    elif callable(pair_test):
        test = pair_test
    else:
        raise ValueError(f"unknown pair_test {pair_test!r}")
    S = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            S[i, j] = S[j, i] = test(subjects[i], subjects[j])
    return SimilarityMatrix(S)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    similarity: float
    node: int
    size: int

    @property
    def height(self) -> float:
        return 1.0 - self.similarity


@dataclass(frozen=True)
class Dendrogram:
    n_leaves: int
    merges: tuple = field(default_factory=tuple)

    def leaves_under(self, node: int) -> list[int]:
        if node <= self.n_leaves:
            return [node]
        m = self.merges[node - self.n_leaves - 1]
        return sorted(self.leaves_under(m.left) + self.leaves_under(m.right))

    def matches(self, other: "Dendrogram", atol: float = 1e-12) -> bool:
        """Same merge sequence, similarities equal up to ``atol`` (Newick text rounds them)."""
        if self.n_leaves != other.n_leaves or len(self.merges) != len(other.merges):
            return False
        return all(
            (a.left, a.right, a.node, a.size) == (b.left, b.right, b.node, b.size)
            and abs(a.similarity - b.similarity) <= atol
            for a, b in zip(self.merges, other.merges)
        )

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "merges": [
                {"left": m.left, "right": m.right, "node": m.node, "size": m.size,
                 "similarity": m.similarity, "height": m.height}
                for m in self.merges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def average_linkage(sim: SimilarityMatrix) -> Dendrogram:
    """UPGMA on similarities.

    Ties on the average similarity go to the pair with the smallest
    (lower node id, higher node id); merge i creates node ``n + i``.
    """
    n = sim.size
    S = sim.values
    members: dict[int, list[int]] = {i + 1: [i] for i in range(n)}
    # running cross-pair sums between active clusters
    sums: dict[tuple[int, int], float] = {}
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            sums[(a, b)] = S[a - 1, b - 1]
    merges = []
    for step in range(n - 1):
        best_key, best_val = None, -math.inf
        for (a, b), tot in sums.items():
            val = tot / (len(members[a]) * len(members[b]))
            if val > best_val or (val == best_val and (a, b) < best_key):
                best_key, best_val = (a, b), val
        a, b = best_key
        node = n + step + 1
        merged = members.pop(a) + members.pop(b)
        new_sums = {}
        for (c, d), tot in sums.items():
            if c in (a, b) or d in (a, b):
                other = d if c in (a, b) else c
                if other in (a, b):
                    continue
                new_sums[(other, node)] = new_sums.get((other, node), 0.0) + tot
            else:
                new_sums[(c, d)] = tot
        sums = new_sums
        members[node] = merged
        merges.append(Merge(a, b, float(min(1.0, max(0.0, best_val))), node, len(merged)))
    return Dendrogram(n, tuple(merges))


def hc_approved(dendro: Dendrogram, case_index: int) -> bool:
    """True iff the case leaf's first merge is the final merge."""
    if not 1 <= case_index <= dendro.n_leaves:
        raise UnknownLeaf(case_index)
    last = dendro.merges[-1]
    return case_index in (last.left, last.right)


def average_rule_approved(sim: SimilarityMatrix, case_index: int) -> bool:
    """Looser rule: no control is more similar to the case than controls are, on average, to each other."""
    n = sim.size
    if not 1 <= case_index <= n:
        raise UnknownLeaf(case_index)
    c = case_index - 1
    ctrl = [i for i in range(n) if i != c]
    to_case = sim.values[c, ctrl]
    if len(ctrl) < 2:
        return True
    block = sim.values[np.ix_(ctrl, ctrl)]
    within = (block.sum() - len(ctrl)) / (len(ctrl) * (len(ctrl) - 1))
    return bool(to_case.max() <= within)


def cut(dendro: Dendrogram, height: float) -> list[list[int]]:
    """Clusters left after removing merges above ``height``, sorted by smallest leaf."""
    if not 0.0 <= height <= 1.0:
        raise ValueError("height must lie in [0, 1]")
    parent = list(range(dendro.n_leaves + len(dendro.merges) + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m in dendro.merges:
        if m.height <= height:
            parent[find(m.left)] = m.node
            parent[find(m.right)] = m.node
    groups: dict[int, list[int]] = {}
    for leaf in range(1, dendro.n_leaves + 1):
        groups.setdefault(find(leaf), []).append(leaf)
    return sorted(groups.values(), key=lambda g: g[0])


def _fmt(x: float) -> str:
    return repr(float(x)) if x != 0 else "0"


def export_newick(dendro: Dendrogram, labels: Mapping[int, str] | None = None,
                  comment: str | None = None) -> str:
    """Newick text; each branch length is the parent height minus the child height.

    ``comment`` is prepended as a bracketed Newick comment.
    """
    if comment is not None and ("[" in comment or "]" in comment):
        raise ValueError("comment must not contain square brackets")
    prefix = f"[{comment}]" if comment is not None else ""
    n = dendro.n_leaves
    if not dendro.merges:
        return prefix + f"{(labels or {}).get(1, '1')};"
    height = {i: 0.0 for i in range(1, n + 1)}
    for m in dendro.merges:
        height[m.node] = m.height

    def render(node: int) -> str:
        if node <= n:
            return (labels or {}).get(node, str(node))
        m = dendro.merges[node - n - 1]
        kids = [f"{render(c)}:{_fmt(m.height - height[c])}" for c in (m.left, m.right)]
        return "(" + ",".join(kids) + ")"

    return prefix + render(dendro.merges[-1].node) + ";"


_TOKEN = re.compile(r"\s*([(),:;]|[^(),:;\s]+)")


def parse_newick(text: str) -> Dendrogram:
    """Rebuild a dendrogram from :func:`export_newick` output (numeric leaf labels).

    Merges are ordered by height; equal heights keep post-order.
    """
    tokens = _TOKEN.findall(re.sub(r"\[[^\]]*\]", "", text).strip())
    pos = 0
    internal: list[tuple[float, int, object, object]] = []  # (height, postorder, left, right)

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def node():
        nonlocal pos
        if peek() == "(":
            pos += 1
            kids = []
            while True:
                sub, sub_h = node()
                length = 0.0
                if peek() == ":":
                    pos += 1
                    length = float(tokens[pos])
                    pos += 1
                kids.append((sub, sub_h + length))
                if peek() == ",":
                    pos += 1
                    continue
                if peek() != ")":
                    raise ValueError("malformed Newick text")
                pos += 1
                break
            if len(kids) != 2:
                raise ValueError("only binary trees are supported")
            h = max(k[1] for k in kids)
            ref = ("internal", len(internal))
            internal.append((h, len(internal), kids[0][0], kids[1][0]))
            return ref, h
        label = tokens[pos]
        pos += 1
        return ("leaf", int(label)), 0.0

    node()
    n_leaves = len(internal) + 1
    order = sorted(range(len(internal)), key=lambda i: (internal[i][0], i))
    node_id = {}
    merges = []
    for step, i in enumerate(order):
        node_id[i] = n_leaves + step + 1

    def ident(ref):
        return ref[1] if ref[0] == "leaf" else node_id[ref[1]]

    sizes = {}
    for step, i in enumerate(order):
        h, _, l, r = internal[i]
        a, b = ident(l), ident(r)
        size = sizes.get(a, 1) + sizes.get(b, 1)
        sizes[node_id[i]] = size
        merges.append(Merge(min(a, b), max(a, b), 1.0 - h, node_id[i], size))
    return Dendrogram(n_leaves, tuple(merges))


@dataclass(frozen=True)
class HcConfig:
    alpha: float = 0.01
    pair_test: object = "ad"
    rule: str = "last-merge"
    n_perm: int = 999
    seed: int = 0
    p_max: int = 4


@dataclass(frozen=True)
class HcDecision:
    region: int
    approved: bool
    dendrogram: Dendrogram
    similarity: SimilarityMatrix


def hc_decision(region: int, subjects: Sequence, config: HcConfig) -> HcDecision:
    """Cluster one region's subjects (case last) and apply the configured rule."""
    if config.rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    sim = similarity_matrix(subjects, config.pair_test, config.seed, config.n_perm, config.p_max)
    dendro = average_linkage(sim)
    case = len(subjects)
    ok = hc_approved(dendro, case) if config.rule == "last-merge" else average_rule_approved(sim, case)
    return HcDecision(region, ok, dendro, sim)


def apply_hc_filter(region_results: Sequence[tuple[int, float]], subjects: Mapping[int, Sequence],
                    config: HcConfig | None = None) -> list[tuple[int, bool]]:
    """Approval flag for each region whose adjusted p-value is at most ``config.alpha``.

    ``subjects[region]`` lists the K control samples followed by the case.
    Regions above ``alpha`` are dropped from the output.
    """
    config = config or HcConfig()
    out = []
    for region, p_adj in region_results:
        if p_adj <= config.alpha:
            out.append((region, hc_decision(region, subjects[region], config).approved))
    return out
