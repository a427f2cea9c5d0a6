import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oksample.errors import UnknownLeaf
from oksample.hetero import (
    Dendrogram,
    HcConfig,
    SimilarityMatrix,
    apply_hc_filter,
    average_linkage,
    average_rule_approved,
    cut,
    export_newick,
    hc_approved,
    hc_decision,
    parse_newick,
    similarity_matrix,
)


def upgma_oracle(S):
    """Textbook UPGMA by recomputing every cluster average from scratch."""
    clusters = {i + 1: [i] for i in range(len(S))}
    out = []
    nxt = len(S) + 1
    while len(clusters) > 1:
        keys = sorted(clusters)
        best = None
        for ai, a in enumerate(keys):
            for b in keys[ai + 1:]:
                v = np.mean([S[i][j] for i in clusters[a] for j in clusters[b]])
                if best is None or v > best[0] + 1e-15:
                    best = (v, a, b)
        v, a, b = best
        clusters[nxt] = clusters.pop(a) + clusters.pop(b)
        out.append((a, b, v))
        nxt += 1
    return out


def random_sim(rng, n):
    A = rng.uniform(size=(n, n))
    S = (A + A.T) / 2
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(S)


def test_three_subject_hand_trace():
    S = SimilarityMatrix([[1, 0.9, 0.1], [0.9, 1, 0.1], [0.1, 0.1, 1]])
    d = average_linkage(S)
    assert [(m.left, m.right) for m in d.merges] == [(1, 2), (3, 4)]
    np.testing.assert_allclose(d.heights, [0.1, 0.9])
    assert hc_approved(d, 3)
    assert not hc_approved(d, 1)


def test_equal_similarities_follow_tie_break():
    S = np.full((4, 4), 0.5)
    np.fill_diagonal(S, 1.0)
    d = average_linkage(SimilarityMatrix(S))
    assert [(m.left, m.right) for m in d.merges] == [(1, 2), (3, 4), (5, 6)]


def test_two_subjects_single_merge_and_always_approved():
    d = average_linkage(SimilarityMatrix([[1, 0.37], [0.37, 1]]))
    assert len(d.merges) == 1 and d.merges[0].height == pytest.approx(0.63)
    assert hc_approved(d, 1) and hc_approved(d, 2)
    assert export_newick(d) == "(1:0.63,2:0.63);"


def test_matches_textbook_oracle():
    rng = np.random.default_rng(0)
    for n in (3, 5, 8, 12):
        S = random_sim(rng, n)
        got = [(m.left, m.right) for m in average_linkage(S).merges]
        assert got == [(a, b) for a, b, _ in upgma_oracle(S.values)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 10))
def test_heights_nondecreasing_and_cut_partitions(seed, n):
    d = average_linkage(random_sim(np.random.default_rng(seed), n))
    assert len(d.merges) == n - 1
    assert np.all(np.diff(d.heights) >= -1e-12)
    for h in np.linspace(0, 1, 7):
        parts = cut(d, h)
        assert sorted(x for p in parts for x in p) == list(range(1, n + 1))
    assert cut(d, 1.0) == [list(range(1, n + 1))]
    if d.heights.min() > 0:
        assert len(cut(d, d.heights.min() / 2)) == n


def test_hc_rules():
    S = np.full((5, 5), 0.8)
    S[4, :] = S[:, 4] = 0.0
    np.fill_diagonal(S, 1.0)
    sim = SimilarityMatrix(S)
    assert hc_approved(average_linkage(sim), 5)
    assert average_rule_approved(sim, 5)
    twin = S.copy()
    twin[4, 0] = twin[0, 4] = 1.0
    sim2 = SimilarityMatrix(twin)
    assert not hc_approved(average_linkage(sim2), 5)
    assert not average_rule_approved(sim2, 5)
    with pytest.raises(UnknownLeaf):
        hc_approved(average_linkage(sim), 6)


def test_approval_invariant_under_control_relabeling():
    rng = np.random.default_rng(3)
    for _ in range(30):
        sim = random_sim(rng, 7)
        base = hc_approved(average_linkage(sim), 7)
        perm = list(rng.permutation(6)) + [6]
        if len(set(np.round(sim.values[np.triu_indices(7, 1)], 12))) == 21:
            assert hc_approved(average_linkage(sim.permuted(perm)), 7) == base


def test_similarity_matrix_contracts():
    with pytest.raises(ValueError):
        SimilarityMatrix([[1, 0.2], [0.3, 1]])
    with pytest.raises(ValueError):
        SimilarityMatrix([[0.9, 0.2], [0.2, 1]])
    rng = np.random.default_rng(4)
    subs = [rng.normal(size=40) for _ in range(3)] + [rng.normal(5, 1, 40)]
    S = similarity_matrix(subs, "ad", seed=1, n_perm=199)
    assert np.all(np.diag(S.values) == 1) and np.array_equal(S.values, S.values.T)
    perm = [2, 0, 3, 1]
    P = similarity_matrix([subs[i] for i in perm], "ad", seed=1, n_perm=199)
    np.testing.assert_array_equal(P.values, S.permuted(perm).values)
    assert S.values[3, :3].max() < 0.01


def test_block_structure_from_two_laws():
    rng = np.random.default_rng(5)
    subs = [rng.normal(0, 1, 60) for _ in range(4)] + [rng.normal(3, 1, 60) for _ in range(4)]
    S = similarity_matrix(subs, "ad", seed=2, n_perm=199).values
    within = np.mean([S[i, j] for i in range(8) for j in range(8) if i != j and (i < 4) == (j < 4)])
    across = S[:4, 4:].mean()
    assert within > 0.2 and across < 0.01
    assert cut(average_linkage(SimilarityMatrix(S)), 0.99) == [[1, 2, 3, 4], [5, 6, 7, 8]]


def test_flr_similarity_backend():
    rng = np.random.default_rng(6)
    subs = [rng.normal(size=80), rng.normal(size=80), rng.normal(6, 1, 80)]
    S = similarity_matrix(subs, "flr", p_max=2).values
    assert S[0, 2] < 1e-6 and S[0, 1] > S[0, 2]


def test_newick_round_trip_and_comment():
    rng = np.random.default_rng(7)
    for n in (2, 4, 9):
        d = average_linkage(random_sim(rng, n))
        text = export_newick(d, comment="seed=7 region=1")
        assert text.startswith("[seed=7 region=1](")
        back = parse_newick(text)
        assert back.matches(d)
        leaves = [int(t.split(":")[0].strip("(")) for t in text.split("]")[1].split(",")]
        assert sorted(leaves) == list(range(1, n + 1))
    with pytest.raises(ValueError):
        export_newick(d, comment="bad]")


def test_dendrogram_json_shape():
    d = average_linkage(SimilarityMatrix([[1, 0.9, 0.1], [0.9, 1, 0.1], [0.1, 0.1, 1]]))
    doc = d.to_dict()
    assert doc["n_leaves"] == 3 and len(doc["merges"]) == 2
    assert doc["merges"][1]["height"] == pytest.approx(0.9)
    assert d.leaves_under(5) == [1, 2, 3]
    assert isinstance(Dendrogram(1).merges, tuple)


def test_hc_filter_pipeline():
    rng = np.random.default_rng(8)
    ctrl = [rng.normal(size=60) for _ in range(6)]
    twin = {1: ctrl + [ctrl[2].copy()]}
    shifted = {2: ctrl + [rng.normal(4, 1, 60)]}
    cfg = HcConfig(n_perm=199, seed=1)
    assert apply_hc_filter([(1, 0.001)], twin, cfg) == [(1, False)]
    assert apply_hc_filter([(2, 0.001)], shifted, cfg) == [(2, True)]
    assert apply_hc_filter([(2, 0.5)], shifted, cfg) == []
    assert apply_hc_filter([], {}, cfg) == []
    dec = hc_decision(2, shifted[2], HcConfig(n_perm=199, rule="average"))
    assert dec.approved
    with pytest.raises(ValueError):
        hc_decision(2, shifted[2], HcConfig(rule="nope"))
