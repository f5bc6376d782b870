"""Simplicial complex construction, algebra, and queries.

Numeric expectations below were derived by hand from the tiny corpora defined
inline (citation sums over explicit author-set containment), independently of
the implementation.
"""
import numpy as np
import pytest
from scipy import sparse

from simquery.complexes import (ComplexError, SimplicialComplex, build_complex,
                                canonical, edge_distance, exact_query,
                                hodge_laplacian, hop_distances,
                                incidence_matrix, normalized_laplacian,
                                verify_closure)
from simquery.corpus import BipartiteGraph, PaperRecord, synth_corpus
from simquery.spectral import min_eigenvalue


def graph(*papers):
    return BipartiteGraph(tuple(
        PaperRecord(f"p{i}", tuple(sorted(a)), c)
        for i, (a, c) in enumerate(papers)))


def test_canonical_sorts_and_validates():
    assert canonical(("b", "a")) == ("a", "b")
    with pytest.raises(ComplexError):
        canonical(("a", "a"))
    with pytest.raises(ComplexError):
        canonical(())


def test_build_complex_hand_computed():
    # {a,b,c} cited 2 and {b,c} cited 3: each simplex accumulates the
    # citations of every paper whose author set contains it.
    s = build_complex(graph((("a", "b", "c"), 2), (("b", "c"), 3)))
    assert s.simplices[0] == [("a",), ("b",), ("c",)]
    assert s.cochains[0].tolist() == [2.0, 5.0, 5.0]
    assert s.simplices[1] == [("a", "b"), ("a", "c"), ("b", "c")]
    assert s.cochains[1].tolist() == [2.0, 2.0, 5.0]
    assert s.simplices[2] == [("a", "b", "c")]
    assert s.cochains[2].tolist() == [2.0]


def test_complex_accessors():
    s = build_complex(graph((("a", "b"), 4)))
    assert s.max_order == 1
    assert s.counts() == [2, 1]
    assert s.size() == 3
    assert s.contains(("a", "b")) and not s.contains(("a", "c"))
    assert s.locate(("b",)) == (0, 1)
    assert s.cochain_of(("a", "b")) == 4.0
    with pytest.raises(ComplexError):
        s.locate(("z",))


def test_top_simplices_and_supersets():
    s = build_complex(graph((("a", "b", "c"), 1), (("c", "d"), 1), (("e",), 1)))
    assert set(s.top_simplices()) == {("a", "b", "c"), ("c", "d"), ("e",)}
    assert s.strict_supersets(("c",)) == [
        ("a", "c"), ("b", "c"), ("c", "d"), ("a", "b", "c")]


def test_json_round_trip():
    s = build_complex(graph((("a", "b", "c"), 2), (("b", "c"), 3)))
    s2 = SimplicialComplex.from_json(s.to_json())
    assert s2.simplices == s.simplices
    assert all(np.array_equal(a, b) for a, b in zip(s2.cochains, s.cochains))


def test_closure_holds_on_random_corpora():
    for seed in range(30):
        g = synth_corpus(20, 40, 4, 10, seed=seed)
        assert verify_closure(build_complex(g))


def test_incidence_matrix_hand_computed():
    s = build_complex(graph((("a", "b", "c"), 1)))
    B1 = incidence_matrix(s, 1).toarray()
    # columns: ab, ac, bc; rows: a, b, c; dropping vertex p gives sign (-1)^p
    assert B1.tolist() == [[-1, -1, 0], [1, 0, -1], [0, 1, 1]]
    B2 = incidence_matrix(s, 2).toarray()
    assert B2.ravel().tolist() == [1, -1, 1]
    with pytest.raises(ComplexError):
        incidence_matrix(s, 0)
    with pytest.raises(ComplexError):
        incidence_matrix(s, 3)


def test_boundary_of_boundary_vanishes():
    for seed in range(30):
        g = synth_corpus(18, 30, 4, 10, seed=seed)
        s = build_complex(g)
        for k in range(1, s.max_order):
            prod = (incidence_matrix(s, k) @ incidence_matrix(s, k + 1))
            assert prod.nnz == 0


def test_hodge_laplacian_symmetric_psd():
    for seed in range(10):
        g = synth_corpus(15, 25, 4, 10, seed=seed)
        s = build_complex(g)
        for k in range(s.max_order + 1):
            L = hodge_laplacian(s, k)
            assert (L - L.T).nnz == 0
            assert min_eigenvalue(L) >= -1e-9


def test_filled_triangle_laplacian_is_three_identity():
    s = build_complex(graph((("a", "b", "c"), 1)))
    L1 = hodge_laplacian(s, 1).toarray()
    np.testing.assert_array_equal(L1, 3.0 * np.eye(3))


def test_vertex_laplacian_is_graph_laplacian():
    # For a path a-b, b-c the order-0 Hodge Laplacian is degree minus adjacency.
    s = build_complex(graph((("a", "b"), 1), (("b", "c"), 1)))
    L0 = hodge_laplacian(s, 0).toarray()
    assert L0.tolist() == [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def test_normalized_laplacian_unit_diagonal():
    g = synth_corpus(15, 25, 4, 10, seed=3)
    s = build_complex(g)
    for k in range(s.max_order + 1):
        N = normalized_laplacian(hodge_laplacian(s, k))
        np.testing.assert_allclose(N.diagonal(), 1.0)
        assert abs(N - N.T).max() < 1e-12
        assert abs(N).max() <= 1.0 + 1e-12


def test_exact_query_matches_brute_force():
    g = graph((("a", "b", "c"), 2), (("b", "c"), 3), (("b", "c"), 0))
    s = build_complex(g)
    assert exact_query(s, g, ("b", "c")) == 5.0
    assert exact_query(s, g, ("a",)) == 2.0
    with pytest.raises(ComplexError):
        exact_query(s, g, ("z",))


def test_exact_query_consistent_on_random_corpora():
    # exact_query raises internally if the inclusion-exclusion expansion over
    # stored supersets disagrees with direct summation; run it everywhere.
    for seed in range(10):
        g = synth_corpus(15, 30, 4, 10, seed=seed)
        s = build_complex(g)
        for order in s.simplices:
            for sx in order:
                direct = sum(p.citations for p in g.papers
                             if set(sx) <= p.author_set)
                assert exact_query(s, g, sx) == direct


def test_hop_distances_on_path():
    s = build_complex(graph((("a", "b"), 1), (("b", "c"), 1), (("c", "d"), 1)))
    L0 = hodge_laplacian(s, 0)
    dist = hop_distances(L0, [0])
    assert dist.tolist() == [0.0, 1.0, 2.0, 3.0]


def test_edge_distance():
    s = build_complex(graph((("a", "b"), 1), (("b", "c"), 1), (("d",), 1)))
    assert edge_distance(s, 0, 0, 0) == 0.0
    assert edge_distance(s, 0, 0, 2) == 2.0
    assert edge_distance(s, 0, 0, 3) == np.inf
    with pytest.raises(ComplexError):
        edge_distance(s, 5, 0, 0)
    with pytest.raises(ComplexError):
        edge_distance(s, 0, 0, 99)


def test_min_eigenvalue_agrees_with_dense():
    rng = np.random.default_rng(0)
    for _ in range(5):
        A = rng.standard_normal((8, 8))
        A = A + A.T
        got = min_eigenvalue(sparse.csr_matrix(A), iters=2000)
        want = float(np.linalg.eigvalsh(A)[0])
        assert abs(got - want) < 1e-6
