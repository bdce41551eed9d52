import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcekit.basis import BasisSpec, basis_size, eval_basis, norm_sq, total_degree_set
from pcekit.errors import BasisTooLargeError, DimensionMismatchError, ForeignIndexError
from pcekit.polynomials import HERMITE, LEGENDRE, gauss_rule

from oracles import enumerate_indices, tensor_eval, tensor_norm


def test_known_counts():
    assert len(total_degree_set(2, 3, HERMITE)) == 10
    assert len(total_degree_set(4, 3, HERMITE)) == 35


@pytest.mark.parametrize("k", [1, 3, 7])
def test_constant_only(k):
    spec = total_degree_set(k, 0, LEGENDRE)
    assert spec.indices == ((0,) * k,)


@pytest.mark.parametrize("n,p", list(itertools.product(range(1, 9), range(9))))
def test_cardinality_against_enumeration(n, p):
    spec = total_degree_set(n, p, HERMITE)
    assert len(spec) == basis_size(n, p)
    assert sorted(spec.indices) == sorted(enumerate_indices(n, p))


def test_cardinality_formula_large():
    assert basis_size(8, 8) == 12870
    assert len(total_degree_set(8, 8, HERMITE)) == 12870


def test_ordering_graded_lex():
    spec = total_degree_set(2, 3, HERMITE)
    assert spec.indices == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
                            (3, 0), (2, 1), (1, 2), (0, 3))
    spec = total_degree_set(3, 4, LEGENDRE)
    assert len(set(spec.indices)) == len(spec)
    degrees = [sum(i) for i in spec.indices]
    assert degrees == sorted(degrees)
    for d in set(degrees):
        block = [i for i in spec.indices if sum(i) == d]
        assert block == sorted(block, reverse=True)


def test_too_large():
    with pytest.raises(BasisTooLargeError) as info:
        total_degree_set(10, 10, HERMITE)
    assert info.value.count == 184756
    assert len(total_degree_set(10, 10, HERMITE, max_terms=200000)) == 184756


def test_family_count_mismatch():
    with pytest.raises(DimensionMismatchError):
        total_degree_set(3, 2, [HERMITE, LEGENDRE])


def test_eval_at_origin_hermite():
    spec = total_degree_set(2, 3, HERMITE)
    assert eval_basis(spec, [0.0, 0.0]).tolist() == [1, 0, 0, -1, 0, -1, 0, 0, 0, 0]


def test_eval_first_order():
    for fam in (HERMITE, LEGENDRE):
        spec = total_degree_set(1, 1, fam)
        assert eval_basis(spec, [0.37]).tolist() == [1.0, 0.37]


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_constant_term_is_one(xi):
    spec = total_degree_set(3, 2, [HERMITE, LEGENDRE, HERMITE])
    assert eval_basis(spec, xi)[0] == 1.0


def test_eval_against_numpy_evaluators():
    rng = np.random.default_rng(3)
    kinds = ["hermite", "legendre", "hermite"]
    spec = total_degree_set(3, 4, [HERMITE, LEGENDRE, HERMITE])
    xi = np.column_stack([rng.normal(size=20), rng.uniform(-1, 1, 20), rng.normal(size=20)])
    M = eval_basis(spec, xi)
    for j, idx in enumerate(spec.indices):
        assert np.allclose(M[:, j], tensor_eval(kinds, idx, xi), rtol=1e-12, atol=1e-12)


def test_eval_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        eval_basis(total_degree_set(2, 1, HERMITE), [1.0, 2.0, 3.0])


def test_norm_sq():
    h = total_degree_set(2, 4, HERMITE)
    l = total_degree_set(2, 4, LEGENDRE)
    assert norm_sq(h, (0, 0)) == 1
    assert norm_sq(h, (3, 1)) == 6
    assert norm_sq(l, (2, 2)) == pytest.approx(0.04)
    with pytest.raises(ForeignIndexError):
        norm_sq(h, (5, 0))
    kinds = ["hermite", "legendre"]
    mixed = total_degree_set(2, 3, [HERMITE, LEGENDRE])
    for idx in mixed.indices:
        assert norm_sq(mixed, idx) == pytest.approx(tensor_norm(kinds, idx), rel=1e-15)


@pytest.mark.parametrize("fams", [[HERMITE], [LEGENDRE, HERMITE], [HERMITE, LEGENDRE, LEGENDRE]])
def test_multivariate_orthogonality(fams):
    n, p = len(fams), 3
    spec = total_degree_set(n, p, fams)
    rules = [gauss_rule(f, p + 1) for f in fams]
    nodes = np.array(list(itertools.product(*[r.nodes for r in rules])))
    weights = np.prod(np.array(list(itertools.product(*[r.weights for r in rules]))), axis=1)
    M = eval_basis(spec, nodes)
    gram = (M * weights[:, None]).T @ M
    assert np.allclose(gram, np.diag(spec.norms), atol=1e-9, rtol=0)


@settings(max_examples=30)
@given(st.permutations(range(3)), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_permutation_consistency(perm, xi):
    fams = [HERMITE, LEGENDRE, HERMITE]
    spec = total_degree_set(3, 3, fams)
    pspec = total_degree_set(3, 3, [fams[k] for k in perm])
    a = eval_basis(spec, xi)
    b = eval_basis(pspec, [xi[k] for k in perm])
    assert np.allclose(sorted(a), sorted(b), rtol=1e-12, atol=1e-12)


def test_json_round_trip():
    spec = total_degree_set(3, 2, [HERMITE, LEGENDRE, HERMITE])
    doc = json.loads(json.dumps(spec.to_dict()))
    assert doc["ordering"] == "graded-lex"
    back = BasisSpec.from_dict(doc)
    assert back == spec
    doc["indices"][1] = [0, 0, 1]
    with pytest.raises(ValueError):
        BasisSpec.from_dict(doc)
