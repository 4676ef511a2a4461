import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdcnet.errors import DataError, DomainError, ShapeError
from gdcnet.gdrm import (
    DiscrepancyMLP,
    DiscrepancyTriple,
    SentimentDistribution,
    SentimentLexicon,
    default_lexicon,
    discrepancy_representation,
    discrepancy_vector,
    fidelity,
    semantic_discrepancy,
    sentiment_discrepancy,
    sentiment_score_lexicon,
)
from gdcnet.gradcheck import numerical_grad, relative_error
from gdcnet.ops import Linear


def test_semantic_examples():
    assert semantic_discrepancy([1.0, 2.0], [1.0, 2.0]) == pytest.approx(0.0, abs=1e-12)
    assert semantic_discrepancy([1.0, 0.0], [0.0, 3.0]) == 1.0
    assert semantic_discrepancy([1.0, 0.0], [-1.0, 0.0]) == 2.0
    assert semantic_discrepancy([0.0, 0.0], [1.0, 0.0]) == 1.0


def test_semantic_shape_mismatch():
    with pytest.raises(ShapeError):
        semantic_discrepancy([1.0, 0.0], [1.0, 0.0, 0.0])


def test_lexicon_file_format():
    lex = default_lexicon()
    assert lex.polarity["great"] == 1 and lex.polarity["awful"] == -1


def test_lexicon_custom(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("# comment\nSunny\t+1\nrain\t-1\n", encoding="utf-8")
    lex = SentimentLexicon.load(p)
    assert lex.hits("sunny day, RAIN rain") == (2, 1)
    p.write_text("bad\t0\n", encoding="utf-8")
    with pytest.raises(DataError):
        SentimentLexicon.load(p)


def test_sentiment_no_hits():
    np.testing.assert_array_equal(sentiment_score_lexicon("the table is brown").probs, [0, 1, 0])


def test_sentiment_two_positive():
    # n=0, p=2 -> (0, 1, 2) / 3
    np.testing.assert_allclose(sentiment_score_lexicon("great, just great").probs, [0, 1 / 3, 2 / 3], atol=1e-12)


def test_sentiment_mixed():
    np.testing.assert_allclose(sentiment_score_lexicon("love the awful").probs, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_distribution_validation():
    with pytest.raises(DomainError):
        SentimentDistribution([0.5, 0.6, 0.0])
    with pytest.raises(ShapeError):
        SentimentDistribution([1.0, 0.0])


def test_sentiment_discrepancy_examples():
    p = SentimentDistribution([0.2, 0.3, 0.5])
    assert sentiment_discrepancy(p, p) == 0
    assert sentiment_discrepancy(SentimentDistribution([1, 0, 0]), SentimentDistribution([0, 0, 1])) == 2
    d = sentiment_discrepancy(SentimentDistribution([0.5, 0.5, 0]), SentimentDistribution([0.25, 0.25, 0.5]))
    assert abs(d - (0.25 + 0.25 + 0.5)) <= 1e-12


simplex = st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-6).map(
    lambda v: SentimentDistribution(np.array(v) / sum(v))
)


@settings(max_examples=300, deadline=None)
@given(simplex, simplex, simplex)
def test_sentiment_discrepancy_is_metric(p, q, r):
    d = sentiment_discrepancy
    assert 0 <= d(p, q) <= 2 + 1e-12
    assert d(p, q) == pytest.approx(d(q, p), abs=1e-15)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-12
    assert (d(p, q) == 0) == np.array_equal(p.probs, q.probs)


def test_fidelity_examples():
    assert fidelity([2.0, 1.0], [2.0, 1.0]) == pytest.approx(1.0)
    assert fidelity([1.0, 0.0], [0.0, 5.0]) == 0.0
    assert abs(fidelity([3.0, 4.0], [4.0, 3.0]) - 24 / 25) <= 1e-12
    assert fidelity([0.0, 0.0], [4.0, 3.0]) == 0.0


vec = st.lists(st.floats(-10, 10), min_size=4, max_size=4).map(np.array)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_fidelity_scale_invariant_and_semantic_symmetric(x, y, a, b):
    assert abs(fidelity(a * x, b * y) - fidelity(x, y)) <= 1e-9
    assert semantic_discrepancy(x, y) == pytest.approx(semantic_discrepancy(y, x), abs=1e-12)


def test_triple_ranges_and_order():
    best = discrepancy_vector(0, 0, 1)
    worst = discrepancy_vector(2, 2, -1)
    assert best.as_array().tolist() == [0, 0, 1] and worst.as_array().tolist() == [2, 2, -1]
    composed = discrepancy_vector(
        semantic_discrepancy([1.0, 0.0], [0.0, 1.0]),
        sentiment_discrepancy(SentimentDistribution([0.5, 0.5, 0]), SentimentDistribution([0.25, 0.25, 0.5])),
        fidelity([3.0, 4.0], [4.0, 3.0]),
    )
    assert (composed.d_sem, composed.d_sen) == (1.0, 1.0)
    assert abs(composed.d_fidelity - 0.96) <= 1e-12


@pytest.mark.parametrize("bad", [(-0.1, 0, 0), (2.1, 0, 0), (0, 2.5, 0), (0, 0, 1.2)])
def test_triple_out_of_range(bad):
    with pytest.raises(DomainError):
        discrepancy_vector(*bad)


def test_mlp_constant_network(rng):
    b2 = rng.standard_normal(5)
    mlp = DiscrepancyMLP(Linear(np.zeros((4, 3))), Linear(np.zeros((5, 4)), b2))
    for D in ((0, 0, 1), (2, 2, -1)):
        np.testing.assert_array_equal(discrepancy_representation(mlp, discrepancy_vector(*D)), b2)


def test_mlp_dead_rectifier(rng):
    W1 = np.abs(rng.standard_normal((4, 3)))
    b1 = -np.full(4, 100.0)
    b2 = rng.standard_normal(5)
    mlp = DiscrepancyMLP(Linear(W1, b1), Linear(rng.standard_normal((5, 4)), b2))
    np.testing.assert_array_equal(discrepancy_representation(mlp, DiscrepancyTriple(1, 1, 0.5)), b2)


def test_mlp_matches_loop_oracle(rng):
    mlp = DiscrepancyMLP.init(rng, hidden=6, d_f=4)
    mlp.layer1.bias[:] = rng.standard_normal(6)
    D = [1.0, 0.0, 0.5]
    W1, b1, W2, b2 = mlp.layer1.weight, mlp.layer1.bias, mlp.layer2.weight, mlp.layer2.bias
    hidden = [max(0.0, sum(W1[h][k] * D[k] for k in range(3)) + b1[h]) for h in range(6)]
    expected = [sum(W2[o][h] * hidden[h] for h in range(6)) + b2[o] for o in range(4)]
    np.testing.assert_allclose(discrepancy_representation(mlp, DiscrepancyTriple(*D)), expected, atol=1e-12)


def test_mlp_input_arity():
    with pytest.raises(ShapeError):
        DiscrepancyMLP(Linear(np.zeros((4, 2))), Linear(np.zeros((5, 4))))


def test_mlp_gradients(rng):
    done = 0
    while done < 20:
        mlp = DiscrepancyMLP.init(rng, hidden=8, d_f=5)
        mlp.layer1.bias[:] = rng.standard_normal(8) * 0.3
        D = np.column_stack([rng.uniform(0, 2, 6), rng.uniform(0, 2, 6), rng.uniform(-1, 1, 6)])
        C = rng.standard_normal((6, 5))
        out, cache = mlp.forward(D)
        if np.min(np.abs(cache[1])) < 1e-3:
            continue
        grads, dD = mlp.backward(C, cache)

        def f():
            return float(np.sum(C * mlp(D)))

        for name, arr in (("W1", mlp.layer1.weight), ("b1", mlp.layer1.bias),
                          ("W2", mlp.layer2.weight), ("b2", mlp.layer2.bias)):
            assert relative_error(grads[name], numerical_grad(f, arr)) <= 1e-3, name
        assert relative_error(dD, numerical_grad(f, D)) <= 1e-3
        done += 1
