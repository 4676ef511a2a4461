import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdcnet.data import Sample
from gdcnet.embedding import (
    EmbeddingVector,
    FeatureStore,
    HashedTextEncoder,
    ProjectionHead,
    encode_image_passthrough,
    encode_text_hashed,
    project,
    token_bucket,
    tokenize,
)
from gdcnet.errors import DataError, ShapeError
from gdcnet.gradcheck import numerical_grad, relative_error


def test_empty_text_is_zero_vector():
    v = encode_text_hashed("", 64)
    assert v.dimension == 64 and v.space == "text_raw" and not v.values.any()


def test_cold_rain_unit_norm():
    v = encode_text_hashed("cold rain", 64)
    # independent accumulation from per-token buckets
    acc = np.zeros(64)
    for tok in ("cold", "rain"):
        i, s = token_bucket(tok, 64)
        acc[i] += s
    np.testing.assert_allclose(v.values, acc / np.linalg.norm(acc), atol=1e-12)
    assert abs(np.linalg.norm(v.values) - 1.0) <= 1e-9


def test_tokenize_lowercases_and_splits():
    assert tokenize("Cold,RAIN!! again_2day") == ["cold", "rain", "again", "2day"]


def test_min_dim():
    with pytest.raises(ShapeError):
        encode_text_hashed("x", 7)


@settings(max_examples=50, deadline=None)
@given(st.text())
def test_text_encoder_pure(text):
    enc = HashedTextEncoder(32)
    a, b = enc(text), enc(text)
    assert a == b
    n = np.linalg.norm(a.values)
    assert n == 0 or abs(n - 1) < 1e-9


def test_image_passthrough_inline():
    s = Sample("a", "t", 0, "train", image_vec=(1.0, 0.0, 0.0))
    assert encode_image_passthrough(s) == EmbeddingVector(np.array([1.0, 0.0, 0.0]), "image_raw")


def test_image_passthrough_shared_vectors_equal():
    a = Sample("a", "t", 0, "train", image_vec=(0.5, 2.0))
    b = Sample("b", "u", 1, "test", image_vec=(0.5, 2.0))
    assert encode_image_passthrough(a) == encode_image_passthrough(b)


def test_image_passthrough_store(tmp_path):
    store = FeatureStore({"img/1": [3.0, 4.0]})
    store.save(tmp_path / "f.jsonl")
    loaded = FeatureStore.load(tmp_path / "f.jsonl")
    s = Sample("a", "t", 0, "train", image_path="img/1")
    np.testing.assert_array_equal(encode_image_passthrough(s, loaded).values, [3.0, 4.0])


def test_image_passthrough_dangling():
    s = Sample("lost", "t", 0, "train", image_path="nowhere")
    with pytest.raises(DataError, match="lost"):
        encode_image_passthrough(s, FeatureStore())


def test_embedding_rejects_nonfinite():
    with pytest.raises(DataError):
        EmbeddingVector(np.array([1.0, np.nan]), "shared")


def test_project_identity():
    x = EmbeddingVector(np.array([0.3, -1.2, 4.0]), "text_raw")
    head = ProjectionHead(np.eye(3), np.zeros(3))
    out = project(head, x)
    assert out.space == "shared"
    np.testing.assert_array_equal(out.values, x.values)


def test_project_constant():
    b = np.array([1.5, -2.0])
    head = ProjectionHead(np.zeros((2, 3)), b)
    for x in ([1, 2, 3], [-7, 0, 0.5]):
        np.testing.assert_array_equal(project(head, EmbeddingVector(np.array(x, float), "text_raw")).values, b)


def test_project_matches_loop_matvec(rng):
    W = rng.standard_normal((3, 2))
    b = rng.standard_normal(3)
    head = ProjectionHead(W, b, input_space="image_raw")
    got = project(head, EmbeddingVector(np.array([1.0, 1.0]), "image_raw")).values
    expected = [sum(W[i][j] * 1.0 for j in range(2)) + b[i] for i in range(3)]
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_project_space_mismatch():
    head = ProjectionHead(np.eye(2), input_space="text_raw")
    with pytest.raises(ShapeError):
        project(head, EmbeddingVector(np.ones(2), "image_raw"))


def test_project_affine_combination(rng):
    head = ProjectionHead.init(rng, 7, 4)
    head.bias[:] = rng.standard_normal(4)
    for _ in range(20):
        x, y = rng.standard_normal(7), rng.standard_normal(7)
        a, b = rng.standard_normal(2)
        lhs = head(a * x + b * y)
        rhs = a * head(x) + b * head(y) - (a + b - 1) * head.bias
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_projection_init_bounds(rng):
    head = ProjectionHead.init(rng, 25, 10)
    assert np.all(np.abs(head.weight) <= 1 / 5) and not head.bias.any()


def test_project_gradient_fd(rng):
    head = ProjectionHead.init(rng, 5, 3)
    head.bias[:] = rng.standard_normal(3)
    X = rng.standard_normal((4, 5))
    C = rng.standard_normal((4, 3))

    def f():
        return float(np.sum(C * np.tanh(head(X))))

    dY = C * (1 - np.tanh(head(X)) ** 2)
    dW, db, dX = head.backward(X, dY)
    assert relative_error(dW, numerical_grad(f, head.weight)) <= 1e-3
    assert relative_error(db, numerical_grad(f, head.bias)) <= 1e-3
    assert relative_error(dX, numerical_grad(f, X)) <= 1e-3
