"""Tests for encoders, adapters, the SELECT head and its training."""

import numpy as np
import pytest

from EmbodySim.embedding.adapters import (
    AdapterParams,
    load_params,
    params_from_bytes,
    params_to_bytes,
    save_params,
)
from EmbodySim.embedding.alignment import ridge_fit
from EmbodySim.embedding.concepts import DIM, content_words
from EmbodySim.embedding.encoders import Modality, cosine, encode, scene_features
from EmbodySim.embedding.select_head import (
    argmax_lowest,
    bce_loss,
    bce_loss_and_grad,
    select_scores,
)
from EmbodySim.embedding.training import SelectExample, selection_accuracy, train_select
from EmbodySim.errors import EncodingError
from EmbodySim.scene.catalog import load_catalog
from EmbodySim.scene.model import SceneConfig
from EmbodySim.scene.sampler import sample_scene
from EmbodySim.sensors.acoustic import hit
from EmbodySim.sensors.tactile import touch


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def random_instance(rng: np.random.Generator):
    """Query, O x d objects, d x d weight and a one-hot target."""
    count = int(rng.integers(1, 9))
    dim = int(rng.integers(2, 7))
    query = rng.standard_normal(dim)
    objects = rng.standard_normal((count, dim))
    weight = rng.standard_normal((dim, dim))
    target = np.zeros(count)
    target[int(rng.integers(count))] = 1.0
    return query, objects, weight, target


def loss_at(query, objects, weight, target) -> float:
    return bce_loss(select_scores(query, objects, weight), target)


class TestGradientCheck:
    """Central finite differences against the analytic BCE gradients."""

    H = 1e-4

    def test_weight_and_query_gradients(self):
        """Test 100 random instances with at most 8 objects."""
        rng = np.random.default_rng(20240)
        worst = 0.0
        for _ in range(100):
            query, objects, weight, target = random_instance(rng)
            scores = select_scores(query, objects, weight)
            _, grads = bce_loss_and_grad(scores, target, query, objects, weight)

            numeric_w = np.zeros_like(weight)
            for index in np.ndindex(weight.shape):
                step = np.zeros_like(weight)
                step[index] = self.H
                numeric_w[index] = (
                    loss_at(query, objects, weight + step, target)
                    - loss_at(query, objects, weight - step, target)
                ) / (2 * self.H)

            numeric_q = np.zeros_like(query)
            for i in range(len(query)):
                step = np.zeros_like(query)
                step[i] = self.H
                numeric_q[i] = (
                    loss_at(query + step, objects, weight, target)
                    - loss_at(query - step, objects, weight, target)
                ) / (2 * self.H)

            worst = max(
                worst,
                relative_error(grads.weight, numeric_w),
                relative_error(grads.query, numeric_q),
            )
        assert worst < 1e-4

    def test_logit_gradient(self):
        """Test that d loss / d logit_i = (s_i - t_i) / O away from the clamp."""
        scores = np.array([0.2, 0.7, 0.4])
        target = np.array([0.0, 1.0, 0.0])
        _, grads = bce_loss_and_grad(scores, target)
        np.testing.assert_allclose(grads.logits, (scores - target) / 3)

    def test_clamped_scores_have_zero_gradient(self):
        """Test that saturated scores do not contribute gradient."""
        _, grads = bce_loss_and_grad(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        np.testing.assert_array_equal(grads.logits, [0.0, 0.0])

    @pytest.mark.parametrize("target", [[0, 0, 0], [1, 1, 0], [0.5, 0.5, 0], [1, 0]])
    def test_target_must_be_one_hot(self, target):
        """Test that anything but a one-hot target over the objects is refused."""
        with pytest.raises(ValueError):
            bce_loss_and_grad(np.array([0.3, 0.3, 0.3]), np.array(target))


class TestSelectHead:
    """Test cases for scoring and argmax."""

    def test_ties_go_to_lowest_index(self):
        """Test that equal scores select the lowest object id."""
        assert argmax_lowest(np.array([0.1, 0.9, 0.9, 0.2])) == 1

    def test_scores_in_unit_interval(self):
        """Test that scores are sigmoids."""
        rng = np.random.default_rng(1)
        scores = select_scores(rng.standard_normal(4), rng.standard_normal((5, 4)), np.eye(4))
        assert scores.shape == (5,)
        assert np.all((scores > 0) & (scores < 1))


class TestTraining:
    """Test cases for train_select."""

    @pytest.fixture
    def dataset(self):
        rng = np.random.default_rng(7)
        examples = []
        for _ in range(12):
            rows = rng.standard_normal((4, 16))
            rows /= np.linalg.norm(rows, axis=1, keepdims=True)
            target = int(rng.integers(4))
            examples.append(SelectExample(text=rows[target].copy(), rows=rows, target=target))
        return examples

    def test_loss_decreases(self, dataset):
        """Test that gradient descent lowers the training loss."""
        start = AdapterParams.identity(dim=16, select_scale=1.0)
        result = train_select(dataset, start, lr=0.1, epochs=30)
        assert len(result.losses) == 30
        assert result.final_loss < result.losses[0]
        assert result.params.is_finite()
        assert selection_accuracy(result.params, dataset) == 1.0

    def test_training_is_deterministic(self, dataset):
        """Test that equal inputs give bit-identical parameters."""
        start = AdapterParams.identity(dim=16)
        a = train_select(dataset, start, lr=0.1, epochs=5).params
        b = train_select(dataset, start, lr=0.1, epochs=5).params
        assert a.equals(b)

    def test_zero_epochs_keep_params(self, dataset):
        """Test that zero epochs return the starting parameters."""
        start = AdapterParams.identity(dim=16)
        result = train_select(dataset, start, epochs=0)
        assert result.losses == []
        assert result.params.equals(start)

    def test_empty_dataset(self):
        """Test that an empty dataset is refused."""
        with pytest.raises(ValueError):
            train_select([])


class TestAdapterBlob:
    """Test cases for the adapter parameter file format."""

    def test_save_and_load_bit_exact(self, tmp_path):
        """Test that saved parameters load back bit for bit."""
        params = AdapterParams.identity(dim=8)
        params.select = np.random.default_rng(3).standard_normal((8, 8)).astype(np.float32)
        path = tmp_path / "adapters.bin"
        save_params(params, path)
        assert load_params(path).equals(params)

    def test_bad_magic(self):
        """Test that a blob with another magic is refused."""
        data = bytearray(params_to_bytes(AdapterParams.identity(dim=4)))
        data[:4] = b"XXXX"
        with pytest.raises(EncodingError):
            params_from_bytes(bytes(data))

    def test_truncated_blob(self):
        """Test that a short blob is refused."""
        data = params_to_bytes(AdapterParams.identity(dim=4))
        with pytest.raises(EncodingError):
            params_from_bytes(data[:-4])


class TestEncoders:
    """Test cases for the modality encoders."""

    @pytest.fixture(scope="class")
    def scene(self):
        return sample_scene(load_catalog(), SceneConfig(), 99)

    def test_unit_vectors(self, scene):
        """Test that every modality encodes to a unit DIM vector."""
        obj = scene.objects[0]
        payloads = [
            (Modality.TEXT, "the hot ceramic mug"),
            (Modality.OBJECT_VISUAL, obj),
            (Modality.IMPACT_SOUND, hit(obj, 0, 1.0)),
            (Modality.TACTILE, touch(obj, 0, 1.0)),
            (Modality.TEMPERATURE, 60.0),
        ]
        for modality, payload in payloads:
            vector = encode(modality, payload)
            assert vector.shape == (DIM,)
            assert np.linalg.norm(vector) == pytest.approx(1.0)

    def test_mismatched_payload(self, scene):
        """Test that a payload of the wrong type raises EncodingError."""
        with pytest.raises(EncodingError):
            encode(Modality.TACTILE, hit(scene.objects[0], 0, 1.0))
        with pytest.raises(EncodingError):
            encode("smell", "roses")

    def test_text_without_content_words(self):
        """Test that stopword-only text cannot be encoded."""
        assert content_words("please find the") == []
        with pytest.raises(EncodingError):
            encode(Modality.TEXT, "please find the")

    def test_scene_rows_follow_object_ids(self, scene):
        """Test that row i of the scene features describes object i."""
        rows = scene_features(scene)
        assert rows.shape == (len(scene.objects), DIM)
        for obj in scene.objects:
            visual = encode(Modality.OBJECT_VISUAL, obj)
            assert cosine(rows[obj.id], visual) > 0.9

    def test_cosine_of_zero_vector(self):
        """Test that cosine refuses a zero vector."""
        with pytest.raises(EncodingError):
            cosine(np.zeros(3), np.ones(3))


class TestRidgeFit:
    """Test cases for the adapter alignment solver."""

    def test_recovers_affine_map(self):
        """Test that a tiny ridge recovers an exact affine relation."""
        rng = np.random.default_rng(11)
        inputs = rng.standard_normal((60, 5))
        weight = rng.standard_normal((3, 5))
        bias = rng.standard_normal(3)
        fitted_w, fitted_b = ridge_fit(inputs, inputs @ weight.T + bias, ridge=1e-6)
        np.testing.assert_allclose(fitted_w, weight, atol=1e-5)
        np.testing.assert_allclose(fitted_b, bias, atol=1e-5)
