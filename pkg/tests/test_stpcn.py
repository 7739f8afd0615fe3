"""
Unit Tests for the ST-PCN Embedder

Tests the forward pass, the angular margin loss, training and model files.
"""

import numpy as np
import pytest

from src.errors import ConfigError, FormatError, PreconditionError, VersionError
from src.models import DatasetSplit, Example, TrainConfig
from src.nn import Tensor, cross_entropy, gradients, parameter
from src.stpcn import (
    EMBED_DIM,
    StpcnModel,
    arcface_loss,
    cosine_logits,
    embed,
    embed_batch,
    load_model,
    read_embeddings_csv,
    read_model_header,
    save_model,
    stack_examples,
    train,
    write_embeddings_csv,
)


def make_examples(labels, gamma=4, epsilon=4, per_class=6, seed=0):
    """Examples whose F rows are offset by class so the classes separate."""
    rng = np.random.default_rng(seed)
    examples = []
    for k, label in enumerate(labels):
        for start in range(per_class):
            F = rng.normal(size=(gamma, epsilon)) * 0.1 + (k - len(labels) / 2)
            A = (rng.random((gamma, gamma)) < 0.2 + 0.2 * k).astype(np.uint8)
            examples.append(Example(F=F, A=A, label=label, window_start=start))
    return examples


def split_all(examples, holdout_class=None):
    train_idx = [i for i, e in enumerate(examples) if e.label != holdout_class]
    holdout = [i for i, e in enumerate(examples) if e.label == holdout_class]
    return DatasetSplit(train=train_idx, holdout=holdout, holdout_class=holdout_class)


QUICK = TrainConfig(
    scale_s=8.0, margin_m=0.2, learning_rate=0.01, momentum=0.9, batch_size=4, epochs=2, seed=7
)


class TestForward:
    """Tests for the embedding forward pass."""

    @pytest.fixture
    def model(self):
        return StpcnModel.initialize(8, 8, ["a", "b"], TrainConfig(seed=3))

    def test_embedding_shape(self, model):
        """Test that one example embeds to 64 values."""
        example = make_examples(["a"], gamma=8, epsilon=8, per_class=1)[0]

        vector = embed(model, example)

        assert vector.shape == (EMBED_DIM,)
        assert np.all(np.isfinite(vector))

    def test_batch_matches_single(self, model):
        """Test that batched embeddings equal one-at-a-time embeddings."""
        examples = make_examples(["a", "b"], gamma=8, epsilon=8, per_class=3)

        batch = embed_batch(model, examples, batch_size=4)

        assert batch.shape == (6, EMBED_DIM)
        for row, example in zip(batch, examples):
            np.testing.assert_allclose(row, embed(model, example), atol=1e-12)

    def test_deterministic(self, model):
        """Test that the same model and input give bit-identical output."""
        example = make_examples(["a"], gamma=8, epsilon=8, per_class=1)[0]

        np.testing.assert_array_equal(embed(model, example), embed(model, example))

    def test_same_seed_same_init(self):
        """Test that initialization is reproducible from the seed."""
        first = StpcnModel.initialize(8, 8, ["a", "b"], TrainConfig(seed=5))
        second = StpcnModel.initialize(8, 8, ["a", "b"], TrainConfig(seed=5))

        for name in first.params:
            np.testing.assert_array_equal(first.params[name].data, second.params[name].data)

    def test_head_rows_unit_norm(self, model):
        """Test that head rows start at unit norm."""
        np.testing.assert_allclose(np.linalg.norm(model.head.data, axis=1), 1.0)

    def test_empty_batch(self, model):
        """Test that no examples give an empty [0, 64] matrix."""
        assert embed_batch(model, []).shape == (0, EMBED_DIM)

    def test_shape_mismatch(self, model):
        """Test that examples of another gamma are rejected."""
        example = make_examples(["a"], gamma=4, epsilon=8, per_class=1)[0]

        with pytest.raises(ConfigError):
            embed(model, example)


class TestArcfaceLoss:
    """Tests for the additive angular margin loss."""

    def test_aligned_embedding_value(self):
        """Test that an embedding on its class row with s=1, m=0 gives ln(1 + e^-1)."""
        head = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
        embedding = Tensor(np.array([[2.0, 0.0]]))

        loss = arcface_loss(embedding, np.array([0]), head, s=1.0, m=0.0)

        assert loss.item() == pytest.approx(np.log1p(np.exp(-1.0)), abs=1e-12)
        assert loss.item() == pytest.approx(0.3133, abs=1e-4)

    def test_zero_margin_is_cosine_softmax(self):
        """Test that m=0 equals cross-entropy over scaled cosines."""
        rng = np.random.default_rng(1)
        embeddings = Tensor(rng.normal(size=(6, 5)))
        head = Tensor(rng.normal(size=(3, 5)))
        labels = np.array([0, 1, 2, 2, 1, 0])

        loss = arcface_loss(embeddings, labels, head, s=1.0, m=0.0).item()
        emb = embeddings.data / np.linalg.norm(embeddings.data, axis=1, keepdims=True)
        rows = head.data / np.linalg.norm(head.data, axis=1, keepdims=True)
        reference = cross_entropy(Tensor(emb @ rows.T), labels).item()

        assert abs(loss - reference) < 1e-12

    def test_increases_with_margin(self):
        """Test that a larger margin never lowers the loss."""
        rng = np.random.default_rng(2)
        head = Tensor(np.eye(3, 4))
        labels = np.array([0, 1, 2, 0])
        embeddings = Tensor(np.eye(3, 4)[labels] + rng.normal(size=(4, 4)) * 0.3)

        losses = [
            arcface_loss(embeddings, labels, head, s=10.0, m=m).item()
            for m in (0.0, 0.1, 0.3, 0.5)
        ]

        assert losses == sorted(losses)
        assert losses[0] < losses[-1]

    def test_single_embedding_vector(self):
        """Test that a 1-D embedding is treated as a batch of one."""
        head = Tensor(np.eye(2))

        loss = arcface_loss(Tensor(np.array([1.0, 0.0])), np.array([0]), head, 1.0, 0.0)

        assert loss.item() == pytest.approx(np.log1p(np.exp(-1.0)))

    def test_label_out_of_range(self):
        """Test that a label beyond the head rows is rejected."""
        with pytest.raises(PreconditionError):
            arcface_loss(Tensor(np.ones((1, 2))), np.array([2]), Tensor(np.eye(2)), 1.0, 0.0)

    def test_empty_batch(self):
        """Test that an empty batch is rejected."""
        with pytest.raises(PreconditionError):
            arcface_loss(Tensor(np.zeros((0, 2))), np.array([], dtype=int), Tensor(np.eye(2)), 1.0, 0.0)

    def test_cosine_logits_range(self):
        """Test that cosine logits lie in [-1, 1]."""
        rng = np.random.default_rng(3)
        cosine = cosine_logits(Tensor(rng.normal(size=(5, 4))), Tensor(rng.normal(size=(3, 4))))

        assert cosine.shape == (5, 3)
        assert np.all(np.abs(cosine.data) <= 1.0 + 1e-12)


class TestFullModelGradient:
    """Finite-difference check of the whole embedder plus loss."""

    def test_gradients_match_finite_differences(self):
        """Test every parameter tensor on sampled entries at several step sizes."""
        cfg = TrainConfig(scale_s=4.0, margin_m=0.3, seed=11)
        model = StpcnModel.initialize(8, 8, ["a", "b"], cfg)
        examples = make_examples(["a", "b"], gamma=8, epsilon=8, per_class=2, seed=4)
        F_batch, A_batch = stack_examples(examples)
        labels = np.array([0, 0, 1, 1])

        def loss():
            embeddings = model.forward(F_batch, A_batch)
            return arcface_loss(embeddings, labels, model.head, cfg.scale_s, cfg.margin_m)

        def central_difference(flat, i, h):
            original = flat[i]
            flat[i] = original + h
            upper = loss().item()
            flat[i] = original - h
            lower = loss().item()
            flat[i] = original
            return (upper - lower) / (2 * h)

        params = model.parameters()
        analytic = gradients(loss(), params)
        rng = np.random.default_rng(0)
        checked = 0
        for param, grad in zip(params, analytic):
            flat = param.data.reshape(-1)
            scale = max(np.max(np.abs(grad)), 1e-8)
            sample = rng.choice(flat.size, size=min(12, flat.size), replace=False)
            for i in sample:
                # a relu kink spoils one step size, never all of them
                error = min(
                    abs(grad.reshape(-1)[i] - central_difference(flat, i, h))
                    for h in (1e-4, 1e-5, 1e-6)
                )
                assert error / scale < 1e-3, (i, error)
                checked += 1
        assert checked > 100


class TestTraining:
    """Tests for train()."""

    @pytest.fixture
    def examples(self):
        return make_examples(["a", "b", "c"])

    def test_deterministic(self, examples):
        """Test that two runs with the same seed give identical parameters."""
        split = split_all(examples)

        first, first_log = train(examples, split, QUICK)
        second, second_log = train(examples, split, QUICK)

        for name in first.params:
            np.testing.assert_array_equal(first.params[name].data, second.params[name].data)
        assert first_log.losses == second_log.losses

    def test_log_shape(self, examples):
        """Test one loss entry per epoch and batch counts."""
        model, log = train(examples, split_all(examples), QUICK)

        assert model.classes == ["a", "b", "c"]
        assert log.n_train == 18
        assert [e.epoch for e in log.epochs] == [1, 2]
        assert all(e.batches == 5 for e in log.epochs)
        assert all(np.isfinite(log.losses))

    def test_loss_decreases_on_separable_data(self, examples):
        """Test that the last epoch's loss is below the first's."""
        cfg = QUICK.model_copy(update={"epochs": 20})

        _, log = train(examples, split_all(examples), cfg)

        assert log.losses[-1] < log.losses[0]

    def test_separates_held_out_examples(self, examples):
        """Test that unseen examples are closer in cosine to their own class than to others."""
        cfg = QUICK.model_copy(update={"epochs": 20})
        model, _ = train(examples, split_all(examples), cfg)
        unseen = make_examples(["a", "b", "c"], per_class=8, seed=9)

        vectors = embed_batch(model, unseen)
        unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        cosine = unit @ unit.T
        labels = np.array([e.label for e in unseen])
        same = labels[:, None] == labels[None, :]
        off_diagonal = ~np.eye(len(labels), dtype=bool)

        intra = cosine[same & off_diagonal].mean()
        inter = cosine[~same].mean()
        assert intra > inter

    def test_holdout_never_batched(self, examples):
        """Test that no batch contains a holdout-class example."""
        seen = set()

        model, _ = train(
            examples,
            split_all(examples, holdout_class="c"),
            QUICK,
            on_batch=lambda epoch, labels: seen.update(labels),
        )

        assert seen == {"a", "b"}
        assert model.classes == ["a", "b"]
        assert model.holdout_class == "c"
        assert model.head.shape == (2, EMBED_DIM)

    def test_holdout_in_train_rejected(self, examples):
        """Test that a split training on the holdout class is rejected."""
        split = DatasetSplit(train=list(range(len(examples))), holdout_class="c")

        with pytest.raises(PreconditionError):
            train(examples, split, QUICK)

    def test_single_class_rejected(self):
        """Test that training needs at least two classes."""
        examples = make_examples(["a"])

        with pytest.raises(PreconditionError):
            train(examples, split_all(examples), QUICK)

    def test_head_stays_normalized(self, examples):
        """Test that head rows are unit norm after training."""
        model, _ = train(examples, split_all(examples), QUICK)

        np.testing.assert_allclose(np.linalg.norm(model.head.data, axis=1), 1.0)


class TestPersistence:
    """Tests for model and embedding files."""

    @pytest.fixture
    def model(self):
        model = StpcnModel.initialize(8, 8, ["a", "b", "c"], TrainConfig(seed=2), holdout_class="d")
        model.config_hash = "abc123"
        return model

    def test_reload_bit_exact(self, tmp_path, model):
        """Test that a saved model reloads with identical parameters and outputs."""
        path = save_model(model, tmp_path / "model.stpcn")
        examples = make_examples(["a"], gamma=8, epsilon=8, per_class=3)

        loaded = load_model(path)

        assert loaded.classes == ["a", "b", "c"]
        assert loaded.holdout_class == "d"
        assert loaded.config_hash == "abc123"
        assert (loaded.gamma, loaded.epsilon) == (8, 8)
        assert list(loaded.params) == list(model.params)
        for name in model.params:
            np.testing.assert_array_equal(loaded.params[name].data, model.params[name].data)
        np.testing.assert_array_equal(embed_batch(loaded, examples), embed_batch(model, examples))

    def test_header_fields(self, tmp_path, model):
        """Test that the header carries version and hyperparameters."""
        header, _, _ = read_model_header(save_model(model, tmp_path / "model.stpcn"))

        assert header["version"] == "stpcn-v1"
        assert header["scale_s"] == model.scale_s
        assert header["params"][0]["name"] == "temporal.conv1.weight"

    def test_wrong_magic(self, tmp_path, model):
        """Test that a file with another magic is a format error."""
        path = save_model(model, tmp_path / "model.stpcn")
        path.write_bytes(b"NOTAMDL" + path.read_bytes()[7:])

        with pytest.raises(FormatError):
            load_model(path)

    def test_future_version(self, tmp_path, model):
        """Test that an unknown format version is a version error."""
        path = save_model(model, tmp_path / "model.stpcn")
        path.write_bytes(path.read_bytes().replace(b'"stpcn-v1"', b'"stpcn-v2"', 1))

        with pytest.raises(VersionError):
            load_model(path)

    def test_truncated(self, tmp_path, model):
        """Test that a cut-off parameter block is a format error."""
        path = save_model(model, tmp_path / "model.stpcn")
        path.write_bytes(path.read_bytes()[:-8])

        with pytest.raises(FormatError):
            load_model(path)

    def test_trailing_bytes(self, tmp_path, model):
        """Test that extra bytes after the parameters are a format error."""
        path = save_model(model, tmp_path / "model.stpcn")
        path.write_bytes(path.read_bytes() + b"\x00" * 8)

        with pytest.raises(FormatError):
            load_model(path)

    def test_embeddings_csv_reload(self, tmp_path):
        """Test that embedding CSVs reload with exact values."""
        rng = np.random.default_rng(6)
        matrix = rng.normal(size=(3, EMBED_DIM))
        path = write_embeddings_csv(matrix, ["a", "b", "a"], tmp_path / "emb.csv", [4, 9, 11])

        ids, labels, loaded = read_embeddings_csv(path)

        assert ids == [4, 9, 11]
        assert labels == ["a", "b", "a"]
        np.testing.assert_array_equal(loaded, matrix)
