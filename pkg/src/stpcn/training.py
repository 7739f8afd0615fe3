"""
ST-PCN Training

Minibatch gradient descent with momentum on the additive angular margin loss.
Batches are drawn from a seeded per-epoch permutation of the training
indices; head rows are renormalized after every update.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import BoundsError, PreconditionError
from src.models import DatasetSplit, EpochLoss, Example, TrainConfig, TrainingLog
from src.nn import gradients
from src.utils import get_logger

from .loss import arcface_loss
from .model import StpcnModel, stack_examples

logger = get_logger(__name__)

BatchHook = Callable[[int, List[str]], None]


def _training_examples(examples: Sequence[Example], split: DatasetSplit) -> List[Example]:
    for index in split.train:
        if not 0 <= index < len(examples):
            raise BoundsError(
                f"Split index {index} outside example list of length {len(examples)}",
                index=index,
            )
    selected = [examples[index] for index in split.train]
    if split.holdout_class is not None and any(
        example.label == split.holdout_class for example in selected
    ):
        raise PreconditionError(
            f"Holdout class '{split.holdout_class}' appears in the training partition",
            holdout_class=split.holdout_class,
        )
    return selected


def train(
    examples: Sequence[Example],
    split: DatasetSplit,
    cfg: TrainConfig,
    on_batch: Optional[BatchHook] = None,
) -> Tuple[StpcnModel, TrainingLog]:
    """
    Train an ST-PCN on the training partition of `examples`.

    Args:
        examples: Full example list the split indices refer to
        split: Train/test partition (holdout examples are never used)
        cfg: Optimizer and loss settings
        on_batch: Optional hook called with (epoch, batch labels) before each step

    Returns:
        (trained model, per-epoch loss log)

    Raises:
        PreconditionError: fewer than 2 training classes, or the holdout class
            is present in the training partition
    """
    selected = _training_examples(examples, split)
    classes = sorted({example.label for example in selected})
    if len(classes) < 2:
        raise PreconditionError(
            f"Training needs at least 2 classes, found {len(classes)}",
            classes=classes,
        )

    gamma, epsilon = selected[0].gamma, selected[0].epsilon
    F_all, A_all = stack_examples(selected)
    class_index: Dict[str, int] = {label: i for i, label in enumerate(classes)}
    y_all = np.array([class_index[example.label] for example in selected], dtype=np.int64)
    labels_all = [example.label for example in selected]

    model = StpcnModel.initialize(gamma, epsilon, classes, cfg, holdout_class=split.holdout_class)
    params = model.parameters()
    velocity = [np.zeros_like(param.data) for param in params]
    rng = np.random.default_rng([cfg.seed, 1])

    logger.info(
        "training_started",
        n_train=len(selected),
        classes=len(classes),
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        holdout_class=split.holdout_class,
    )
    log = TrainingLog(classes=classes, n_train=len(selected), holdout_class=split.holdout_class)
    n = len(selected)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        weighted_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            if on_batch is not None:
                on_batch(epoch, [labels_all[i] for i in batch])
            embeddings = model.forward(F_all[batch], A_all[batch])
            loss = arcface_loss(embeddings, y_all[batch], model.head, cfg.scale_s, cfg.margin_m)
            grads = gradients(loss, params)
            for param, grad, v in zip(params, grads, velocity):
                v *= cfg.momentum
                v -= cfg.learning_rate * grad
                param.data += v
            model.normalize_head()
            weighted_loss += loss.item() * len(batch)
            batches += 1
        mean_loss = weighted_loss / n
        log.epochs.append(EpochLoss(epoch=epoch, mean_loss=mean_loss, batches=batches))
        logger.info("epoch_finished", epoch=epoch, mean_loss=round(mean_loss, 6))

    return model, log
