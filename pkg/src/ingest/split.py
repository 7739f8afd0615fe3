"""
Example Splitting

Holdout-class partitioning and stratified train/test splits over example lists.
"""

from collections import Counter
from typing import List, Optional, Sequence, Tuple

from sklearn.model_selection import train_test_split

from src.errors import PreconditionError, StratificationError, UnknownLabelError
from src.models import DatasetSplit, Example
from src.utils import get_logger

logger = get_logger(__name__)


def hold_out_class(
    examples: Sequence[Example], class_label: str
) -> Tuple[List[Example], List[Example]]:
    """
    Partition examples into (kept, holdout) by label.

    Order is preserved in both lists.

    Raises:
        UnknownLabelError: no example carries class_label
    """
    available = sorted({example.label for example in examples})
    if class_label not in available:
        raise UnknownLabelError(class_label, available)
    kept = [example for example in examples if example.label != class_label]
    holdout = [example for example in examples if example.label == class_label]
    return kept, holdout


def split_train_test(
    examples: Sequence[Example],
    ratio: float = 0.7,
    seed: int = 7,
    holdout_class: Optional[str] = None,
) -> DatasetSplit:
    """
    Stratified random train/test split of example indices.

    Args:
        examples: Examples to split
        ratio: Train fraction in (0, 1)
        seed: Random seed; identical inputs and seed give an identical split
        holdout_class: Optional label whose examples go to `holdout` instead

    Returns:
        DatasetSplit with sorted index lists

    Raises:
        PreconditionError: ratio outside (0, 1) or fewer than 2 examples
        StratificationError: a class has a single example or cannot fill both sides
        UnknownLabelError: holdout_class not present
    """
    if not 0.0 < ratio < 1.0:
        raise PreconditionError(f"Split ratio must be in (0, 1), got {ratio}", ratio=ratio)

    holdout: List[int] = []
    if holdout_class is not None:
        hold_out_class(examples, holdout_class)
        holdout = [i for i, example in enumerate(examples) if example.label == holdout_class]

    indices = [i for i, example in enumerate(examples) if example.label != holdout_class]
    labels = [examples[i].label for i in indices]
    if len(indices) < 2:
        raise PreconditionError(
            f"Need at least 2 examples to split, got {len(indices)}", count=len(indices)
        )

    for label, count in sorted(Counter(labels).items()):
        if count < 2:
            raise StratificationError(
                f"Class '{label}' has {count} example; stratification needs at least 2",
                label=label,
            )

    if len(set(labels)) == 1:
        # single class: stratification is a plain shuffle split
        stratify = None
    else:
        stratify = labels

    try:
        train, test = train_test_split(
            indices, train_size=ratio, random_state=seed, shuffle=True, stratify=stratify
        )
    except ValueError as exc:
        raise StratificationError(f"Cannot stratify split: {exc}") from exc

    split = DatasetSplit(
        train=sorted(int(i) for i in train),
        test=sorted(int(i) for i in test),
        holdout=holdout,
        holdout_class=holdout_class,
    )
    logger.info(
        "split_created",
        train=len(split.train),
        test=len(split.test),
        holdout=len(split.holdout),
        holdout_class=holdout_class,
        seed=seed,
    )
    return split
