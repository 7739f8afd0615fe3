"""
Flow Models

Pydantic models for network flow records and the datasets built from them.
"""

import ipaddress
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


FLOW_COLUMNS: Tuple[str, ...] = (
    "timestamp_us",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "duration_s",
    "src_bytes",
    "dst_bytes",
    "label",
)


class FlowRecord(BaseModel):
    """
    One aggregated network connection.

    Field aliases match the flow CSV column names so a parsed row dict can be
    validated directly.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    timestamp: int = Field(alias="timestamp_us", ge=0)
    src_ip: str
    dst_ip: str
    src_port: int = Field(ge=0, le=65535)
    dst_port: int = Field(ge=0, le=65535)
    duration: float = Field(alias="duration_s", ge=0.0, allow_inf_nan=False)
    src_bytes: int = Field(ge=0)
    dst_bytes: int = Field(ge=0)
    label: str = Field(min_length=1)

    @field_validator("src_ip", "dst_ip")
    @classmethod
    def _check_address(cls, value: str) -> str:
        value = value.strip()
        ipaddress.ip_address(value)
        return value

    @field_validator("label")
    @classmethod
    def _strip_label(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("label must be non-empty")
        return value

    def sort_key(self) -> Tuple[int, str, str, int]:
        """Ordering key: timestamp, then src_ip, dst_ip, src_port."""
        return (self.timestamp, self.src_ip, self.dst_ip, self.src_port)

    def to_row(self) -> Dict[str, object]:
        """Convert to a CSV row keyed by schema column."""
        return self.model_dump(by_alias=True)


class FlowDataset(BaseModel):
    """Ordered collection of flow records."""

    model_config = ConfigDict(frozen=True)

    records: Tuple[FlowRecord, ...] = ()

    @property
    def classes(self) -> List[str]:
        """Distinct labels, sorted."""
        return sorted({record.label for record in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def by_class(self) -> Dict[str, "FlowDataset"]:
        """
        Split into one stream per label.

        Each class label within one input is treated as one execution stream;
        record order inside a stream follows the dataset order.
        """
        streams: Dict[str, List[FlowRecord]] = {}
        for record in self.records:
            streams.setdefault(record.label, []).append(record)
        return {label: FlowDataset(records=tuple(streams[label])) for label in sorted(streams)}

    def partition(self, label: Optional[str]) -> Tuple["FlowDataset", "FlowDataset"]:
        """(records of every other label, records of `label`), order kept."""
        kept = tuple(record for record in self.records if record.label != label)
        held = tuple(record for record in self.records if record.label == label)
        return FlowDataset(records=kept), FlowDataset(records=held)


class DatasetSplit(BaseModel):
    """
    Train/test partition of example indices.

    Indices refer to positions in the example list the split was computed on.
    Examples of the holdout class are listed separately and never appear in
    train or test.
    """

    train: List[int] = Field(default_factory=list)
    test: List[int] = Field(default_factory=list)
    holdout: List[int] = Field(default_factory=list)
    holdout_class: Optional[str] = None

    @model_validator(mode="after")
    def _check_disjoint(self) -> "DatasetSplit":
        train, test, holdout = set(self.train), set(self.test), set(self.holdout)
        if train & test:
            raise ValueError("train and test indices overlap")
        if holdout & (train | test):
            raise ValueError("holdout indices overlap train/test")
        return self
