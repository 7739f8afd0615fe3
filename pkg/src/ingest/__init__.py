"""Ingest Package - flow CSV parsing, ordering and example splitting."""

from .flows import parse_flow_csv, sort_flows, write_flow_csv
from .split import hold_out_class, split_train_test

__all__ = ["parse_flow_csv", "sort_flows", "write_flow_csv", "hold_out_class", "split_train_test"]
