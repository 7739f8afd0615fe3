"""
Flowembed - Main Package

Behavior embeddings of malware executions from labeled network flows:
connection graph, FastRP node vectors, spatio-temporal window examples, a
parallel convolutional embedder trained with an additive angular margin loss,
and the downstream classification, zero-day and attribution tasks.
"""

__version__ = "0.1.0"
