"""Toolchain for building and scoring code-review fine-tuning corpora.

The package turns raw pull-request review events into instruction-tuning
datasets (one query paired with several independently sampled answer
variants) and ships the matching evaluation harness: line-set overlap,
judge-based hit rate, human-annotation summaries, and inter-rater agreement.
"""

__version__ = "0.1.0"
