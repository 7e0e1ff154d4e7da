"""fuzzaug: turn program corpora into fuzz-augmented training data."""

__version__ = "0.1.0"
