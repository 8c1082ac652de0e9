"""EEG affect recognition: band decomposition, features, labeling, classifiers, evaluation."""

__version__ = "0.1.0"
