"""Keyword-spotting toolkit: synthetic corpus, log-mel features, a small
convolutional classifier trained with a covariance-alignment loss, sliding
window detection and miss-rate/false-alarm evaluation."""

__version__ = "0.1.0"
