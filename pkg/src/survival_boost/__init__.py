"""Random and extra survival forests with AdaBoost wrappers for censored and competing-risk data."""

__version__ = "0.1.0"
