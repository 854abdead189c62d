"""Risk bounds and ERM learners for regression models that switch between several linear or kernel modes."""

__version__ = "0.1.0"
