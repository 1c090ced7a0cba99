"""Game-theoretic machine learning lab: behavior learning and mechanism learning for sponsored search."""

__version__ = "1.0.0"
