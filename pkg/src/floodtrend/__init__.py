"""Flood-risk trend analysis: exposure backcasting, loss normalization,
copula gap-filling, underreporting correction and Poisson trend tests."""

__version__ = "0.1.0"
