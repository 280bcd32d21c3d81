"""Skewness of citation distributions: percentile shares, Gini, linking and MNCS."""
