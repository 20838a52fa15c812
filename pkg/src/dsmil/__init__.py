"""Dissimilarity-based subspace ensembles for multiple instance learning."""
