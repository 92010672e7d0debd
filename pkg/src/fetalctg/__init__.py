"""Fetal-health CTG classification toolkit: PCA/LDA, SMO SVM, random forest, TabNet."""

__version__ = "0.1.0"
