"""Gene-network classification from CGR cubes, EMPR features and an RBF SVM."""

__version__ = "0.1.0"
