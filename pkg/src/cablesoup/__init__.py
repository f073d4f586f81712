"""Cable-graph Gaussian free field and loop-soup percolation on boxes of Z^d."""

__version__ = "0.1.0"
