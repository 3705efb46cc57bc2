"""
tscongruence: congruence distance of multi-dimensional time series.

Modules:
- core:        TimeSeries, Isometry, self-similarity matrices, random instances
- approx:      delta / fast delta / greedy / fast greedy lower bounds, DTW
- congruence:  optimizer upper bound d^O, Weiszfeld median, brute-force oracle
- data:        random walks, arc-length dewarping, dataset files
- config:      layered settings (defaults yaml < user file < CLI flags)
- bench:       sanity, tightness, speedup and scaling experiments
- search:      k-NN and range queries with lower-bound pruning
- cli:         command-line entry point
"""

__version__ = "1.0.0"
