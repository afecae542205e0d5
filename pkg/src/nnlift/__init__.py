"""
NN-LIFT: two-layer network training through moment tensors.

Library modules follow the training stages: score functions and moments,
tensor decomposition, Fourier bias estimation and ridge regression.
"""

__version__ = "0.1.0"
