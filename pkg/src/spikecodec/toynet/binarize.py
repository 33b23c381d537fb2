"""Step binarisation with a triangular surrogate gradient.

The forward pass is a hard threshold: 1 where the input is strictly
positive, else 0, so an input of exactly zero maps to zero.  The step has a
zero derivative almost everywhere, so the backward pass substitutes the
derivative of the hinge ``max(0, 1 - |l|)``: upstream gradients pass through
scaled by how close the pre-activation sits to the threshold and are cut off
entirely outside the unit band.
"""

from __future__ import annotations

import numpy as np


def heaviside_forward(pre: np.ndarray) -> np.ndarray:
    """Binarise pre-activations: strictly positive -> 1, otherwise 0."""
    pre = np.asarray(pre)
    return (pre > 0).astype(pre.dtype)


def heaviside_backward(pre: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Route ``upstream`` through the surrogate slope max(0, 1 - |pre|)."""
    pre = np.asarray(pre)
    slope = np.maximum(pre.dtype.type(0), pre.dtype.type(1) - np.abs(pre))
    return upstream * slope
