"""Smooth maximum via log-sum-exp pooling.

lse_max(x, a) = max(x) + log(sum_i exp(a*(x_i - max)))/a is an exact
sum-decomposition of a smooth max surrogate: it brackets the true maximum
within log(M)/a from above, with equality exactly at all-equal inputs.
"""

import numpy as np

from ..errors import DomainError
from ..sets import as_set_input


def lse_max(x, a):
    """(1/a) log(sum exp(a x_i)), evaluated with the max-shift trick."""
    x = as_set_input(x)
    a = float(a)
    if not a > 0.0:
        raise DomainError(f"sharpness a must be positive, got {a}")
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(a * (x - m))))) / a
