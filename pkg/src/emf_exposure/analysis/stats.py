from __future__ import annotations

import math
from statistics import NormalDist
from typing import Sequence

from ..errors import InsufficientDataError

Z_95 = 1.959964


def z_value(level: float) -> float:
    """Two-sided standard-normal quantile for a confidence level."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    if level == 0.95:
        return Z_95
    return NormalDist().inv_cdf(0.5 + level / 2)


def confidence_interval(samples: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """(mean, half-width) of a Gaussian confidence interval on the mean."""
    n = len(samples)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    mean = math.fsum(samples) / n
    var = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
    return mean, z_value(level) * math.sqrt(var) / math.sqrt(n)
