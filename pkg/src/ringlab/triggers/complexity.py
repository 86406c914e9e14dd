"""Sample-size requirement for accurate empirical CDFs of bounded quantities."""

import math

from ringlab.errors import ConfigurationError


def required_sample_size(x_lower: float, x_upper: float, eps: float,
                         delta: float) -> int:
    """Samples needed so the L1 error of the KDE-smoothed empirical CDF
    exceeds eps with probability at most delta.

    N >= max( (4*sqrt(pi)*(hi-lo)/eps)^5 , 2*(hi-lo)^2/eps^2 * ln(1/delta) )
    """
    if x_upper <= x_lower:
        raise ConfigurationError("require x_upper > x_lower")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must be in (0, 1)")
    span = x_upper - x_lower
    first = (4.0 * math.sqrt(math.pi) * span / eps) ** 5
    second = 2.0 * span * span / (eps * eps) * math.log(1.0 / delta)
    return math.ceil(max(first, second))
