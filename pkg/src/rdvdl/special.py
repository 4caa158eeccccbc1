"""Scalar special functions and numerically-safe helpers.

The digamma function is implemented here rather than taken from a library so
that the variational updates are self-contained and bit-reproducible across
library versions; it is tested against a high-precision oracle.
"""

import math

import numpy as np

# Asymptotic expansion coefficients: Bernoulli(2n) / (2n) for n = 1..7.
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

_MIN_ASYMPTOTIC = 10.0


def digamma_scalar(x: float) -> float:
    """Digamma psi(x) for a positive scalar argument.

    Upward recurrence psi(x) = psi(x + 1) - 1/x is applied until the argument
    reaches ``_MIN_ASYMPTOTIC``, then the standard asymptotic series
    psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^(2n)) is evaluated.  The
    recurrence terms are accumulated with exact summation so the absolute
    error stays below 1e-12 down to x = 1e-3.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"digamma requires a positive finite argument, got {x!r}")
    shift_terms = []
    while x < _MIN_ASYMPTOTIC:
        shift_terms.append(1.0 / x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for coeff in _ASYMPTOTIC:
        series += coeff * power
        power *= inv2
    value = math.log(x) - 0.5 / x - series
    if shift_terms:
        value -= math.fsum(shift_terms)
    return value


def digamma(x):
    """Vectorized digamma over arrays or scalars of positive values."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return digamma_scalar(float(arr))
    out = np.empty(arr.shape, dtype=float)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = digamma_scalar(flat_in[i])
    return out


def sigmoid(x):
    """Logistic function computed in the log domain.

    Equivalent to a two-way softmax with max subtraction: it underflows
    smoothly to 0 or 1 and never produces NaN for finite input.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)
