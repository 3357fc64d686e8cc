"""Closed-form Black-Scholes values and a binomial-tree American oracle.

These are the ground-truth references the Monte Carlo machinery is tested
against, so the normal CDF is evaluated through the erf-based scipy routine
(abs error ~1e-16) rather than a fast approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .accel import USE_NUMBA, jit_kernel

CALL = "call"
PUT = "put"


@dataclass(frozen=True)
class BsInputs:
    s: float
    k: float
    sigma: float
    r: float = 0.0
    q: float = 0.0
    ttm_years: float = 0.0
    kind: str = PUT

    def __post_init__(self):
        if not (self.s > 0 and self.k > 0):
            raise ValueError("s and k must be positive")
        if self.sigma < 0 or self.ttm_years < 0:
            raise ValueError("sigma and ttm_years must be non-negative")
        if self.kind not in (CALL, PUT):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")


def std_normal_cdf(x):
    """Standard normal CDF; scalar or ndarray."""
    return ndtr(x)


def _d1_d2(s, k, sigma, r, q, ttm):
    vol = sigma * np.sqrt(ttm)
    d1 = (np.log(s / k) + (r - q + 0.5 * sigma**2) * ttm) / vol
    return d1, d1 - vol


def bs_price(inp: BsInputs) -> float:
    """European price: put = K e^{-rT} Phi(-d2) - S e^{-qT} Phi(-d1), call by parity.

    At ttm_years == 0 (or sigma == 0) returns the discounted deterministic
    limit, i.e. intrinsic at expiry.
    """
    return float(bs_price_curve(inp.s, inp))


def bs_price_curve(s, inp: BsInputs):
    """Vectorized bs_price over an array of underlying prices."""
    s = np.asarray(s, dtype=float)
    ttm = inp.ttm_years
    fwd_disc = np.exp(-inp.q * ttm)
    strike_disc = np.exp(-inp.r * ttm)
    if ttm == 0 or inp.sigma == 0:
        fwd = s * fwd_disc
        if inp.kind == PUT:
            return np.maximum(inp.k * strike_disc - fwd, 0.0)
        return np.maximum(fwd - inp.k * strike_disc, 0.0)
    d1, d2 = _d1_d2(s, inp.k, inp.sigma, inp.r, inp.q, ttm)
    if inp.kind == PUT:
        return inp.k * strike_disc * ndtr(-d2) - s * fwd_disc * ndtr(-d1)
    return s * fwd_disc * ndtr(d1) - inp.k * strike_disc * ndtr(d2)


def bs_delta(inp: BsInputs) -> float:
    """European delta: call e^{-qT} Phi(d1), put e^{-qT} (Phi(d1) - 1).

    Undefined at expiry (payoff kink), so ttm_years must be positive.
    """
    return float(bs_delta_curve(inp.s, inp))


def bs_delta_curve(s, inp: BsInputs):
    """Vectorized bs_delta over an array of underlying prices."""
    if inp.ttm_years <= 0:
        raise ValueError("delta is undefined at ttm_years == 0")
    s = np.asarray(s, dtype=float)
    fwd_disc = np.exp(-inp.q * inp.ttm_years)
    if inp.sigma == 0:
        # deterministic forward: delta is the discounted moneyness indicator
        fwd = s * fwd_disc
        strike_disc = inp.k * np.exp(-inp.r * inp.ttm_years)
        itm = fwd > strike_disc if inp.kind == CALL else fwd < strike_disc
        sign = 1.0 if inp.kind == CALL else -1.0
        return sign * fwd_disc * itm.astype(float)
    d1, _ = _d1_d2(s, inp.k, inp.sigma, inp.r, inp.q, inp.ttm_years)
    if inp.kind == CALL:
        return fwd_disc * ndtr(d1)
    return fwd_disc * (ndtr(d1) - 1.0)


def _crr_rollback_numpy(values, p_up, disc, is_put, k, s0, u, d, n):
    for level in range(n - 1, -1, -1):
        values = disc * (p_up * values[1 : level + 2] + (1.0 - p_up) * values[: level + 1])
        s_nodes = s0 * u ** np.arange(level + 1) * d ** np.arange(level, -1, -1)
        exercise = (k - s_nodes) if is_put else (s_nodes - k)
        np.maximum(values, exercise, out=values)
    return values[0]


def _crr_rollback_loop(values, p_up, disc, is_put, k, s0, u, d, n):
    for level in range(n - 1, -1, -1):
        s_node = s0 * d**level
        ratio = u / d
        for j in range(level + 1):
            cont = disc * (p_up * values[j + 1] + (1.0 - p_up) * values[j])
            exercise = (k - s_node) if is_put else (s_node - k)
            values[j] = cont if cont > exercise else exercise
            s_node *= ratio
    return values[0]


if USE_NUMBA:
    _crr_rollback_loop = jit_kernel(_crr_rollback_loop)


def crr_american_price(inp: BsInputs, n_tree_steps: int = 5000) -> float:
    """Cox-Ross-Rubinstein binomial price with early exercise at every node.

    u = e^{sigma sqrt(dt)}, d = 1/u, p = (e^{(r-q)dt} - d)/(u - d).
    Degenerate sigma (no tree spread) falls back to the deterministic path.
    """
    if n_tree_steps < 1:
        raise ValueError("n_tree_steps must be >= 1")
    is_put = inp.kind == PUT
    ttm = inp.ttm_years
    if ttm == 0 or inp.sigma == 0:
        # deterministic underlying: option value is the best stopping payoff
        # along S_t = s e^{(r-q)t}, discounted; for puts with r >= 0 this is
        # attained either immediately or at expiry
        times = np.linspace(0.0, ttm, n_tree_steps + 1)
        s_t = inp.s * np.exp((inp.r - inp.q) * times)
        pay = (inp.k - s_t) if is_put else (s_t - inp.k)
        return float(np.max(np.maximum(pay, 0.0) * np.exp(-inp.r * times)))

    dt = ttm / n_tree_steps
    u = np.exp(inp.sigma * np.sqrt(dt))
    d = 1.0 / u
    p_up = (np.exp((inp.r - inp.q) * dt) - d) / (u - d)
    disc = np.exp(-inp.r * dt)

    j = np.arange(n_tree_steps + 1)
    s_terminal = inp.s * u**j * d ** (n_tree_steps - j)
    values = np.maximum((inp.k - s_terminal) if is_put else (s_terminal - inp.k), 0.0)

    rollback = _crr_rollback_loop if USE_NUMBA else _crr_rollback_numpy
    return float(rollback(values, p_up, disc, is_put, inp.k, inp.s, u, d, n_tree_steps))
