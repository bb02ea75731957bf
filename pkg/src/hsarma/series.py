"""Time series containers, ARMA simulation and the conditional least-squares loss.

The process follows

    y_t = phi_1 y_{t-1} + ... + phi_p y_{t-p} - theta_1 e_{t-1} - ... - theta_q e_{t-q} + e_t

so residuals obey ``e_t = y_t - phi' y_lags + theta' e_lags``.  Residuals are
computed conditionally: with caps ``(p_cap, q_cap)`` and ``m = max(p_cap, q_cap)``
the first ``m`` residuals are fixed at zero and the loss sums the rest.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .exceptions import SeriesLengthError, StabilityError
from .stability import effective_order, is_member, max_root_modulus

__all__ = [
    "ArmaParams",
    "ResidualTrace",
    "TimeSeries",
    "forecast",
    "exact_grad",
    "grad",
    "lag_matrix",
    "loss",
    "read_series_csv",
    "residuals",
    "simulate",
    "write_series_csv",
]


@dataclass(eq=False)
class ArmaParams:
    """AR and MA coefficients, zero-padded to their caps.

    ``phi`` has length ``p_cap`` and ``theta`` length ``q_cap``; the
    effective orders ``p``/``q`` are the positions of the last nonzeros.
    """

    phi: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float)).ravel()
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).ravel()
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.theta))):
            raise ValueError("ARMA coefficients must be finite")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArmaParams):
            return NotImplemented
        return np.array_equal(self.phi, other.phi) and np.array_equal(self.theta, other.theta)

    @classmethod
    def zeros(cls, p_cap: int, q_cap: int) -> "ArmaParams":
        return cls(np.zeros(p_cap), np.zeros(q_cap))

    @classmethod
    def from_beta(cls, beta, p_cap: int) -> "ArmaParams":
        beta = np.asarray(beta, dtype=float)
        return cls(beta[:p_cap], beta[p_cap:])

    @property
    def p_cap(self) -> int:
        return self.phi.size

    @property
    def q_cap(self) -> int:
        return self.theta.size

    @property
    def p(self) -> int:
        return effective_order(self.phi)

    @property
    def q(self) -> int:
        return effective_order(self.theta)

    @property
    def beta(self) -> np.ndarray:
        return np.concatenate([self.phi, self.theta])

    def padded(self, p_cap: int, q_cap: int) -> "ArmaParams":
        """Zero-pad (never truncate) to the given caps."""
        if p_cap < self.p or q_cap < self.q:
            raise ValueError(
                f"caps ({p_cap}, {q_cap}) below effective orders ({self.p}, {self.q})"
            )
        phi = np.zeros(p_cap)
        theta = np.zeros(q_cap)
        phi[: self.p] = self.phi[: self.p]
        theta[: self.q] = self.theta[: self.q]
        return ArmaParams(phi, theta)

    def to_dict(self) -> dict:
        return {"phi": self.phi.tolist(), "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaParams":
        return cls(d.get("phi", []), d.get("theta", []))


@dataclass
class TimeSeries:
    """Real-valued observations ``y_1..y_T``.

    ``mean`` holds the sample mean removed by :meth:`centered`, and
    ``truth`` optionally the generating model.
    """

    values: np.ndarray
    mean_adjusted: bool = False
    mean: float = 0.0
    truth: Optional[ArmaParams] = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size < 1:
            raise SeriesLengthError("a series needs at least one observation")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")

    def __len__(self) -> int:
        return self.values.size

    @property
    def T(self) -> int:
        return self.values.size

    def centered(self) -> "TimeSeries":
        if self.mean_adjusted:
            return self
        mu = float(np.mean(self.values))
        return TimeSeries(self.values - mu, True, self.mean + mu, self.truth)


@dataclass
class ResidualTrace:
    """Conditional residuals; ``start_index`` is 1-based."""

    residuals: np.ndarray
    start_index: int

    @property
    def window(self) -> np.ndarray:
        return self.residuals[self.start_index - 1:]

    @property
    def sigma2(self) -> float:
        w = self.window
        return float(np.mean(w**2)) if w.size else 0.0


def _check_stable(params: ArmaParams) -> None:
    for name, coef in (("AR", params.phi), ("MA", params.theta)):
        if not is_member(coef, 0.0):
            kind = "stationary" if name == "AR" else "invertible"
            raise StabilityError(
                f"{name} part is not {kind}: characteristic root modulus "
                f"{max_root_modulus(coef):.6g} >= 1"
            )


def arma_filter(params: ArmaParams, innovations) -> np.ndarray:
    """Run the ARMA recursion on an innovation stream with zero presample."""
    e = np.asarray(innovations, dtype=float)
    b = np.concatenate([[1.0], -params.theta])
    a = np.concatenate([[1.0], -params.phi])
    return lfilter(b, a, e)


def simulate(
    params: ArmaParams,
    T: int,
    noise_sd: float = 1.0,
    seed: int = 0,
    burn_in: Optional[int] = None,
    return_innovations: bool = False,
):
    """Draw a length-``T`` realization with Gaussian innovations.

    A burn-in of ``max(200, 10 * (p_cap + q_cap))`` samples is generated and
    discarded unless ``burn_in`` is given.  With ``return_innovations`` the
    innovations aligned with the returned series are returned as well.
    """
    if T < 1:
        raise ValueError("T must be positive")
    if noise_sd <= 0:
        raise ValueError("noise_sd must be positive")
    _check_stable(params)
    if burn_in is None:
        burn_in = max(200, 10 * (params.p_cap + params.q_cap))
    rng = np.random.default_rng(seed)
    e = rng.normal(0.0, noise_sd, size=burn_in + T)
    y = arma_filter(params, e)[burn_in:]
    ts = TimeSeries(y, truth=params)
    if return_innovations:
        return ts, e[burn_in:]
    return ts


def lag_matrix(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns ``x[t-1], ..., x[t-lags]`` for rows ``t = start..len(x)-1`` (0-based)."""
    n = x.size - start
    out = np.empty((n, lags))
    for i in range(1, lags + 1):
        out[:, i - 1] = x[start - i: x.size - i]
    return out


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float).ravel()


def residuals(series, params: ArmaParams) -> ResidualTrace:
    """Conditional residuals, zero before ``start_index = max(p_cap, q_cap) + 1``."""
    y = _values(series)
    m = max(params.p_cap, params.q_cap)
    if y.size < m + 1:
        raise SeriesLengthError(
            f"series of length {y.size} is too short for caps "
            f"({params.p_cap}, {params.q_cap}); need at least {m + 1}"
        )
    w = y[m:].copy()
    for i, c in enumerate(params.phi, start=1):
        if c != 0.0:
            w -= c * y[m - i: y.size - i]
    eps = np.zeros_like(y)
    if params.q_cap and np.any(params.theta != 0.0):
        eps[m:] = lfilter([1.0], np.concatenate([[1.0], -params.theta]), w)
    else:
        eps[m:] = w
    return ResidualTrace(eps, m + 1)


def loss(series, params: ArmaParams) -> float:
    """Half the sum of squared conditional residuals."""
    r = residuals(series, params)
    return 0.5 * float(np.dot(r.window, r.window))


def grad(series, params: ArmaParams, trace: Optional[ResidualTrace] = None):
    """Gradient of :func:`loss` with the lagged residuals held fixed.

    The residual lags ``e_{t-1}..e_{t-q}`` are computed at ``params`` and
    then treated as covariates, so the MA block is the derivative of the
    frozen-lag surrogate, not of the full recursion.  For ``q_cap == 0`` the
    AR block is the exact gradient.

    Returns
    -------
    (g_phi, g_theta) : tuple of ndarray
    """
    y = _values(series)
    if trace is None:
        trace = residuals(y, params)
    m = trace.start_index - 1
    e = trace.residuals
    ew = e[m:]
    g_phi = np.empty(params.p_cap)
    for i in range(1, params.p_cap + 1):
        g_phi[i - 1] = -np.dot(ew, y[m - i: y.size - i])
    g_theta = np.empty(params.q_cap)
    for j in range(1, params.q_cap + 1):
        g_theta[j - 1] = np.dot(ew, e[m - j: e.size - j])
    return g_phi, g_theta


def exact_grad(series, params: ArmaParams, trace: Optional[ResidualTrace] = None):
    """Full gradient of :func:`loss`, differentiating through the MA recursion.

    The residual sensitivities obey ``(1 - theta(B)) de/dphi_i = -y_{t-i}`` and
    ``(1 - theta(B)) de/dtheta_j = e_{t-j}`` on the loss window with zero
    presample, matching how the residuals themselves are initialized.
    """
    y = _values(series)
    if trace is None:
        trace = residuals(y, params)
    m = trace.start_index - 1
    e = trace.residuals
    ew = e[m:]
    den = np.concatenate([[1.0], -params.theta])
    g_phi = np.empty(params.p_cap)
    g_theta = np.empty(params.q_cap)
    for i in range(1, params.p_cap + 1):
        g_phi[i - 1] = np.dot(ew, lfilter([1.0], den, -y[m - i: y.size - i]))
    for j in range(1, params.q_cap + 1):
        g_theta[j - 1] = np.dot(ew, lfilter([1.0], den, e[m - j: e.size - j]))
    return g_phi, g_theta


def forecast(series, params: ArmaParams, horizon: int) -> np.ndarray:
    """``horizon``-step forecast path with future innovations set to zero."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    y = _values(series)
    e = residuals(y, params).residuals
    p, q = params.p_cap, params.q_cap
    hist_y = list(y[-p:]) if p else []
    hist_e = list(e[-q:]) if q else []
    out = np.empty(horizon)
    for h in range(horizon):
        yhat = 0.0
        for i in range(1, p + 1):
            yhat += params.phi[i - 1] * hist_y[-i]
        for j in range(1, q + 1):
            yhat -= params.theta[j - 1] * hist_e[-j]
        out[h] = yhat
        if p:
            hist_y.append(yhat)
        if q:
            hist_e.append(0.0)
    return out


def read_series_csv(path) -> TimeSeries:
    """Read a single numeric column, optionally under a one-line header."""
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data")
    vals = []
    for k, row in enumerate(rows):
        if len(row) != 1:
            raise ValueError(f"{path}: expected one column, got {len(row)} on line {k + 1}")
        try:
            vals.append(float(row[0]))
        except ValueError:
            if k == 0:
                continue
            raise ValueError(f"{path}: non-numeric value {row[0]!r} on line {k + 1}") from None
    return TimeSeries(np.array(vals, dtype=np.float64))


def write_series_csv(path, values, header: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for v in np.asarray(values, dtype=float):
            fh.write(repr(float(v)) + "\n")
