"""Two-block proximal coordinate descent for hierarchically sparse ARMA fits.

Each outer iteration does a proximal-gradient step on the AR block, reads
off the AR order from the nonzeros, clips the AR roots back into the
stability region, and then repeats the same for the MA block using the
freshly updated AR coefficients (Gauss-Seidel order).
"""
from __future__ import annotations

import copy
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .exceptions import FitError, SeriesLengthError
from .penalty import (
    ZERO_TOL,
    AdmmState,
    GroupStructure,
    admm_prox,
    build_groups,
    hierarchy_violations,
    penalty_value,
    snap_zeros,
)
from .series import ArmaParams, _values, exact_grad, grad, lag_matrix, loss, residuals
from .stability import DEFAULT_DELTA, effective_order, is_member, project

logger = logging.getLogger(__name__)

__all__ = ["FitConfig", "FitResult", "fit", "objective", "power_iteration"]

STEP_RULES = ("bb", "backtracking", "fixed")
GRADIENTS = ("exact", "conditional")


@dataclass
class FitConfig:
    """Settings for :func:`fit`.

    Step rules
    ----------
    ``"bb"``
        Barzilai-Borwein trial step per block, accepted under a nonmonotone
        sufficient-decrease test on ``loss + lam * penalty`` over the last
        ``nonmonotone_window`` values, halved on failure.
    ``"backtracking"``
        Start from ``1 / L_hat`` (power iteration on the lagged Gram
        matrix) and halve until the smooth part decreases sufficiently.
        ``L_hat`` is refreshed after two consecutive backtracking episodes.
    ``"fixed"``
        Always use ``gamma``.

    ``gradient="exact"`` differentiates through the MA recursion;
    ``"conditional"`` holds lagged residuals fixed (see :func:`hsarma.series.grad`),
    and then the backtracking test uses the matching frozen-lag quadratic.
    """

    lam: float
    p_cap: int
    q_cap: int
    delta: float = DEFAULT_DELTA
    gradient: str = "exact"
    step: str = "bb"
    gamma: Optional[float] = None
    shrink: float = 0.5
    max_tries: int = 40
    nonmonotone_window: int = 10
    sufficient_decrease: float = 1e-4
    tol: float = 1e-6
    max_outer: int = 500
    rho: float = 1.0
    alpha_relax: float = 1.0
    admm_tol: float = 1e-8
    admm_max_iter: int = 1000

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.p_cap < 0 or self.q_cap < 0 or self.p_cap + self.q_cap < 1:
            raise ValueError("need p_cap, q_cap >= 0 with p_cap + q_cap >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.gradient not in GRADIENTS:
            raise ValueError(f"unknown gradient {self.gradient!r}")
        if self.step not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step!r}")
        if self.step == "fixed" and not (self.gamma and self.gamma > 0):
            raise ValueError("fixed step rule needs gamma > 0")
        if self.tol <= 0 or self.max_outer < 1:
            raise ValueError("tol must be positive and max_outer >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_tries < 1 or self.nonmonotone_window < 1:
            raise ValueError("max_tries and nonmonotone_window must be >= 1")

    @classmethod
    def from_lambda0(cls, lambda0: float, T: int, p_cap: int, q_cap: int, **kw) -> "FitConfig":
        """Penalty scaled with the series length, ``lam = lambda0 * sqrt(T)``."""
        return cls(lam=lambda0 * math.sqrt(T), p_cap=p_cap, q_cap=q_cap, **kw)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``objective_trace[0]`` is the objective at the starting point and entry
    ``k`` the value after outer iteration ``k``.
    """

    params: ArmaParams
    order_p: int
    order_q: int
    lam: float
    objective_trace: List[float]
    converged: bool
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "order_p": self.order_p,
            "order_q": self.order_q,
            "lambda": self.lam,
            "objective_trace": list(self.objective_trace),
            "converged": self.converged,
            "iterations": self.iterations,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            params=ArmaParams.from_dict(d["params"]),
            order_p=int(d["order_p"]),
            order_q=int(d["order_q"]),
            lam=float(d["lambda"]),
            objective_trace=[float(v) for v in d.get("objective_trace", [])],
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            diagnostics=dict(d.get("diagnostics", {})),
        )


def objective(series, params: ArmaParams, lam: float, gs: Optional[GroupStructure] = None) -> float:
    """Conditional least-squares loss plus ``lam`` times the LOG penalty."""
    val = loss(series, params)
    if lam == 0:
        return val
    if gs is None:
        gs = build_groups(params.p_cap, params.q_cap)
    return val + lam * penalty_value(params.beta, gs)


def power_iteration(A: np.ndarray, n_iter: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD matrix."""
    n = A.shape[0]
    if n == 0:
        return 0.0
    v = np.random.default_rng(seed).normal(size=n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam = float(v @ A @ v)
    return lam


def _enforce_hierarchy(coef: np.ndarray):
    """Zero every lag after the first zero; returns ``(coef, n_dropped)``."""
    n_bad = hierarchy_violations(coef, ZERO_TOL)
    if n_bad:
        nz = np.abs(coef) > ZERO_TOL
        coef = coef.copy()
        coef[int(np.argmin(nz)):] = 0.0
    return coef, n_bad


def _with_block(params: ArmaParams, coef: np.ndarray, ar: bool) -> ArmaParams:
    if ar:
        return ArmaParams(coef, params.theta)
    return ArmaParams(params.phi, coef)


class _Block:
    """Per-block solver state: step memory, ADMM warm start, penalty value."""

    def __init__(self, ar: bool, gs: Optional[GroupStructure], cfg: FitConfig):
        self.ar = ar
        self.gs = gs
        self.admm = AdmmState.zeros(gs, cfg.rho, cfg.alpha_relax) if gs is not None else None
        self.gamma = cfg.gamma
        self.curvature = None
        self.backtracked_last = False
        self.prev_coef = None
        self.prev_grad = None
        self.omega = 0.0


class _Solver:
    def __init__(self, y: np.ndarray, cfg: FitConfig, params: ArmaParams):
        self.y = y
        self.cfg = cfg
        self.params = params
        gs = build_groups(cfg.p_cap, cfg.q_cap)
        self.gs = gs
        self.blocks = {
            "ar": _Block(True, gs.ar_part() if cfg.p_cap else None, cfg),
            "ma": _Block(False, gs.ma_part() if cfg.q_cap else None, cfg),
        }
        if cfg.lam > 0:
            for blk, coef in ((self.blocks["ar"], params.phi), (self.blocks["ma"], params.theta)):
                if blk.gs is not None and np.any(coef):
                    blk.omega = penalty_value(coef, blk.gs)
        self.diag = {
            "backtracks": 0,
            "step_failures": 0,
            "projections": 0,
            "admm_not_converged": 0,
            "hierarchy_truncations": 0,
            "non_monotone_steps": 0,
        }
        self.F = self._objective(loss(y, params))
        self.history = deque([self.F], maxlen=cfg.nonmonotone_window)

    def _objective(self, L: float) -> float:
        return L + self.cfg.lam * (self.blocks["ar"].omega + self.blocks["ma"].omega)

    def _curvature(self, trace, ar: bool) -> float:
        m = trace.start_index - 1
        if ar:
            Z = lag_matrix(self.y, self.cfg.p_cap, m)
        else:
            Z = lag_matrix(trace.residuals, self.cfg.q_cap, m)
        return power_iteration(Z.T @ Z)

    def _first_step(self, blk: _Block, trace, coef, g) -> float:
        cfg = self.cfg
        if cfg.step == "fixed":
            return cfg.gamma
        if blk.curvature is None:
            blk.curvature = max(self._curvature(trace, blk.ar), 1e-12)
            if cfg.step == "backtracking" or blk.gamma is None:
                blk.gamma = 1.0 / blk.curvature
        if cfg.step == "bb" and blk.prev_coef is not None:
            s = coef - blk.prev_coef
            r = g - blk.prev_grad
            sr = float(np.dot(s, r))
            if sr > 0:
                base = 1.0 / blk.curvature
                blk.gamma = min(max(float(np.dot(s, s)) / sr, 1e-6 * base), 1e6 * base)
        return blk.gamma

    @staticmethod
    def _finish(half: np.ndarray, delta: float):
        """Hierarchy truncation, order extraction and projection of the head."""
        half, n_bad = _enforce_hierarchy(half)
        order = int(np.count_nonzero(half))
        new = half.copy()
        projected = bool(order) and not is_member(new[:order], delta)
        if projected:
            new[:order] = project(new[:order], delta)
        return new, n_bad, projected

    def half_step(self, name: str) -> bool:
        cfg = self.cfg
        blk = self.blocks[name]
        ar = blk.ar
        params = self.params
        coef = params.phi if ar else params.theta
        if coef.size == 0:
            return True
        y = self.y
        trace = residuals(y, params)
        L0 = 0.5 * float(np.dot(trace.window, trace.window))
        exact = cfg.gradient == "exact"
        g_phi, g_theta = (exact_grad if exact else grad)(y, params, trace)
        g = g_phi if ar else g_theta
        Z = None
        if not exact and cfg.step == "backtracking":
            m = trace.start_index - 1
            if ar:
                Z = lag_matrix(y, cfg.p_cap, m)
            else:
                Z = -lag_matrix(trace.residuals, cfg.q_cap, m)

        other = self.blocks["ma" if ar else "ar"].omega
        gamma = self._first_step(blk, trace, coef, g)
        F_ref = max(self.history)
        accepted = False
        tries = 0
        while tries < cfg.max_tries:
            tries += 1
            b = coef - gamma * g
            state = copy.deepcopy(blk.admm)
            if cfg.lam > 0:
                res = admm_prox(
                    b, gamma * cfg.lam, blk.gs, cfg.rho, cfg.alpha_relax,
                    cfg.admm_tol, cfg.admm_max_iter, state=state,
                )
                if not res.converged:
                    self.diag["admm_not_converged"] += 1
                half = snap_zeros(res.beta)
                omega = penalty_value(half, blk.gs)
            else:
                half = b
                omega = 0.0
            if cfg.step == "bb":
                # the test is on the projected point, so that a step the
                # projection would undo is not accepted
                new, n_bad, projected = self._finish(half, cfg.delta)
                if n_bad or projected:
                    omega = penalty_value(new, blk.gs) if cfg.lam > 0 else 0.0
                d = new - coef
            else:
                d = half - coef
            dd = float(np.dot(d, d))
            if cfg.step == "fixed":
                accepted = True
                break
            if cfg.step == "backtracking":
                if Z is not None:
                    # quadratic model in which the lagged covariates stay frozen
                    r = trace.window - Z @ d
                    L1 = 0.5 * float(np.dot(r, r))
                else:
                    L1 = loss(y, _with_block(params, half, ar))
                bound = L0 + float(np.dot(g, d)) + dd / (2.0 * gamma)
                ok = L1 <= bound + 1e-12 * max(1.0, abs(L0))
            else:
                L1 = loss(y, _with_block(params, new, ar))
                F1 = L1 + cfg.lam * (omega + other)
                ok = F1 <= F_ref - cfg.sufficient_decrease * dd / (2.0 * gamma)
            if np.isfinite(L1) and ok:
                accepted = True
                break
            gamma *= cfg.shrink
            self.diag["backtracks"] += 1

        if not accepted:
            self.diag["step_failures"] += 1
            return False

        if cfg.step == "backtracking":
            backtracked = tries > 1
            if backtracked and blk.backtracked_last:
                blk.curvature = None
            blk.backtracked_last = backtracked
        blk.gamma = gamma
        blk.prev_coef = coef
        blk.prev_grad = g
        blk.admm = state

        if cfg.step != "bb":
            new, n_bad, projected = self._finish(half, cfg.delta)
            if cfg.lam > 0 and (n_bad or projected):
                omega = penalty_value(new, blk.gs)
        self.diag["hierarchy_truncations"] += n_bad
        self.diag["projections"] += int(projected)
        blk.omega = omega
        self.params = _with_block(params, new, ar)
        self.F = self._objective(loss(y, self.params))
        self.history.append(self.F)
        return True


def fit(
    series,
    config: FitConfig,
    warm_start: Optional[FitResult] = None,
    callback: Optional[Callable[[int, ArmaParams], None]] = None,
) -> FitResult:
    """Fit an ARMA(p_cap, q_cap) model with hierarchical sparsity.

    Minimizes ``loss + lam * Omega_LOG`` by alternating proximal-gradient
    steps on the AR and MA blocks, each followed by root clipping so that
    every iterate is stationary and invertible.

    Parameters
    ----------
    series : TimeSeries or array_like
        Zero-mean observations.
    config : FitConfig
    warm_start : FitResult, optional
        Start from a previous solution (e.g. the neighbouring lambda on a
        path) instead of zero.
    callback : callable, optional
        Called as ``callback(k, params)`` after every outer iteration with
        the projected iterate.

    Returns
    -------
    FitResult
        ``converged`` is False when ``max_outer`` was reached or a step-size
        search failed; counts are in ``diagnostics``.
    """
    y = _values(series)
    cfg = config
    m = max(cfg.p_cap, cfg.q_cap)
    if y.size <= m + 1:
        raise SeriesLengthError(
            f"series of length {y.size} too short for caps ({cfg.p_cap}, {cfg.q_cap})"
        )
    if not np.all(np.isfinite(y)) or np.std(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise FitError("series is constant (zero variance); nothing to fit")

    if warm_start is not None:
        params = warm_start.params.padded(cfg.p_cap, cfg.q_cap)
        for coef in (params.phi, params.theta):
            if not is_member(coef, cfg.delta):
                raise ValueError("warm start is outside the stability region")
    else:
        params = ArmaParams.zeros(cfg.p_cap, cfg.q_cap)

    solver = _Solver(y, cfg, params)
    trace_vals = [solver.F]
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        old = solver.params.beta
        ok = solver.half_step("ar") and solver.half_step("ma")
        trace_vals.append(solver.F)
        if callback is not None:
            callback(it, solver.params)
        if trace_vals[-1] > trace_vals[-2] + 1e-10 * max(1.0, abs(trace_vals[-2])):
            solver.diag["non_monotone_steps"] += 1
        if not ok:
            logger.info("step-size search failed at outer iteration %d", it)
            break
        beta = solver.params.beta
        rel = np.linalg.norm(beta - old) / max(1.0, np.linalg.norm(beta))
        if rel <= cfg.tol:
            converged = True
            break

    params = solver.params
    return FitResult(
        params=params,
        order_p=effective_order(params.phi),
        order_q=effective_order(params.theta),
        lam=cfg.lam,
        objective_trace=trace_vals,
        converged=converged,
        iterations=it,
        diagnostics=solver.diag,
    )
