"""Latent overlapping group (LOG) penalty over the two ARMA lag chains.

The groups are the ascending prefixes of each chain: ``{1}, {1,2}, ...,
{1..p_cap}`` for the AR lags and the same for the MA lags (shifted by
``p_cap``).  The penalty of ``beta`` is the cheapest way of writing it as a
sum of latent vectors, each supported on one group, with cost
``sum_g w_g ||nu_g||_2``.  Because a lag can only be reached through
groups that also contain every lower lag, the proximal map produces
hierarchically sparse vectors.

The proximal map is evaluated with a two-block ADMM in sharing form: the
first block is a group-wise block soft-threshold (parallel over groups),
the second block averages the latents against the data.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numba import njit

from .exceptions import ConvergenceWarning

ZERO_TOL = 1e-8

__all__ = [
    "AdmmState",
    "GroupStructure",
    "ProxResult",
    "admm_prox",
    "block_shrink",
    "build_groups",
    "chain_penalty",
    "hierarchy_violations",
    "penalty_value",
    "prox_log",
    "prox_log_split",
    "snap_zeros",
]


@dataclass(frozen=True)
class GroupStructure:
    """Ascending groups over ``p_cap + q_cap`` coefficients.

    ``groups`` holds 0-based index tuples; ``ar_split`` is ``p_cap``.
    """

    groups: tuple
    weights: np.ndarray
    ar_split: int
    dim: int

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def mask(self) -> np.ndarray:
        M = np.zeros((self.n_groups, self.dim))
        for k, g in enumerate(self.groups):
            M[k, list(g)] = 1.0
        return M

    def one_based(self) -> List[List[int]]:
        return [[i + 1 for i in g] for g in self.groups]

    def ar_part(self) -> "GroupStructure":
        return build_groups(self.ar_split, 0, self._weight_fn)

    def ma_part(self) -> "GroupStructure":
        return build_groups(0, self.dim - self.ar_split, self._weight_fn)

    @property
    def _weight_fn(self):
        lookup = {}
        for g, w in zip(self.groups, self.weights):
            lookup[len(g)] = float(w)
        return lambda size: lookup.get(size, np.sqrt(size))


def build_groups(p_cap: int, q_cap: int, weight=None) -> GroupStructure:
    """Ascending prefix groups for the AR chain then the MA chain.

    ``weight`` maps a group size to its weight; the default is ``sqrt(size)``.
    """
    if p_cap < 0 or q_cap < 0:
        raise ValueError("caps must be nonnegative")
    if p_cap + q_cap < 1:
        raise ValueError("at least one of p_cap, q_cap must be positive")
    if weight is None:
        weight = np.sqrt
    groups = [tuple(range(k)) for k in range(1, p_cap + 1)]
    groups += [tuple(range(p_cap, p_cap + k)) for k in range(1, q_cap + 1)]
    weights = np.array([float(weight(len(g))) for g in groups])
    if np.any(weights <= 0):
        raise ValueError("group weights must be positive")
    return GroupStructure(tuple(groups), weights, p_cap, p_cap + q_cap)


def block_shrink(v, tau: float) -> np.ndarray:
    """Group soft-threshold ``(1 - tau / ||v||)_+ v``."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / nrm) * v


@dataclass
class AdmmState:
    """Per-group latent (``X1``), auxiliary (``X2``) and scaled dual (``U``) rows."""

    X1: np.ndarray
    X2: np.ndarray
    U: np.ndarray
    rho: float = 1.0
    alpha_relax: float = 1.0

    @classmethod
    def zeros(cls, gs: GroupStructure, rho: float = 1.0, alpha_relax: float = 1.0):
        shape = (gs.n_groups, gs.dim)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape), rho, alpha_relax)


@dataclass
class ProxResult:
    beta: np.ndarray
    state: AdmmState
    converged: bool
    iterations: int


def admm_prox(
    b,
    lam: float,
    gs: GroupStructure,
    rho: float = 1.0,
    alpha_relax: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 1000,
    state: Optional[AdmmState] = None,
    exact_sum: bool = False,
    use_numba: bool = True,
) -> ProxResult:
    """Sharing ADMM for ``min lam * sum_g w_g ||nu_g|| + h(sum_g nu_g)``.

    With ``exact_sum=False`` the coupling is ``h(s) = ||s - b||^2 / 2`` (the
    proximal map); with ``exact_sum=True`` it is the indicator of ``s = b``,
    which yields the penalty value itself.  ``state`` warm-starts the
    iteration and is updated in place.

    Stops once both the consensus gap ``max|X1 - X2|`` and the change of
    ``sum_g X1_g`` between sweeps are below ``tol``.  ``use_numba=False``
    runs the plain numpy loop (same iterates up to rounding).
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (gs.dim,):
        raise ValueError(f"expected a vector of length {gs.dim}, got shape {b.shape}")
    if rho <= 0 or alpha_relax <= 0:
        raise ValueError("rho and alpha_relax must be positive")
    if state is None:
        state = AdmmState.zeros(gs, rho, alpha_relax)
    tau = lam * gs.weights / rho
    if use_numba:
        X1, X2, U = (np.ascontiguousarray(a, dtype=float) for a in (state.X1, state.X2, state.U))
        it, converged = _admm_kernel(
            b, tau, gs.mask, X1, X2, U, rho, alpha_relax, tol, max_iter, exact_sum
        )
        beta = X1.sum(axis=0)
        state.X1, state.X2, state.U = X1, X2, U
    else:
        beta, it, converged = _admm_numpy(
            b, tau, gs.mask, state, rho, alpha_relax, tol, max_iter, exact_sum
        )
    state.rho, state.alpha_relax = rho, alpha_relax
    return ProxResult(beta, state, converged, it)


def _admm_numpy(b, tau, M, state, rho, alpha_relax, tol, max_iter, exact_sum):
    N = M.shape[0]
    X1, X2, U = state.X1, state.X2, state.U
    beta = X1.sum(axis=0)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # first block: independent per group
        V = (X2 - U) * M
        nrm = np.sqrt(np.einsum("ij,ij->i", V, V))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(nrm > tau, 1.0 - tau / nrm, 0.0)
        X1 = V * scale[:, None]
        # second block: sharing / averaging step
        W = X1 + U
        wbar = W.mean(axis=0)
        if exact_sum:
            zbar = b / N
        else:
            zbar = (b + rho * wbar) / (N + rho)
        X2 = zbar + (W - wbar)
        U = U + alpha_relax * (X1 - X2)
        new_beta = X1.sum(axis=0)
        gap = np.max(np.abs(X1 - X2))
        change = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if max(gap, change) < tol:
            converged = True
            break
    state.X1, state.X2, state.U = X1, X2, U
    return beta, it, converged


@njit(cache=True)
def _admm_kernel(b, tau, M, X1, X2, U, rho, alpha_relax, tol, max_iter, exact_sum):
    N, d = M.shape
    beta = np.zeros(d)
    for g in range(N):
        for j in range(d):
            beta[j] += X1[g, j]
    W = np.empty((N, d))
    wbar = np.empty(d)
    zbar = np.empty(d)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        for g in range(N):
            s = 0.0
            for j in range(d):
                if M[g, j] != 0.0:
                    v = X2[g, j] - U[g, j]
                    s += v * v
            nrm = np.sqrt(s)
            scale = 1.0 - tau[g] / nrm if nrm > tau[g] else 0.0
            for j in range(d):
                if M[g, j] != 0.0:
                    X1[g, j] = scale * (X2[g, j] - U[g, j])
                else:
                    X1[g, j] = 0.0
        for j in range(d):
            acc = 0.0
            for g in range(N):
                W[g, j] = X1[g, j] + U[g, j]
                acc += W[g, j]
            wbar[j] = acc / N
            if exact_sum:
                zbar[j] = b[j] / N
            else:
                zbar[j] = (b[j] + rho * wbar[j]) / (N + rho)
        gap = 0.0
        change = 0.0
        for j in range(d):
            col = 0.0
            for g in range(N):
                x2 = zbar[j] + W[g, j] - wbar[j]
                X2[g, j] = x2
                r = X1[g, j] - x2
                U[g, j] += alpha_relax * r
                if abs(r) > gap:
                    gap = abs(r)
                col += X1[g, j]
            if abs(col - beta[j]) > change:
                change = abs(col - beta[j])
            beta[j] = col
        if max(gap, change) < tol:
            converged = True
            break
    return it, converged


def snap_zeros(x, tol: float = ZERO_TOL) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[np.abs(x) <= tol] = 0.0
    return x


def hierarchy_violations(coef, tol: float = ZERO_TOL) -> int:
    """Count lags that are nonzero while some lower lag in the chain is zero."""
    nz = np.abs(np.asarray(coef, dtype=float)) > tol
    if not nz.size:
        return 0
    # a violation is any nonzero after the first zero
    first_zero = np.argmin(nz) if not nz.all() else nz.size
    return int(nz[first_zero:].sum())


def prox_log(
    b,
    lam: float,
    gs: GroupStructure,
    rho: float = 1.0,
    alpha_relax: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> np.ndarray:
    """Proximal map of ``lam * Omega_LOG`` at ``b``.

    Entries with magnitude at most 1e-8 are snapped to exactly zero.  If the
    ADMM hits ``max_iter`` the last iterate is returned and a
    :class:`ConvergenceWarning` is issued.
    """
    b = np.asarray(b, dtype=float)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if b.shape != (gs.dim,):
        raise ValueError(f"expected a vector of length {gs.dim}, got shape {b.shape}")
    if lam == 0:
        return b.copy()
    res = admm_prox(b, lam, gs, rho, alpha_relax, tol, max_iter)
    if not res.converged:
        warnings.warn(
            f"LOG prox ADMM stopped after {max_iter} iterations", ConvergenceWarning, stacklevel=2
        )
    return snap_zeros(res.beta)


def prox_log_split(b_ar, b_ma, lam: float, gs: GroupStructure, **kw):
    """Evaluate the prox separately on the AR and MA chains.

    The penalty is a sum of an AR-only and an MA-only term, so this equals
    the joint :func:`prox_log`.
    """
    b_ar = np.asarray(b_ar, dtype=float).ravel()
    b_ma = np.asarray(b_ma, dtype=float).ravel()
    p_cap = gs.ar_split
    if b_ar.size != p_cap or b_ma.size != gs.dim - p_cap:
        raise ValueError("block sizes do not match the group structure")
    out_ar = prox_log(b_ar, lam, gs.ar_part(), **kw) if p_cap else b_ar.copy()
    out_ma = prox_log(b_ma, lam, gs.ma_part(), **kw) if b_ma.size else b_ma.copy()
    return out_ar, out_ma


def chain_penalty(v, weights) -> float:
    """LOG penalty of one chain with prefix groups, in closed form.

    By duality the value is ``max <u, v>`` over ``||u[:k]|| <= w_k`` for all
    ``k``.  Writing ``s_j = u_j**2`` turns this into maximizing
    ``sum |v_j| sqrt(s_j)`` under cumulative budgets, whose solution splits
    the lags into consecutive blocks read off the lower convex hull of the
    points ``(sum_{j<=k} v_j**2, w_k**2)``; a block contributes
    ``sqrt(dB * dW)``.  Cost is O(d).
    """
    v = np.asarray(v, dtype=float)
    w2 = np.asarray(weights, dtype=float) ** 2
    if v.shape != w2.shape:
        raise ValueError("coefficient and weight lengths differ")
    B = np.concatenate([[0.0], np.cumsum(v * v)])
    # a later budget also caps every earlier prefix
    G = np.concatenate([[0.0], np.minimum.accumulate(w2[::-1])[::-1]])
    hull = [(0.0, 0.0)]
    for x, y in zip(B[1:], G[1:]):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    total = 0.0
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        total += np.sqrt(max(x2 - x1, 0.0) * max(y2 - y1, 0.0))
    return float(total)


def penalty_value(
    beta,
    gs: GroupStructure,
    method: str = "exact",
    tol: float = 1e-10,
    max_iter: int = 100000,
    rho: Optional[float] = None,
) -> float:
    """Value of the LOG penalty at ``beta``.

    ``method="exact"`` uses :func:`chain_penalty` on each chain.
    ``method="admm"`` instead minimizes ``sum_g w_g ||nu_g||`` subject to
    ``sum_g nu_g = beta`` with the sharing ADMM of the prox (exact-sum
    coupling); it is slow to reach high accuracy and kept for cross-checks.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (gs.dim,):
        raise ValueError(f"expected a vector of length {gs.dim}, got shape {beta.shape}")
    if method not in ("exact", "admm"):
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    for part, sub in _chains(beta, gs):
        if not np.any(part):
            continue
        if method == "exact":
            total += chain_penalty(part, sub.weights)
            continue
        scale = float(np.max(np.abs(part)))
        r = rho if rho is not None else 1.0
        res = admm_prox(part / scale, 1.0, sub, rho=r, tol=tol, max_iter=max_iter, exact_sum=True)
        if not res.converged:
            warnings.warn("LOG penalty ADMM did not converge", ConvergenceWarning, stacklevel=2)
        total += scale * float(np.dot(sub.weights, np.linalg.norm(res.state.X1, axis=1)))
    return total


def _chains(beta: np.ndarray, gs: GroupStructure):
    p = gs.ar_split
    if p:
        yield beta[:p], gs.ar_part()
    if gs.dim > p:
        yield beta[p:], gs.ma_part()

