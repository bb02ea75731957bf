"""Regularization paths, BIC selection and the simulation benchmark harness."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import SamplingError
from .series import ArmaParams, TimeSeries, _values, forecast, loss, residuals, simulate
from .solver import FitConfig, FitResult, fit
from .stability import effective_order, is_member, max_root_modulus, scale_roots

logger = logging.getLogger(__name__)

__all__ = [
    "BenchReport",
    "PathFailure",
    "PathSpec",
    "bic",
    "estimation_error",
    "fit_fixed_order",
    "forecast_rmse",
    "gen_true_model",
    "lambda_path",
    "run_table1",
    "select_bic",
]

DEFAULT_LAMBDA0_GRID = (0.5, 1.0, 2.0, 3.0, 5.0, 10.0)
MAX_DRAWS = 10_000


@dataclass(frozen=True)
class PathSpec:
    """Penalty grid for :func:`lambda_path`.

    Give either ``lambda0_grid`` (scaled by ``sqrt(T)`` at fit time) or an
    absolute log-spaced grid through ``lambda_min``, ``lambda_max`` and
    ``count``.
    """

    lambda0_grid: Optional[Tuple[float, ...]] = None
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    count: Optional[int] = None

    def __post_init__(self):
        if self.lambda0_grid is not None:
            grid = tuple(float(v) for v in self.lambda0_grid)
            object.__setattr__(self, "lambda0_grid", grid)
            if self.lambda_min is not None or self.lambda_max is not None or self.count is not None:
                raise ValueError("give either lambda0_grid or an absolute grid, not both")
            if not grid:
                raise ValueError("lambda0 grid is empty")
            if any(v <= 0 for v in grid):
                raise ValueError("lambda0 values must be positive")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda0 grid must be strictly increasing")
        else:
            if self.lambda_min is None or self.lambda_max is None or self.count is None:
                raise ValueError("absolute grid needs lambda_min, lambda_max and count")
            if self.count < 1 or self.lambda_min <= 0:
                raise ValueError("need count >= 1 and lambda_min > 0")
            if self.count > 1 and self.lambda_max <= self.lambda_min:
                raise ValueError("lambda_max must exceed lambda_min")

    @classmethod
    def log_spaced(cls, lo: float, hi: float, count: int) -> "PathSpec":
        return cls(lambda_min=lo, lambda_max=hi, count=count)

    def lambdas(self, T: int) -> np.ndarray:
        """Absolute penalty values for a series of length ``T``."""
        if self.lambda0_grid is not None:
            return np.asarray(self.lambda0_grid) * math.sqrt(T)
        if self.count == 1:
            return np.array([float(self.lambda_min)])
        return np.geomspace(self.lambda_min, self.lambda_max, self.count)


@dataclass
class PathFailure:
    """Placeholder for a grid point whose fit raised."""

    lam: float
    error: str


def gen_true_model(
    p_star: int,
    q_star: int,
    seed: int = 0,
    root_cap: Optional[float] = None,
    max_draws: int = MAX_DRAWS,
) -> ArmaParams:
    """Random stationary and invertible ARMA(p*, q*) coefficients.

    Every coefficient is uniform on ``[-1, -0.1] U [0.1, 1]``; a component
    is redrawn until its characteristic roots lie strictly inside the unit
    circle.  The AR and MA parts are sampled independently, which gives the
    same distribution as redrawing both whenever either fails.

    Parameters
    ----------
    root_cap : float, optional
        If given, the roots of each component are rescaled radially so the
        largest modulus equals ``root_cap``.
    max_draws : int
        Budget per component.

    Raises
    ------
    SamplingError
        If a component is not accepted within ``max_draws`` draws.
    """
    if p_star < 0 or q_star < 0 or p_star + q_star == 0:
        raise ValueError("need p_star, q_star >= 0, not both zero")
    if root_cap is not None and not 0 < root_cap < 1:
        raise ValueError("root_cap must lie in (0, 1)")
    rng = np.random.default_rng(seed)

    def draw(d: int) -> np.ndarray:
        if d == 0:
            return np.zeros(0)
        for _ in range(max_draws):
            a = rng.uniform(0.1, 1.0, size=d) * rng.choice([-1.0, 1.0], size=d)
            if is_member(a, 0.0):
                if root_cap is not None:
                    a = scale_roots(a, root_cap / max_root_modulus(a))
                return a
        raise SamplingError(f"no stable order-{d} draw within {max_draws} attempts")

    return ArmaParams(draw(p_star), draw(q_star))


def estimation_error(fit_params: ArmaParams, truth: ArmaParams) -> float:
    """``||(phi_hat, theta_hat) - (phi*, theta*)||_2`` after zero-padding to common caps."""
    p = max(fit_params.p_cap, truth.p_cap)
    q = max(fit_params.q_cap, truth.q_cap)
    a = fit_params.padded(p, q).beta
    b = truth.padded(p, q).beta
    return float(np.linalg.norm(a - b))


def lambda_path(
    series,
    path: PathSpec,
    config: FitConfig,
) -> List[Union[FitResult, PathFailure]]:
    """Fit along increasing penalties, warm-starting each fit at the previous one.

    ``config`` supplies caps and solver settings; its ``lam`` is replaced by
    the grid values.  A fit that raises is recorded as :class:`PathFailure`
    and the path continues from the last successful solution.
    """
    y = _values(series)
    out: List[Union[FitResult, PathFailure]] = []
    prev: Optional[FitResult] = None
    for lam in path.lambdas(y.size):
        cfg = FitConfig(**{**config.to_dict(), "lam": float(lam)})
        try:
            res = fit(y, cfg, warm_start=prev)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            logger.warning("fit at lambda=%g failed: %s", lam, exc)
            out.append(PathFailure(float(lam), str(exc)))
            continue
        if prev is not None and (res.order_p > prev.order_p or res.order_q > prev.order_q):
            logger.warning(
                "orders grew from (%d, %d) to (%d, %d) at lambda=%g",
                prev.order_p, prev.order_q, res.order_p, res.order_q, lam,
            )
        out.append(res)
        prev = res
    return out


def bic(result: FitResult, series) -> float:
    """``T_eff * ln(2 * loss / T_eff) + k * ln(T_eff)`` with ``T_eff = T - max(p_cap, q_cap)``."""
    y = _values(series)
    params = result.params
    t_eff = y.size - max(params.p_cap, params.q_cap)
    sse = 2.0 * loss(y, params)
    k = int(np.count_nonzero(params.beta))
    if sse <= 0:
        return -math.inf
    return t_eff * math.log(sse / t_eff) + k * math.log(t_eff)


def select_bic(results: Sequence[Union[FitResult, PathFailure]], series) -> FitResult:
    """Candidate with the smallest BIC; ties go to the larger penalty."""
    best = None
    best_key = None
    for res in results:
        if not isinstance(res, FitResult):
            continue
        key = (bic(res, series), -res.lam)
        if best_key is None or key < best_key:
            best, best_key = res, key
    if best is None:
        raise ValueError("no successful fit to select from")
    return best


def fit_fixed_order(series, p: int, q: int, **kw) -> FitResult:
    """Unpenalized conditional least-squares ARMA(p, q) fit."""
    return fit(series, FitConfig(lam=0.0, p_cap=p, q_cap=q, **kw))


def _extend(truth: ArmaParams, y: np.ndarray, horizon: int, rng) -> np.ndarray:
    """Continue ``y`` for ``horizon`` steps under ``truth`` with fresh innovations."""
    e_past = residuals(y, truth).residuals
    p, q = truth.p_cap, truth.q_cap
    hy = list(y[-p:]) if p else []
    he = list(e_past[-q:]) if q else []
    out = np.empty(horizon)
    e_new = rng.normal(size=horizon)
    for h in range(horizon):
        v = e_new[h]
        for i in range(1, p + 1):
            v += truth.phi[i - 1] * hy[-i]
        for j in range(1, q + 1):
            v -= truth.theta[j - 1] * he[-j]
        out[h] = v
        if p:
            hy.append(v)
        if q:
            he.append(e_new[h])
    return out


def forecast_rmse(
    truth_params: ArmaParams,
    fit_params,
    series,
    horizon: int = 20,
    replicates: int = 1,
    seed: int = 0,
) -> float:
    """Root-mean-square forecast error against simulated true continuations.

    Parameters
    ----------
    truth_params : ArmaParams
        Model used to extend the observed series.
    fit_params : ArmaParams or sequence of ArmaParams
        One model, or one per series.
    series : TimeSeries, array_like, or sequence of them
        Observed history; a list is treated as independent realizations.
    replicates : int
        Number of future paths drawn per series.

    Returns
    -------
    float
        RMSE pooled over horizons, series and future paths.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    if isinstance(series, (TimeSeries, np.ndarray)) or (
        len(series) and np.isscalar(series[0])
    ):
        series = [series]
    if isinstance(fit_params, ArmaParams):
        fit_params = [fit_params] * len(series)
    if len(fit_params) != len(series):
        raise ValueError("need one fitted model per series")
    rng = np.random.default_rng(seed)
    sq = 0.0
    n = 0
    for s, fp in zip(series, fit_params):
        y = _values(s)
        pred = forecast(y, fp, horizon)
        for _ in range(replicates):
            future = _extend(truth_params, y, horizon, rng)
            sq += float(np.sum((future - pred) ** 2))
            n += horizon
    return math.sqrt(sq / n)


# --------------------------------------------------------------------------- #
# benchmark harness


RECORD_FIELDS = (
    "p_star", "q_star", "rep", "lambda0", "lambda", "order_p", "order_q",
    "error", "rmse", "converged", "iterations", "selected", "status",
)


@dataclass
class BenchReport:
    """Flat per-(model, replicate, lambda0) records plus per-cell aggregates.

    Aggregates are a pure function of the records (:meth:`recompute`), so a
    stored report can be checked with ``report.aggregates == report.recompute()``.
    """

    records: List[dict]
    aggregates: List[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = self.recompute()

    def recompute(self) -> List[dict]:
        cells: Dict[tuple, List[dict]] = {}
        for r in self.records:
            cells.setdefault((r["p_star"], r["q_star"], r["lambda0"]), []).append(r)
        out = []
        for (p, q, l0), rs in sorted(cells.items()):
            errs = np.array([r["error"] for r in rs if r["status"] == "ok"])
            rmses = np.array([r["rmse"] for r in rs if r["status"] == "ok"])
            out.append({
                "p_star": p,
                "q_star": q,
                "lambda0": l0,
                "n": len(rs),
                "n_failed": sum(r["status"] != "ok" for r in rs),
                "mean_error": float(np.mean(errs)) if errs.size else None,
                "sd_error": float(np.std(errs, ddof=1)) if errs.size > 1 else None,
                "mean_rmse": float(np.mean(rmses)) if rmses.size else None,
                "n_true_order": sum(
                    r["status"] == "ok" and (r["order_p"], r["order_q"]) == (p, q) for r in rs
                ),
                "n_selected": sum(bool(r["selected"]) for r in rs),
            })
        return out

    def best_lambda0(self) -> Dict[Tuple[int, int], float]:
        """Grid value with the smallest mean error for each model."""
        best: Dict[Tuple[int, int], Tuple[float, float]] = {}
        for a in self.aggregates:
            if a["mean_error"] is None:
                continue
            key = (a["p_star"], a["q_star"])
            if key not in best or a["mean_error"] < best[key][0]:
                best[key] = (a["mean_error"], a["lambda0"])
        return {k: v[1] for k, v in best.items()}

    def to_dict(self) -> dict:
        return {"meta": self.meta, "records": self.records, "aggregates": self.aggregates}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        return cls(records=d["records"], aggregates=d["aggregates"], meta=d.get("meta", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: r[k] for k in RECORD_FIELDS})
        return buf.getvalue()

    def summary(self) -> str:
        """Plain-text table: mean (sd) error for each model and grid value."""
        grid = sorted({a["lambda0"] for a in self.aggregates})
        lines = ["(p*,q*) " + " ".join(f"{'l0=' + format(g, 'g'):>15}" for g in grid)]
        rows: Dict[Tuple[int, int], Dict[float, dict]] = {}
        for a in self.aggregates:
            rows.setdefault((a["p_star"], a["q_star"]), {})[a["lambda0"]] = a
        for (p, q), cells in sorted(rows.items()):
            parts = []
            for g in grid:
                a = cells.get(g)
                if a is None or a["mean_error"] is None:
                    parts.append(f"{'n/a':>15}")
                else:
                    sd = "-" if a["sd_error"] is None else f"{a['sd_error']:.3f}"
                    parts.append(f"{a['mean_error']:.3f} ({sd})".rjust(15))
            lines.append(f"({p},{q})".ljust(8) + " ".join(parts))
        return "\n".join(lines) + "\n"


def _rep_seeds(seed: int, p: int, q: int, rep: int) -> Tuple[int, int]:
    a, b = np.random.SeedSequence([seed, p, q, rep]).generate_state(2)
    return int(a), int(b)


def _run_replicate(task) -> List[dict]:
    (p, q, rep, T, grid, seed, horizon, fit_kw, same_model) = task
    model_seed = _rep_seeds(seed, p, q, 0 if same_model else rep)[0]
    noise_seed = _rep_seeds(seed, p, q, rep)[1]
    truth = gen_true_model(p, q, seed=model_seed)
    full = simulate(truth, T + horizon, seed=noise_seed).values
    y, future = full[:T], full[T:]
    cfg = FitConfig(lam=0.0, **fit_kw)
    path = lambda_path(y, PathSpec(lambda0_grid=tuple(grid)), cfg)
    try:
        chosen = select_bic(path, y)
    except ValueError:
        chosen = None
    recs = []
    for l0, res in zip(grid, path):
        rec = {"p_star": p, "q_star": q, "rep": rep, "lambda0": float(l0),
               "lambda": float(l0 * math.sqrt(T))}
        if isinstance(res, PathFailure):
            rec.update(order_p=None, order_q=None, error=None, rmse=None,
                       converged=False, iterations=0, selected=False, status=res.error)
        else:
            pred = forecast(y, res.params, horizon)
            rec.update(
                order_p=res.order_p,
                order_q=res.order_q,
                error=estimation_error(res.params, truth),
                rmse=float(np.sqrt(np.mean((future - pred) ** 2))),
                converged=res.converged,
                iterations=res.iterations,
                selected=res is chosen,
                status="ok",
            )
        recs.append(rec)
    return recs


def run_table1(
    models: Sequence[Tuple[int, int]],
    n_reps: int,
    T: int = 4000,
    lambda0_grid: Sequence[float] = DEFAULT_LAMBDA0_GRID,
    seed: int = 0,
    p_cap: int = 10,
    q_cap: int = 10,
    horizon: int = 20,
    jobs: int = 1,
    same_model: bool = False,
    **fit_kw,
) -> BenchReport:
    """Simulate, fit along the grid and tabulate estimation errors.

    For each ``(p*, q*)`` in ``models`` and each replicate a fresh model is
    drawn with :func:`gen_true_model` (or one model per row when
    ``same_model``), a series of length ``T`` is simulated together with
    ``horizon`` held-out values, and the path over ``lambda0_grid`` is fitted
    with warm starts.  Every record stores the estimation error, the
    held-out forecast RMSE and whether BIC picked that grid point.

    Seeds for each replicate derive from ``(seed, p*, q*, rep)`` alone, so
    the report does not depend on ``jobs``.
    """
    if n_reps < 1 or T < 2:
        raise ValueError("need n_reps >= 1 and T >= 2")
    grid = sorted(float(v) for v in lambda0_grid)
    PathSpec(lambda0_grid=tuple(grid))  # validation
    tasks = []
    for p, q in models:
        if p > p_cap or q > q_cap:
            raise ValueError(f"model ({p}, {q}) exceeds caps ({p_cap}, {q_cap})")
        for rep in range(n_reps):
            tasks.append((p, q, rep, T, grid, seed, horizon,
                          dict(p_cap=p_cap, q_cap=q_cap, **fit_kw), same_model))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_replicate, tasks))
    else:
        chunks = [_run_replicate(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    meta = {"models": [list(m) for m in models], "n_reps": n_reps, "T": T,
            "lambda0_grid": grid, "seed": seed, "p_cap": p_cap, "q_cap": q_cap,
            "horizon": horizon, "same_model": same_model}
    return BenchReport(records=records, meta=meta)
