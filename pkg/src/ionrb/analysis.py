"""Decay fitting and sensitivity-coefficient extraction.

The benchmark model for mean fidelity after ``l`` computational gates is::

    F(l) = 1/2 + 1/2 (1 - d_if) (1 - 2 E_g)^l

with ``E_g`` the error per gate and ``d_if`` the lumped initialization and
measurement error.  Fits use per-length means weighted by the inverse
variance of each mean, a log-linear initializer, and a damped Gauss-Newton
refinement with central-difference derivatives.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class FitError(RuntimeError):
    """A fit could not be performed or did not converge."""


# ---------------------------------------------------------------------------
# solver core


@dataclass
class LeastSquaresResult:
    params: np.ndarray
    jacobian: np.ndarray
    residuals: np.ndarray
    n_iter: int

    @property
    def cost(self) -> float:
        return float(self.residuals @ self.residuals)

    def covariance(self, scale: bool = False) -> np.ndarray:
        jtj = self.jacobian.T @ self.jacobian
        try:
            cov = np.linalg.inv(jtj)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(jtj)
        if scale:
            dof = max(len(self.residuals) - len(self.params), 1)
            cov = cov * self.cost / dof
        return cov


def numeric_jacobian(fn: Callable, p: np.ndarray, rel_step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``p``; step ``rel_step * max(|p|, 1)``."""
    p = np.asarray(p, dtype=float)
    f0 = np.asarray(fn(p))
    jac = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1.0)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (np.asarray(fn(up)) - np.asarray(fn(dn))) / (2 * h)
    return jac


def least_squares(
    residual_fn: Callable,
    p0,
    lower=None,
    upper=None,
    max_iter: int = 200,
    step_tol: float = 1e-10,
) -> LeastSquaresResult:
    """Minimize ``sum(residual_fn(p)**2)`` by damped Gauss-Newton.

    Parameters resting on a bound are held there while the gradient pushes
    outward; other steps are clipped to ``[lower, upper]``.  Converged when a
    step moves every parameter by less than ``step_tol``.
    """
    p = np.asarray(p0, dtype=float).copy()
    lo = np.full(p.shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(p.shape, np.inf) if upper is None else np.asarray(upper, dtype=float)
    p = np.clip(p, lo, hi)
    r = np.asarray(residual_fn(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the initial point")
    cost = r @ r
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jac = numeric_jacobian(residual_fn, p)
        jtj = jac.T @ jac
        g = jac.T @ r
        # parameters pinned at a bound with the descent direction pointing outward stay fixed
        free = ~(((p <= lo) & (g > 0)) | ((p >= hi) & (g < 0)))
        step = np.zeros_like(p)
        if free.any():
            a = jtj[np.ix_(free, free)]
            a = a + lam * np.diag(np.diag(a)) + 1e-300 * np.eye(free.sum())
            try:
                step[free] = np.linalg.solve(a, -g[free])
            except np.linalg.LinAlgError:
                step[free] = -np.linalg.pinv(a) @ g[free]
        trial = np.clip(p + step, lo, hi)
        taken = trial - p
        if np.max(np.abs(taken), initial=0.0) < step_tol:
            return LeastSquaresResult(p, jac, r, it)
        r_new = np.asarray(residual_fn(trial), dtype=float)
        cost_new = r_new @ r_new if np.all(np.isfinite(r_new)) else np.inf
        if cost_new <= cost:
            p, r, cost = trial, r_new, cost_new
            lam = max(lam / 10, 1e-12)
        else:
            lam *= 10
            if lam > 1e16:
                # no descent direction left; we are at a (bounded) minimum
                return LeastSquaresResult(p, jac, r, it)
    raise FitError(f"no convergence after {max_iter} iterations")


# ---------------------------------------------------------------------------
# benchmark decay


@dataclass(frozen=True)
class FidelityRecord:
    length: int
    sequence_index: int
    success_fraction: float
    expected_outcome: str  # "bright" | "dark"
    reps: int = 100

    def __post_init__(self):
        if not 0.0 <= self.success_fraction <= 1.0:
            raise ValueError("success_fraction must lie in [0, 1]")
        if self.expected_outcome not in ("bright", "dark"):
            raise ValueError(f"expected_outcome must be 'bright' or 'dark', got {self.expected_outcome!r}")


def decay_model(lengths, epg, dif):
    lengths = np.asarray(lengths, dtype=float)
    return 0.5 + 0.5 * (1.0 - dif) * (1.0 - 2.0 * epg) ** lengths


def decay_jacobian(lengths, epg, dif) -> np.ndarray:
    """Analytic derivatives of :func:`decay_model` w.r.t. ``(epg, dif)``."""
    lengths = np.asarray(lengths, dtype=float)
    base = 1.0 - 2.0 * epg
    d_epg = -(1.0 - dif) * lengths * base ** (lengths - 1)
    d_dif = -0.5 * base**lengths
    return np.column_stack([d_epg, d_dif])


@dataclass
class FitResult:
    epg: float
    dif: float
    covariance: np.ndarray
    lengths: np.ndarray
    mean_fidelity: np.ndarray
    sem: np.ndarray
    residuals: np.ndarray
    chi2: float
    dof: int
    n_iter: int
    bootstrap_se_epg: float = math.nan
    bootstrap_skipped: int = 0

    @property
    def epg_se(self) -> float:
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def dif_se(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))

    def to_json(self) -> dict:
        return {
            "epg_prob": self.epg,
            "dif_prob": self.dif,
            "epg_se_prob": self.epg_se,
            "dif_se_prob": self.dif_se,
            "covariance_prob2": self.covariance.tolist(),
            "bootstrap_se_epg_prob": None if math.isnan(self.bootstrap_se_epg) else self.bootstrap_se_epg,
            "bootstrap_skipped": self.bootstrap_skipped,
            "lengths_gates": [int(x) for x in self.lengths],
            "mean_fidelity": self.mean_fidelity.tolist(),
            "sem_fidelity": self.sem.tolist(),
            "residuals_fidelity": self.residuals.tolist(),
            "chi2": self.chi2,
            "dof": self.dof,
            "iterations": self.n_iter,
        }


def _group(records: Sequence[FidelityRecord]) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    by_len: dict[int, list[float]] = defaultdict(list)
    reps: dict[int, int] = {}
    for rec in records:
        by_len[rec.length].append(rec.success_fraction)
        reps[rec.length] = rec.reps
    lengths = np.array(sorted(by_len))
    return lengths, [np.asarray(by_len[l]) for l in lengths], np.array([reps[l] for l in lengths])


def _mean_and_var(values: np.ndarray, reps: int) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    total = n * reps
    # binomial floor with a half-count prior keeps all-0 or all-1 lengths finite
    p = (mean * total + 0.5) / (total + 1)
    var = p * (1 - p) / total
    if n > 1:
        var = max(var, float(values.var(ddof=1)) / n)
    return mean, var


def _initial_guess(lengths, means) -> np.ndarray:
    ok = means > 0.52
    if ok.sum() >= 2:
        y = np.log(2 * means[ok] - 1)
        slope, intercept = np.polyfit(lengths[ok], y, 1)
        epg0 = (1 - np.exp(min(slope, 0.0))) / 2
        dif0 = 1 - np.exp(min(intercept, 0.0))
    else:
        epg0 = 1e-3
        dif0 = max(0.0, 1 - (2 * means[0] - 1))
    return np.array([np.clip(epg0, 0, 0.5), np.clip(dif0, 0, 1)])


def fit_means(lengths, means, variances) -> FitResult:
    lengths = np.asarray(lengths, dtype=float)
    means = np.asarray(means, dtype=float)
    sem = np.sqrt(np.asarray(variances, dtype=float))
    if len(lengths) < 3:
        raise FitError(f"need at least 3 distinct lengths, got {len(lengths)}")
    if np.all(means <= 0.5):
        raise FitError("mean fidelity <= 1/2 at every length: signal lost")
    if means[np.argmin(lengths)] <= 0.5:
        raise FitError("mean fidelity at the shortest length must exceed 1/2")

    def resid(p):
        return (decay_model(lengths, p[0], p[1]) - means) / sem

    sol = least_squares(resid, _initial_guess(lengths, means), lower=[0.0, 0.0], upper=[0.5, 1.0])
    epg, dif = sol.params
    return FitResult(
        epg=float(epg),
        dif=float(dif),
        covariance=sol.covariance(),
        lengths=lengths.astype(int),
        mean_fidelity=means,
        sem=sem,
        residuals=means - decay_model(lengths, epg, dif),
        chi2=sol.cost,
        dof=len(lengths) - 2,
        n_iter=sol.n_iter,
    )


def fit_decay(records: Sequence[FidelityRecord]) -> FitResult:
    lengths, groups, reps = _group(records)
    if len(lengths) < 3:
        raise FitError(f"need at least 3 distinct lengths, got {len(lengths)}")
    stats = [_mean_and_var(v, r) for v, r in zip(groups, reps)]
    return fit_means(lengths, [m for m, _ in stats], [v for _, v in stats])


@dataclass(frozen=True)
class Bootstrap:
    se: float
    samples: np.ndarray
    skipped: int


def bootstrap_uncertainty(records: Sequence[FidelityRecord], n_resamples: int = 1000, rng=None) -> Bootstrap:
    """Standard error of E_g from resampling sequences within each length."""
    rng = np.random.default_rng(rng)
    lengths, groups, reps = _group(records)
    if any(len(g) < 2 for g in groups):
        raise FitError("bootstrap needs at least 2 sequences per length")
    samples, skipped = [], 0
    for _ in range(n_resamples):
        stats = [_mean_and_var(g[rng.integers(len(g), size=len(g))], r) for g, r in zip(groups, reps)]
        try:
            fit = fit_means(lengths, [m for m, _ in stats], [v for _, v in stats])
        except FitError:
            skipped += 1
            continue
        samples.append(fit.epg)
    samples = np.asarray(samples)
    se = float(samples.std(ddof=1)) if len(samples) > 1 else math.nan
    return Bootstrap(se, samples, skipped)


def fit_with_bootstrap(records, n_resamples: int = 1000, rng=None) -> FitResult:
    fit = fit_decay(records)
    if n_resamples:
        boot = bootstrap_uncertainty(records, n_resamples, rng)
        fit.bootstrap_se_epg = boot.se
        fit.bootstrap_skipped = boot.skipped
    return fit


def split_fit_by_target(records: Sequence[FidelityRecord]) -> tuple[FitResult, FitResult]:
    """Independent fits of bright-ending and dark-ending sequences.

    Leakage out of the qubit looks dark at detection, so it lowers the
    fidelity only of sequences expected to end bright.
    """
    bright = [r for r in records if r.expected_outcome == "bright"]
    dark = [r for r in records if r.expected_outcome == "dark"]
    return fit_decay(bright), fit_decay(dark)


# ---------------------------------------------------------------------------
# exponential decay toward 1/2


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    t2_s: float
    t2_se_s: float
    no_decay: bool


def fit_exponential(x, y, baseline: float = 0.5) -> ExponentialFit:
    """Fit ``y = baseline + a * exp(-x / T2)`` (unweighted)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise FitError("need at least 3 points")
    span = float(np.ptp(x)) or 1.0
    # rate is fitted in units of 1/span so both parameters are O(1)
    sig = y - baseline
    ok = sig > 1e-3
    if ok.sum() >= 2:
        slope, intercept = np.polyfit(x[ok] / span, np.log(sig[ok]), 1)
        p0 = np.array([np.exp(intercept), max(-slope, 0.0)])
    else:
        p0 = np.array([max(sig.max(), 1e-3), 1.0])

    def resid(p):
        return baseline + p[0] * np.exp(-p[1] * x / span) - y

    sol = least_squares(resid, p0, lower=[-np.inf, 0.0])
    amp, rate = sol.params
    if rate <= 1e-9:
        return ExponentialFit(float(amp), math.inf, math.inf, True)
    cov = sol.covariance(scale=True)
    t2 = span / rate
    t2_se = span * float(np.sqrt(max(cov[1, 1], 0.0))) / rate**2
    return ExponentialFit(float(amp), float(t2), t2_se, False)


# ---------------------------------------------------------------------------
# sensitivity coefficients


@dataclass
class SweepResult:
    coefficient: float
    x: np.ndarray
    epg: np.ndarray
    power: int = 2
    x_unit: str = "hz"
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    r_squared: float = math.nan
    flags: list = field(default_factory=list)

    @property
    def coefficient_unit(self) -> str:
        if self.power == 1 and self.x_unit.startswith("per_"):
            return self.x_unit[4:]  # E per (1/unit) carries the unit itself
        return f"per_{self.x_unit}{self.power if self.power != 1 else ''}"

    def predict(self, x) -> np.ndarray:
        return self.coefficient * np.asarray(x, dtype=float) ** self.power

    def to_json(self) -> dict:
        return {
            f"coefficient_{self.coefficient_unit}": self.coefficient,
            "power": self.power,
            "points": [{f"x_{self.x_unit}": float(a), "epg_prob": float(b)} for a, b in zip(self.x, self.epg)],
            "residuals_prob": self.residuals.tolist(),
            "r_squared_uncentered": self.r_squared,
            "flags": list(self.flags),
        }


def extract_power_coefficient(points, power: int, x_unit: str = "hz") -> SweepResult:
    """Least squares of ``E_g = c * x**power`` through the origin."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise FitError("need at least 3 (x, E_g) points")
    x, e = pts[:, 0], pts[:, 1]
    basis = x**power
    denom = basis @ basis
    if denom == 0:
        raise FitError("all x values are zero")
    coef = float(basis @ e / denom)
    resid = e - coef * basis
    ss = float(e @ e)
    r2 = 1 - float(resid @ resid) / ss if ss > 0 else math.nan
    flags = ["negative_coefficient"] if coef < 0 else []
    return SweepResult(coef, x, e, power, x_unit, resid, r2, flags)


def extract_quadratic_coefficient(points, x_unit: str = "hz") -> SweepResult:
    return extract_power_coefficient(points, 2, x_unit)
