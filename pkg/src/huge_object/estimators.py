"""Query-efficient estimation procedures run against a Huge Object oracle.

Each procedure follows its figure step by step. The sample and index-set
sizes default to the closed-form budgets (natural logarithms, exact
rationals inside, ceiling outside) and every one of them can be
overridden, because the defaults are far too large to run at desk scale.

The arithmetic on the gathered bits lives in pure functions
(:func:`index_statistic`, :func:`parameter_statistic`) so it can be tested
without an oracle.
"""

from __future__ import annotations

import decimal
import enum
import math
from collections.abc import Iterable
from dataclasses import dataclass, replace
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .core_dist import Distribution, as_fraction
from .errors import ConfigTooLarge, PreconditionError
from .oracle import HugeObjectOracle
from .typedist import TypeDistribution

GRID_GUARD = 2**20


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EstimatorConfig:
    kappa: object = Fraction(1, 10)
    gamma: object = Fraction(1, 10)
    delta: object = Fraction(1, 5)
    k: int = 1
    sample_size_override: int | None = None
    index_set_override: int | None = None
    repetition_override: int | None = None
    rho: object | None = None
    query_guard: int | None = 10**8

    def __post_init__(self):
        for name in ("kappa", "gamma", "delta"):
            v = as_fraction(getattr(self, name))
            if not 0 < v < 1:
                raise PreconditionError(f"{name} must lie in (0, 1)")
            object.__setattr__(self, name, v)
        if self.rho is not None:
            object.__setattr__(self, "rho", as_fraction(self.rho))
        for name in ("sample_size_override", "index_set_override", "repetition_override"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise PreconditionError(f"{name} must be positive")
        if self.k < 0:
            raise PreconditionError("k must be nonnegative")

    def with_(self, **kw) -> EstimatorConfig:
        return replace(self, **kw)


def _log(x: Fraction) -> float:
    """Natural log of a positive rational, safe for huge numerators."""
    x = Fraction(x)
    return math.log(x.numerator) - math.log(x.denominator)


def _ceil(coef: Fraction, log_arg: Fraction) -> int:
    """``max(1, ceil(coef * ln(log_arg)))`` with enough digits to be exact.

    ``ln`` of a rational other than 1 is irrational, so the product never
    sits on an integer and 40 guard digits settle the ceiling.
    """
    coef, log_arg = Fraction(coef), Fraction(log_arg)
    with decimal.localcontext() as ctx:
        ctx.prec = len(str(coef.numerator)) + len(str(log_arg.numerator)) + 40
        ln = Decimal(log_arg.numerator).ln() - Decimal(log_arg.denominator).ln()
        return max(1, math.ceil(Decimal(coef.numerator) * ln / Decimal(coef.denominator)))


# --------------------------------------------------------------------------
# budgets


def estimate_index_sizes(u_size: int, kappa, gamma) -> tuple[int, int]:
    """``(|S|, |I|)`` from the Estimate-Index budget."""
    kappa, gamma = as_fraction(kappa), as_fraction(gamma)
    r = 2**u_size
    s = _ceil(1000 * Fraction(r * r) / kappa**3, Fraction(r) / (kappa * gamma))
    i = _ceil(100 / kappa**2, Fraction(r) / gamma)
    return s, i


def default_rho(kappa) -> Fraction:
    return Fraction(1, 4 * math.ceil(1 / as_fraction(kappa)))


def grid_size(u_size: int, rho) -> int:
    """``|R| = (10/rho + 1)^(2^|U|)``."""
    g = 10 / as_fraction(rho)
    if g.denominator != 1:
        raise PreconditionError("10/rho must be an integer")
    return (int(g) + 1) ** (2**u_size)


def estimate_parameters_sizes(u_size: int, kappa, gamma, rho=None) -> tuple[int, int, int]:
    """``(|S|, |I|, |R|)`` from the Estimate-Parameters budget."""
    kappa, gamma = as_fraction(kappa), as_fraction(gamma)
    rho = default_rho(kappa) if rho is None else as_fraction(rho)
    r = 2**u_size
    s = _ceil(50 * Fraction(r * r) / rho**3, Fraction(r) / (rho * gamma))
    big_r = grid_size(u_size, rho)
    i = _ceil(20 * Fraction(big_r) ** 2 / rho**2, Fraction(big_r) / gamma)
    return s, i, big_r


def estimate_index_budget(u_size: int, kappa, gamma) -> dict:
    s, i = estimate_index_sizes(u_size, kappa, gamma)
    return {"S": s, "I": i, "U": u_size, "queries": s * (i + u_size)}


def estimate_parameters_budget(u_size: int, kappa, gamma, rho=None) -> dict:
    s, i, big_r = estimate_parameters_sizes(u_size, kappa, gamma, rho)
    return {"S": s, "I": i, "R": big_r, "U": u_size, "queries": s * (i + u_size)}


# --------------------------------------------------------------------------
# shared sampling step


def _sorted_u(u: Iterable[int], n: int) -> list[int]:
    u = sorted(set(int(i) for i in u))
    if any(not 0 <= i < n for i in u):
        raise PreconditionError(f"U must be a subset of [0, {n})")
    return u


def draw_index_set(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``size``-subset of ``[n]`` without replacement (all of ``[n]`` if larger)."""
    return rng.permutation(n)[: min(size, n)]


def _gather(o: HugeObjectOracle, u: list[int], s_size: int, i_size: int, cfg: EstimatorConfig, rng):
    planned = s_size * (min(i_size, o.n) + len(u))
    if cfg.query_guard is not None and planned > cfg.query_guard:
        raise ConfigTooLarge(f"{planned} planned queries exceed the guard {cfg.query_guard}")
    handles = o.draw_samples(s_size)
    xu = o.query_many(handles, u)
    idx = draw_index_set(o.n, i_size, rng)
    xi = o.query_many(handles, idx)
    return xu, xi, idx


def _codes(xu: np.ndarray) -> np.ndarray:
    width = xu.shape[1]
    if width == 0:
        return np.zeros(xu.shape[0], dtype=np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return xu.astype(np.int64) @ weights


# --------------------------------------------------------------------------
# Estimate-Index


def index_statistic(xu: np.ndarray, xi: np.ndarray) -> float:
    """Figure arithmetic: ``sum_v eta(v) * mean_i t_{i,v}^2`` from the gathered bits.

    ``xu`` holds the samples restricted to ``U`` (one row per sample), ``xi``
    the same samples restricted to the index set.
    """
    m = xu.shape[0]
    if m == 0 or xi.shape[1] == 0:
        return 0.0
    codes = _codes(xu)
    _, inv, counts = np.unique(codes, return_inverse=True, return_counts=True)
    ones = np.zeros((len(counts), xi.shape[1]))
    np.add.at(ones, inv, xi.astype(float))
    t = ones / counts[:, None]
    t_v = (t**2).mean(axis=1)
    eta = counts / m
    return float((eta * t_v).sum())


def estimate_index(o: HugeObjectOracle, u: Iterable[int], cfg: EstimatorConfig, rng: np.random.Generator,
                   kappa=None, gamma=None) -> float:
    """Estimate ``Ind(mu^U)``; spends exactly ``|S| * (|I| + |U|)`` queries."""
    u = _sorted_u(u, o.n)
    kappa = cfg.kappa if kappa is None else kappa
    gamma = cfg.gamma if gamma is None else gamma
    s_size, i_size = estimate_index_sizes(len(u), kappa, gamma)
    s_size = cfg.sample_size_override or s_size
    i_size = cfg.index_set_override or i_size
    xu, xi, _ = _gather(o, u, s_size, i_size, cfg, rng)
    return index_statistic(xu, xi)


# --------------------------------------------------------------------------
# weak robustness


def sample_small_subset(pool: list[int], k: int, rng: np.random.Generator) -> frozenset:
    """Uniform member of ``{U' subset of pool : |U'| <= k}``, the empty set included."""
    m = len(pool)
    sizes = np.array([math.comb(m, j) for j in range(min(k, m) + 1)], dtype=float)
    j = int(rng.choice(len(sizes), p=sizes / sizes.sum()))
    if j == 0:
        return frozenset()
    return frozenset(int(x) for x in rng.choice(pool, size=j, replace=False))


def robustness_repetitions(delta, gamma) -> int:
    return _ceil(1 / as_fraction(delta), 3 / as_fraction(gamma))


def test_weakly_robust_detailing(o: HugeObjectOracle, u: Iterable[int], delta, k: int, gamma,
                                 cfg: EstimatorConfig, rng: np.random.Generator):
    """Return ``Verdict.ACCEPT`` or a witness set ``U'`` disjoint from ``U``."""
    u = _sorted_u(u, o.n)
    delta, gamma = as_fraction(delta), as_fraction(gamma)
    base = estimate_index(o, u, cfg, rng, kappa=delta / 10, gamma=gamma / 3)
    pool = [i for i in range(o.n) if i not in set(u)]
    r = cfg.repetition_override or robustness_repetitions(delta, gamma)
    candidates = [sample_small_subset(pool, k, rng) for _ in range(r)]
    for cand in candidates:
        est = estimate_index(o, sorted(set(u) | cand), cfg, rng, kappa=delta / 10, gamma=gamma / (3 * r))
        if est - base > 7 * float(delta) / 10:
            return cand
    return Verdict.ACCEPT


test_weakly_robust_detailing.__test__ = False


def find_weakly_robust_detailing(o: HugeObjectOracle, delta, k: int, gamma, cfg: EstimatorConfig,
                                 rng: np.random.Generator) -> frozenset | None:
    """Grow ``U`` from witnesses until the robustness test accepts; ``None`` means Fail."""
    delta, gamma = as_fraction(delta), as_fraction(gamma)
    u: frozenset = frozenset()
    rounds = math.ceil(10 / (4 * delta))
    for _ in range(rounds):
        z = test_weakly_robust_detailing(o, u, delta, k, 2 * gamma * delta / 10, cfg, rng)
        if z is Verdict.ACCEPT:
            return u
        u = u | z
    return None


# --------------------------------------------------------------------------
# Estimate-Parameters


def round_to_grid(ones: np.ndarray, counts: np.ndarray, g: int) -> np.ndarray:
    """Nearest multiple of ``1/g`` to ``ones[v] / counts[v]`` as an integer numerator.

    Exact integer arithmetic, ties go up, empty groups read 0.
    """
    c = counts.astype(np.int64)[:, None]
    safe = np.where(c > 0, c, 1)
    return np.where(c > 0, (2 * ones.astype(np.int64) * g + safe) // (2 * safe), 0)


def parameter_statistic(xu: np.ndarray, xi: np.ndarray, rho) -> tuple[Distribution, TypeDistribution]:
    """Figure arithmetic: ``(eta, Lambda)`` estimates from the gathered bits."""
    width = xu.shape[1]
    m = xu.shape[0]
    g = 10 / as_fraction(rho)
    if g.denominator != 1:
        raise PreconditionError("10/rho must be an integer")
    g = int(g)
    labels = [(format(v, f"0{width}b") if width else "",) for v in range(2**width)]
    codes = _codes(xu)
    counts = np.bincount(codes, minlength=2**width)
    eta = Distribution(((labels[v], Fraction(int(c), m)) for v, c in enumerate(counts) if c))
    ones = np.zeros((2**width, xi.shape[1]), dtype=np.int64)
    np.add.at(ones, codes, xi.astype(np.int64))
    grid = round_to_grid(ones, counts, g)
    size = xi.shape[1]
    vectors = [tuple(Fraction(int(grid[v, c]), g) for v in range(2**width)) for c in range(size)]
    lam = TypeDistribution(tuple(labels), Distribution((t, Fraction(1, size)) for t in vectors))
    return eta, lam


def estimate_parameters(o: HugeObjectOracle, u: Iterable[int], cfg: EstimatorConfig, rng: np.random.Generator,
                        kappa=None, gamma=None) -> tuple[Distribution, TypeDistribution]:
    """Estimate the weight and type distributions of ``mu^U``."""
    u = _sorted_u(u, o.n)
    kappa = cfg.kappa if kappa is None else as_fraction(kappa)
    gamma = cfg.gamma if gamma is None else as_fraction(gamma)
    rho = cfg.rho if cfg.rho is not None else default_rho(kappa)
    big_r = grid_size(len(u), rho)
    if big_r > GRID_GUARD and cfg.index_set_override is None:
        raise ConfigTooLarge(f"grid of {big_r} type vectors exceeds {GRID_GUARD}")
    s_size, i_size, _ = estimate_parameters_sizes(len(u), kappa, gamma, rho)
    s_size = cfg.sample_size_override or s_size
    i_size = cfg.index_set_override or i_size
    xu, xi, _ = _gather(o, u, s_size, i_size, cfg, rng)
    return parameter_statistic(xu, xi, rho)
