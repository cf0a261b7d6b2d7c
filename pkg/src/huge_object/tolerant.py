"""Tolerant testing and distance estimation for index-invariant properties.

The tester finds a weakly robust detailing by variables, estimates its
statistics, and then searches for a small quantized "target" (a detailing
``eta'`` of the weights over an extra set ``B`` together with a grid type
distribution ``Upsilon``) that the canonical tester would accept and whose
types are close to the estimated ones. The search space is finite but
doubly exponential with the theoretical constants, so :class:`TolerantConfig`
exposes every size as an explicit knob; :meth:`TolerantConfig.paper` records
the theoretical values as formulas.

:func:`change_types` is the coupling used in the soundness argument. It is
not part of the tester, but it is exercised by the tests as a library
routine.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .core_dist import Distribution, as_fraction, bit_length, coordinate_marginals
from .detailing import Detailing, flat_refinement_by_weights, implementation
from .emd import emd_weighted_types
from .errors import EnumerationTooLarge, PreconditionError, TooLarge
from .estimators import EstimatorConfig, Verdict, estimate_parameters, find_weakly_robust_detailing
from .oracle import CanonicalTester, HugeObjectOracle, rows_constant, rows_equal
from .predictor import acceptance_tensor, contract
from .typedist import TransferImplementation, TypeDistribution, flat_label

CANDIDATE_GUARD = 10**7
CHANGE_GUARD = 10**6
CHUNK = 4096


# --------------------------------------------------------------------------
# Change-types


def _flip_probs(h1: Sequence, h2: Sequence, pos: Mapping, label) -> list:
    """Per coordinate ``(Pr[y=0 | x=1], Pr[y=1 | x=0])`` for one label."""
    out = []
    for t1, t2 in zip(h1, h2):
        a, b = t1[pos[label]], t2[pos[label]]
        down = max(0, (a - b) / a) if a else 0
        up = max(0, (b - a) / (1 - a)) if a != 1 else 0
        out.append((down, up))
    return out


def _prepare(x: Detailing, eta: Distribution, h2: TransferImplementation):
    """Flat refinement plus the checked transfer implementation."""
    refined = flat_refinement_by_weights(x, eta)
    h2.check_extends(implementation(refined))
    pos = {a: j for j, a in enumerate(h2.labels)}
    src = [p[0] for p in h2.pairs]
    dst = [p[1] for p in h2.pairs]
    return refined, pos, src, dst


def change_types(x: Detailing, eta: Distribution, h2: TransferImplementation, rng: np.random.Generator,
                 size: int = 1) -> list[tuple]:
    """Draw ``size`` triples ``(x, y, label)`` from the coupling.

    ``eta`` is a distribution over pairs ``(a, b)`` extending the weights of
    ``x``; the returned labels are the flat labels ``a + (b,)``.
    """
    refined, pos, src, dst = _prepare(x, eta, h2)
    cache: dict = {}
    out = []
    for xs, lab in refined.joint.sample(rng, size):
        if lab not in cache:
            cache[lab] = np.array([[float(d), float(u)] for d, u in _flip_probs(src, dst, pos, lab)])
        probs = cache[lab]
        bits = np.frombuffer(xs.encode(), dtype=np.uint8) - ord("0")
        r = rng.random(len(bits))
        flip = np.where(bits == 1, r < probs[:, 0], r < probs[:, 1])
        y = "".join(str(int(b ^ f)) for b, f in zip(bits, flip))
        out.append((xs, y, lab))
    return out


def change_types_exact(x: Detailing, eta: Distribution, h2: TransferImplementation,
                       guard: int = CHANGE_GUARD) -> Distribution:
    """The full law of :func:`change_types` over triples ``(x, y, label)``."""
    refined, pos, src, dst = _prepare(x, eta, h2)
    probs = {lab: _flip_probs(src, dst, pos, lab) for lab in refined.labels}
    work = 0
    out: dict = {}
    for (xs, lab), w in refined.joint.items():
        p = probs[lab]
        free = []
        for i, ch in enumerate(xs):
            f = p[i][0] if ch == "1" else p[i][1]
            if f:
                free.append((i, f))
        work += 2 ** len(free)
        if work > guard:
            raise TooLarge(f"joint law needs more than {guard} terms")
        base = list(xs)
        for pattern in itertools.product((0, 1), repeat=len(free)):
            y = base[:]
            pr = w
            for (i, f), flip in zip(free, pattern):
                if flip:
                    y[i] = "1" if xs[i] == "0" else "0"
                    pr = pr * f
                else:
                    pr = pr * (1 - f)
            if pr:
                key = (xs, "".join(y), lab)
                out[key] = out.get(key, 0) + pr
    return Distribution(out, check=refined.joint.exact)


def source_detailing(xi: Distribution) -> Detailing:
    """``Xi`` restricted to ``(x, label)``."""
    return Detailing(xi.map(lambda e: (e[0], e[2])))


def target_detailing(xi: Distribution) -> Detailing:
    """``Xi`` restricted to ``(y, label)``."""
    return Detailing(xi.map(lambda e: (e[1], e[2])))


def transfer_cost_bound(h2: TransferImplementation, eta_flat: Mapping):
    """``mean_i E_{(a,b)~eta} |h2 - h1|``, the bound on the moved mass."""
    pos = {a: j for j, a in enumerate(h2.labels)}
    total = 0
    for t1, t2 in h2.pairs:
        total += sum(w * abs(t2[pos[a]] - t1[pos[a]]) for a, w in eta_flat.items() if w)
    return total / h2.n


# --------------------------------------------------------------------------
# properties


@dataclass(frozen=True)
class PropertySpec:
    """An index-invariant property with exact desk-scale oracles.

    ``tester`` maps a proximity parameter to a canonical tester.
    """

    name: str
    member: Callable[[Distribution], bool]
    distance: Callable[[Distribution], object]
    tester: Callable[[object], CanonicalTester]


def _point_mass_distance(mu: Distribution):
    ps = coordinate_marginals(mu)
    return sum(min(p, 1 - p) for p in ps) / len(ps)


def _constant_support_distance(mu: Distribution):
    n = bit_length(mu)
    return sum(w * min(x.count("1"), n - x.count("1")) for x, w in mu.items()) / n


def point_mass_property(s: int = 4, q: int = 2) -> PropertySpec:
    """Point masses; the closest point mass takes the majority bit per coordinate."""
    return PropertySpec(
        "point-mass",
        lambda mu: len(mu) == 1,
        _point_mass_distance,
        lambda eps: rows_equal(s, q, eps),
    )


def constant_support_property(s: int = 2, q: int = 2) -> PropertySpec:
    """Distributions supported on the two constant strings."""
    return PropertySpec(
        "constant-support",
        lambda mu: all(len(set(x)) == 1 for x in mu),
        _constant_support_distance,
        lambda eps: rows_constant(s, q, eps),
    )


BUILTIN_PROPERTIES = {"point-mass": point_mass_property, "constant-support": constant_support_property}


def permute(mu: Distribution, perm: Sequence[int]) -> Distribution:
    """``mu_pi``: coordinate ``i`` of the image is coordinate ``perm[i]`` of the preimage."""
    return mu.map(lambda x: "".join(x[j] for j in perm))


def check_index_invariance(prop: PropertySpec, mu: Distribution, rng: np.random.Generator, perms: int = 20) -> bool:
    want = prop.member(mu)
    n = bit_length(mu)
    return all(prop.member(permute(mu, rng.permutation(n))) == want for _ in range(perms))


# --------------------------------------------------------------------------
# configuration


def _frac_or_none(x):
    return None if x is None else as_fraction(x)


@dataclass(frozen=True)
class TolerantConfig:
    """Knobs of the tolerant tester, named after the symbols they stand for.

    ``eta_den`` and ``upsilon_den`` are the reciprocals of the two
    quantization steps. ``None`` means the theoretical value for the
    current ``|U|`` and ``|B|``; both blow up quickly.
    """

    delta: Fraction = Fraction(1, 5)
    k_prime: int = 1
    rho: Fraction = Fraction(1, 2)
    b_max: int = 1
    eta_den: int | None = None
    upsilon_den: int | None = 4
    gamma: Fraction = Fraction(1, 6)
    ep_kappa: Fraction | None = None
    estimator: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(
        sample_size_override=400, index_set_override=64))
    max_candidates: int = CANDIDATE_GUARD
    amplification: int | None = 9
    gate_tol: float = 1e-12

    def __post_init__(self):
        for name in ("delta", "rho", "gamma"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        object.__setattr__(self, "ep_kappa", _frac_or_none(self.ep_kappa))
        if (1 / self.rho).denominator != 1:
            raise PreconditionError("1/rho must be an integer")
        if self.amplification is not None and self.amplification % 2 == 0:
            raise PreconditionError("amplification must be odd")

    def with_(self, **kw) -> TolerantConfig:
        return replace(self, **kw)

    def eta_denominator(self, u_size: int, b_size: int) -> int:
        if self.eta_den is not None:
            return self.eta_den
        return math.ceil(Fraction(2**u_size * b_size) / (2 * self.rho))

    def upsilon_denominator(self, coords: int) -> int:
        if self.upsilon_den is not None:
            return self.upsilon_den
        r = int(1 / self.rho)
        return math.ceil((r + 1) ** coords / self.rho)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in list(d.items()):
            if isinstance(v, Fraction):
                d[k] = str(v)
        d["estimator"] = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in asdict(self.estimator).items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> TolerantConfig:
        d = dict(d)
        if "estimator" in d and isinstance(d["estimator"], Mapping):
            d["estimator"] = EstimatorConfig(**d["estimator"])
        return cls(**d)

    @staticmethod
    def paper(eps1, eps2, s: int, q: int) -> dict:
        """Theoretical constants; ``k_prime`` and the ``B`` bound as log2 values."""
        gap = as_fraction(eps2) - as_fraction(eps1)
        delta = gap**2 / (10**5 * q**3 * (s + 1) ** 6)
        k = q - 1
        rho = Fraction(1, math.ceil(36 * s * q / gap))
        return {
            "delta": delta,
            "k": k,
            "log2_k_prime": 8 * k / delta + 38 * math.log2(1 / delta),
            "rho": rho,
            "log2_b_max": k / delta,
            "gamma": Fraction(1, 6),
        }


DESK = TolerantConfig()


# --------------------------------------------------------------------------
# candidate enumeration


def compositions(total: int, parts: int) -> Iterator[tuple]:
    """Count vectors of length ``parts`` summing to ``total``, lexicographically ascending."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def _composition_chunks(total: int, parts: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    it = compositions(total, parts)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64).reshape(len(block), parts)


def weight_detailings(eta: Distribution, b_size: int, den: int) -> Iterator[Distribution]:
    """Every detailing of ``eta`` over ``B = {0..b_size-1}`` whose conditionals are ``1/den``-quantized.

    Labels are the flat labels ``a + (b,)``; zero entries are dropped.
    """
    labels = [a for a in eta if eta[a]]
    per_label = [list(compositions(den, b_size)) for _ in labels]
    for choice in itertools.product(*per_label):
        items = {}
        for a, counts in zip(labels, choice):
            for b, c in enumerate(counts):
                if c:
                    items[flat_label(a, b)] = eta[a] * Fraction(c, den)
        yield Distribution(items, check=eta.exact)


def _grid(coords: int, r: int) -> list[tuple]:
    return [tuple(Fraction(v, r) for v in vec) for vec in itertools.product(range(r + 1), repeat=coords)]


def candidate_count(eta: Distribution, cfg: TolerantConfig, u_size: int) -> int:
    r = int(1 / cfg.rho)
    live = sum(1 for a in eta if eta[a])
    total = 0
    for b in range(1, cfg.b_max + 1):
        den = cfg.eta_denominator(u_size, b)
        for eta_b in weight_detailings(eta, b, den):
            k = (r + 1) ** len(eta_b)
            n = cfg.upsilon_denominator(live * b)
            total += math.comb(n + k - 1, k - 1)
            if total > cfg.max_candidates:
                return total
    return total


@dataclass(frozen=True)
class SearchResult:
    verdict: Verdict
    checked: int
    b_size: int | None = None
    eta: Distribution | None = None
    upsilon: TypeDistribution | None = None
    accept_probability: float | None = None
    distance: object = None

    def to_json(self) -> dict:
        out = {"verdict": str(self.verdict), "candidates_checked": self.checked}
        if self.verdict is Verdict.ACCEPT:
            out["B"] = self.b_size
            out["accept_probability"] = self.accept_probability
            out["distance"] = float(self.distance)
        return out


def tolerant_search(eta: Distribution, lam: TypeDistribution, tester: CanonicalTester, eps1, eps2,
                    cfg: TolerantConfig = DESK, u_size: int | None = None) -> SearchResult:
    """The deterministic search step, given the estimated statistics.

    Candidates are visited with ``|B|`` ascending, then weight detailings,
    then grid type distributions in count-vector lexicographic order; the
    first candidate passing both gates wins.
    """
    eps1, eps2 = as_fraction(eps1), as_fraction(eps2)
    if u_size is None:
        u_size = max(0, math.ceil(math.log2(max(1, len(lam.labels)))))
    total = candidate_count(eta, cfg, u_size)
    if total > cfg.max_candidates:
        raise EnumerationTooLarge(f"{total} candidates exceed the guard {cfg.max_candidates}")
    r = int(1 / cfg.rho)
    threshold = (eps1 + eps2) / 2
    live = [a for a in eta if eta[a]]
    checked = 0
    for b in range(1, cfg.b_max + 1):
        lam_b = lam.flat_extension(range(b))
        den = cfg.eta_denominator(u_size, b)
        n_up = cfg.upsilon_denominator(len(live) * b)
        for eta_b in weight_detailings(eta, b, den):
            coords = tuple(eta_b)
            vectors = _grid(len(coords), r)
            f = acceptance_tensor(eta_b, coords, vectors, tester)
            for counts in _composition_chunks(n_up, len(vectors)):
                acc = contract(counts / n_up, f)
                for j in np.flatnonzero(acc >= 0.5 - cfg.gate_tol):
                    ups = TypeDistribution(coords, Distribution(
                        (vectors[v], Fraction(int(c), n_up)) for v, c in enumerate(counts[j]) if c))
                    d = emd_weighted_types(lam_b, ups, eta_b)
                    if d <= threshold:
                        return SearchResult(Verdict.ACCEPT, checked + int(j) + 1, b, eta_b, ups, float(acc[j]), d)
                checked += len(counts)
    return SearchResult(Verdict.REJECT, checked)


def _check_eps(eps1, eps2):
    eps1, eps2 = as_fraction(eps1), as_fraction(eps2)
    if not (0 <= eps1 < eps2 <= 1):
        raise PreconditionError("need 0 <= eps1 < eps2 <= 1")
    return eps1, eps2


def _tester_for(prop: PropertySpec, eps1, eps2, s, q) -> CanonicalTester:
    tester = prop.tester((eps2 - eps1) / 12)
    if (s is not None and s != tester.s) or (q is not None and q != tester.q):
        raise PreconditionError(f"property tester is ({tester.s}, {tester.q}), not ({s}, {q})")
    return tester


def tolerant_trace(o: HugeObjectOracle, prop: PropertySpec, eps1, eps2, s: int | None = None, q: int | None = None,
                   cfg: TolerantConfig = DESK, rng: np.random.Generator | None = None) -> dict:
    """One run of the tester with its intermediate values."""
    eps1, eps2 = _check_eps(eps1, eps2)
    tester = _tester_for(prop, eps1, eps2, s, q)
    rng = rng if rng is not None else np.random.default_rng()
    u = find_weakly_robust_detailing(o, cfg.delta, cfg.k_prime, cfg.gamma, cfg.estimator, rng)
    if u is None:
        return {"U": None, "result": SearchResult(Verdict.REJECT, 0)}
    kappa = cfg.ep_kappa if cfg.ep_kappa is not None else cfg.rho
    eta, lam = estimate_parameters(o, u, cfg.estimator, rng, kappa=kappa, gamma=cfg.gamma)
    result = tolerant_search(eta, lam, tester, eps1, eps2, cfg, len(u))
    return {"U": sorted(u), "eta": eta, "lam": lam, "result": result}


def tolerant_tester(o: HugeObjectOracle, prop: PropertySpec, eps1, eps2, s: int | None = None, q: int | None = None,
                    cfg: TolerantConfig = DESK, rng: np.random.Generator | None = None) -> Verdict:
    """Accept if ``mu`` looks ``eps1``-close to ``prop``, reject if it looks ``eps2``-far."""
    if not as_fraction(eps1) > 0:
        raise PreconditionError("need 0 < eps1 < eps2 < 1")
    if not as_fraction(eps2) < 1:
        raise PreconditionError("need 0 < eps1 < eps2 < 1")
    return tolerant_trace(o, prop, eps1, eps2, s, q, cfg, rng)["result"].verdict


tolerant_tester.__test__ = False


# --------------------------------------------------------------------------
# distance estimation


def amplification_runs(eps, base_error=Fraction(1, 3)) -> int:
    """Odd run count whose majority errs with probability at most ``eps/10`` (Hoeffding)."""
    gap = Fraction(1, 2) - as_fraction(base_error)
    m = math.ceil(math.log(10 / float(eps)) / (2 * float(gap) ** 2))
    return m if m % 2 else m + 1


def distance_bands(eps) -> list[tuple[Fraction, Fraction]]:
    eps = as_fraction(eps)
    out = []
    for j in range(math.ceil(2 / eps) + 1):
        lo = j * eps / 2
        if lo >= 1:
            break
        out.append((lo, min(lo + eps, Fraction(1))))
    return out


def estimate_distance(o: HugeObjectOracle, prop: PropertySpec, eps, cfg: TolerantConfig = DESK,
                      rng: np.random.Generator | None = None, trace: list | None = None) -> float:
    """Distance estimate: the midpoint of the first band whose tolerant test accepts."""
    eps = as_fraction(eps)
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    rng = rng if rng is not None else np.random.default_rng()
    runs = cfg.amplification or amplification_runs(eps)
    for lo, hi in distance_bands(eps):
        votes = sum(
            tolerant_trace(o, prop, lo, hi, cfg=cfg, rng=rng)["result"].verdict is Verdict.ACCEPT
            for _ in range(runs)
        )
        if trace is not None:
            trace.append({"band": [float(lo), float(hi)], "accepts": int(votes), "runs": runs})
        if 2 * votes > runs:
            return float(min(Fraction(1), max(Fraction(0), (lo + hi) / 2)))
    return 1.0
