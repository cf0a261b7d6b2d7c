"""Transfer plans and Earth Mover distances.

The solver is a transportation simplex on the bipartite support graph. It
runs on whatever number type the inputs use: exact ``Fraction`` weights and
costs give an exact optimum, integer supplies give an integral plan. Bland's
rule picks both the entering and the leaving cell, which rules out cycling
on degenerate instances.

For exact inputs the returned witness is the lexicographically smallest
optimal plan in row-major order of the canonical supports, so witnesses do
not depend on pivoting details.
"""

from __future__ import annotations

import json
import math
from collections import deque
from collections.abc import Callable, Hashable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core_dist import Distribution, QuantizedDistribution, denominator_of, quantize
from .errors import DenominatorMismatch, DimensionMismatch, InvalidDistribution
from .typedist import (
    Implementation,
    TransferImplementation,
    TypeDistribution,
    expected_l1,
)

FLOAT_EPS = 1e-12
LEXMIN_MAX_CELLS = 400


# --------------------------------------------------------------------------
# ground metrics


@dataclass(frozen=True)
class GroundMetric:
    flavor: str
    fn: Callable[[Hashable, Hashable], object]

    def __call__(self, x, y):
        return self.fn(x, y)


def hamming() -> GroundMetric:
    """Normalized Hamming distance between equal-length strings."""

    def d(x, y):
        if len(x) != len(y):
            raise DimensionMismatch("strings of different length")
        if not x:
            return Fraction(0)
        return Fraction(sum(a != b for a, b in zip(x, y)), len(x))

    return GroundMetric("hamming", d)


def kronecker() -> GroundMetric:
    return GroundMetric("kronecker", lambda x, y: Fraction(int(x != y)))


def weighted_l1(eta: Mapping, labels: Sequence) -> GroundMetric:
    """``d(t, u) = E_{a~eta} |t_a - u_a|`` for type vectors aligned to ``labels``."""
    weights = [eta.get(a, 0) for a in labels]
    return GroundMetric("weighted_l1", lambda t, u: expected_l1(t, u, weights))


# --------------------------------------------------------------------------
# transfer plans


@dataclass(frozen=True)
class TransferPlan:
    """Coupling of ``source`` and ``target``: a distribution over pairs."""

    plan: Distribution

    @property
    def source(self) -> Distribution:
        return self.plan.map(lambda e: e[0])

    @property
    def target(self) -> Distribution:
        return self.plan.map(lambda e: e[1])

    def cost(self, metric: Callable):
        return sum(w * metric(x, y) for (x, y), w in self.plan.items())

    def to_json(self) -> str:
        edges = [{"from": _jsonable(x), "to": _jsonable(y), "mass": str(w)} for (x, y), w in self.plan.items()]
        return json.dumps({"edges": edges})


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    return x


@dataclass(frozen=True)
class EMDResult:
    distance: object
    witness: TransferPlan

    def __iter__(self):
        return iter((self.distance, self.witness))


# --------------------------------------------------------------------------
# transportation simplex


def _northwest(supply, demand):
    m, n = len(supply), len(demand)
    a, b = list(supply), list(demand)
    flow = {}
    i = j = 0
    while True:
        x = min(a[i], b[j])
        flow[(i, j)] = x
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return flow


def _potentials(m, n, cost, basis):
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot: list = [None] * (m + n)
    pot[0] = 0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if pot[nb] is None:
                i, j = (node, nb - m) if node < m else (nb, node - m)
                c = cost[i][j]
                pot[nb] = c - pot[node]
                queue.append(nb)
    return pot[:m], pot[m:], adj


def _tree_path(adj, m, start, goal):
    """Nodes on the unique tree path from ``start`` to ``goal``."""
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = parent[node]
    return path[::-1]


def transport(supply: Sequence, demand: Sequence, cost: Sequence[Sequence]):
    """Solve the balanced transportation problem.

    Returns ``(flow, u, v)`` where ``flow`` maps basic cells ``(i, j)`` to
    their value (zeros included) and ``u``, ``v`` are optimal duals.
    """
    m, n = len(supply), len(demand)
    exact = all(isinstance(x, (int, Fraction)) for x in (*supply, *demand)) and all(
        isinstance(c, (int, Fraction)) for row in cost for c in row
    )
    eps = 0 if exact else FLOAT_EPS
    flow = _northwest(supply, demand)
    while True:
        u, v, adj = _potentials(m, n, cost, flow)
        entering = None
        for i in range(m):
            for j in range(n):
                if (i, j) not in flow and cost[i][j] - u[i] - v[j] < -eps:
                    entering = (i, j)
                    break
            if entering:
                break
        if entering is None:
            return flow, u, v
        i0, j0 = entering
        path = _tree_path(adj, m, m + j0, i0)
        # cycle: entering (+), then alternating along col j0 -> ... -> row i0
        cells = []
        for a, b in zip(path, path[1:]):
            cells.append((a, b - m) if a < m else (b, a - m))
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] == theta)
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        del flow[leaving]
        flow[entering] = theta


def _max_flow(supply, demand, cells):
    """Edmonds-Karp on source -> rows -> cols -> sink; cells have infinite capacity."""
    m, n = len(supply), len(demand)
    s, t = m + n, m + n + 1
    cap: dict = {}
    adj = [[] for _ in range(m + n + 2)]

    def add(a, b, c):
        if (a, b) not in cap:
            adj[a].append(b)
            adj[b].append(a)
            cap[(a, b)] = 0
            cap.setdefault((b, a), 0)
        cap[(a, b)] += c

    big = sum(supply) + 1
    for i, a in enumerate(supply):
        if a > 0:
            add(s, i, a)
    for j, b in enumerate(demand):
        if b > 0:
            add(m + j, t, b)
    for i, j in cells:
        add(i, m + j, big)
    total = 0
    while True:
        parent = {s: None}
        queue = deque([s])
        while queue and t not in parent:
            node = queue.popleft()
            for nb in adj[node]:
                if nb not in parent and cap[(node, nb)] > 0:
                    parent[nb] = node
                    queue.append(nb)
        if t not in parent:
            return total
        push = None
        node = t
        while parent[node] is not None:
            c = cap[(parent[node], node)]
            push = c if push is None else min(push, c)
            node = parent[node]
        node = t
        while parent[node] is not None:
            cap[(parent[node], node)] -= push
            cap[(node, parent[node])] += push
            node = parent[node]
        total += push


def _lexmin(supply, demand, cells):
    """Lexicographically smallest feasible flow on ``cells`` (row-major order).

    The least value of a cell given the earlier ones equals the remaining
    mass minus the max flow that avoids it.
    """
    a, b = list(supply), list(demand)
    remaining = sorted(cells)
    out = {}
    for idx, c in enumerate(remaining):
        rest = remaining[idx + 1 :]
        total = sum(a)
        x = total - _max_flow(a, b, rest)
        if x:
            out[c] = x
            a[c[0]] -= x
            b[c[1]] -= x
    return out


def _solve(src: Sequence, dst: Sequence, wsrc: Sequence, wdst: Sequence, metric: Callable, lexmin: bool | None):
    cost = [[metric(x, y) for y in dst] for x in src]
    exact = all(isinstance(w, (int, Fraction)) for w in (*wsrc, *wdst)) and all(
        isinstance(c, (int, Fraction)) for row in cost for c in row
    )
    if not exact:
        cost = [[float(c) for c in row] for row in cost]
        wsrc, wdst = [float(w) for w in wsrc], [float(w) for w in wdst]
    flow, u, v = transport(wsrc, wdst, cost)
    if exact and lexmin is not False:
        tight = [(i, j) for i in range(len(src)) for j in range(len(dst)) if cost[i][j] == u[i] + v[j]]
        if lexmin or len(tight) <= LEXMIN_MAX_CELLS:
            flow = _lexmin(wsrc, wdst, tight)
    value = sum(f * cost[i][j] for (i, j), f in flow.items())
    return value, {(src[i], dst[j]): f for (i, j), f in flow.items() if f > 0}


def emd(source: Distribution, target: Distribution, metric: GroundMetric | Callable, lexmin: bool | None = None) -> EMDResult:
    """Earth Mover distance and an optimal transfer plan.

    ``lexmin=None`` canonicalizes the witness when the instance is exact and
    the optimal face has at most ``LEXMIN_MAX_CELLS`` cells.
    """
    src, dst = source.support, target.support
    value, plan = _solve(src, dst, [source[x] for x in src], [target[y] for y in dst], metric, lexmin)
    return EMDResult(value, TransferPlan(Distribution(plan.items(), check=False)))


def emd_value(source: Distribution, target: Distribution, metric: GroundMetric | Callable):
    return _solve(source.support, target.support, list(source.values()), list(target.values()), metric, False)[0]


# --------------------------------------------------------------------------
# type distributions


def _align(lam: TypeDistribution, ups: TypeDistribution, eta: Mapping):
    labels = tuple(a for a in sorted(eta) if eta[a] != 0)
    for name, td in (("Lambda", lam), ("Upsilon", ups)):
        missing = set(labels) - set(td.labels)
        if missing:
            raise DimensionMismatch(f"{name} has no coordinate for weighted labels {sorted(missing)[:3]}")
    return labels, lam.restrict_labels(labels), ups.restrict_labels(labels)


def emd_weighted_types(lam: TypeDistribution, ups: TypeDistribution, eta: Mapping) -> object:
    """EMD between type distributions under the eta-weighted l1 metric.

    Labels outside the support of ``eta`` carry no weight and are dropped,
    so zero-weight labels never influence the value.
    """
    labels, a, b = _align(lam, ups, eta)
    metric = weighted_l1(eta, labels)
    return emd_value(a.dist, b.dist, metric)


def _counts(td: TypeDistribution, n: int) -> dict:
    out = {}
    for t, w in td.dist.items():
        c = Fraction(w) * n
        if c.denominator != 1:
            raise DenominatorMismatch(f"type distribution is not 1/{n}-quantized")
        out[t] = int(c)
    return out


def _quantized_plan(lam: TypeDistribution, ups: TypeDistribution, metric: Callable, n: int | None):
    n = n or lam.n or ups.n
    if n is None or (lam.n and ups.n and lam.n != ups.n):
        raise DenominatorMismatch("both type distributions must be 1/n-quantized for one n")
    if tuple(lam.labels) != tuple(ups.labels):
        raise DimensionMismatch("type distributions over different label sets")
    cl, cu = _counts(lam, n), _counts(ups, n)
    src, dst = tuple(cl), tuple(cu)
    value, plan = _solve(src, dst, [cl[t] for t in src], [cu[t] for t in dst], metric, None)
    return n, Fraction(value, n), plan


def optimal_quantized_transfer(lam: TypeDistribution, ups: TypeDistribution, metric: Callable, n: int | None = None) -> TransferPlan:
    """Optimal transfer plan between two 1/n-quantized type distributions, itself 1/n-quantized."""
    n, _, plan = _quantized_plan(lam, ups, metric, n)
    return TransferPlan(Distribution((p, Fraction(c, n)) for p, c in plan.items()))


def extend_implementation(h: Implementation, ups: TypeDistribution, metric: Callable) -> TransferImplementation:
    """Extend ``h`` to per-variable pairs realizing an optimal transfer to ``ups``.

    Targets are handed out in index order, each variable taking the first
    target (canonical order) still owed to its source type.
    """
    lam = h.type_distribution()
    if tuple(lam.labels) != tuple(ups.labels):
        raise DimensionMismatch("type distributions over different label sets")
    _, _, plan = _quantized_plan(lam, ups, metric, h.n)
    owed: dict = {}
    for (t, u), c in sorted(plan.items()):
        owed.setdefault(t, []).append([u, c])
    pairs = []
    for t in h.assignment:
        slot = owed[t][0]
        pairs.append((t, slot[0]))
        slot[1] -= 1
        if slot[1] == 0:
            owed[t].pop(0)
    return TransferImplementation(h.labels, pairs)


def round_half_up(x, r: int) -> Fraction:
    """Nearest multiple of ``1/r``; exact ties go up."""
    return Fraction(math.floor(Fraction(x) * r + Fraction(1, 2)), r)


def round_type_distribution(lam: TypeDistribution, rho, eta: Mapping | None = None) -> QuantizedDistribution:
    """Snap every type vector to the rho-grid, then quantize the probabilities.

    The probability step is ``rho / (r+1)^l`` with ``l`` the number of
    labels, which keeps the weighted EMD to ``lam`` below ``rho`` for every
    weight distribution. ``eta`` is only checked for label compatibility.
    """
    r = denominator_of(rho)
    if eta is not None and set(a for a in eta if eta[a]) - set(lam.labels):
        raise DimensionMismatch("eta weights labels unknown to the type distribution")
    snapped = lam.dist.map(lambda t: tuple(round_half_up(x, r) for x in t))
    exact = Distribution(((t, Fraction(w)) for t, w in snapped.items()), check=False)
    step_den = r * (r + 1) ** len(lam.labels)
    q = quantize(exact, Fraction(1, step_den))
    if sum(q.counts.values()) != step_den:
        raise InvalidDistribution("quantization did not preserve unit mass")
    return q


def quantized_to_types(q: QuantizedDistribution, labels: Sequence, n: int | None = None) -> TypeDistribution:
    return TypeDistribution(tuple(labels), q.to_distribution(), n)
