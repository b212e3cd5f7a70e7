"""Monte-Carlo bankruptcy estimates, exact small-instance oracles and lemma suites."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from .dist import DomainError, Pmf, empirical_cdf_at
from .schemes import DominationScheme

CSV_COLUMNS = ("trial_count", "horizon", "bankruptcies", "estimate",
               "wilson_low", "wilson_high", "never_entered", "seed")


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    phat = k / n
    den = 1.0 + z * z / n
    mid = (phat + z * z / (2 * n)) / den
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


@dataclass(frozen=True)
class SimReport:
    trials: int
    horizon: int
    bankruptcies: int
    never_entered: int
    estimate: float
    wilson_95_low: float
    wilson_95_high: float
    seed: int

    @classmethod
    def from_counts(cls, trials, horizon, bankruptcies, never_entered, seed) -> "SimReport":
        lo, hi = wilson_interval(bankruptcies, trials)
        return cls(trials, horizon, bankruptcies, never_entered,
                   bankruptcies / trials, lo, hi, seed)

    @property
    def entry_rate(self) -> float:
        return 1.0 - self.never_entered / self.trials

    def interval(self, level: float) -> tuple[float, float]:
        return wilson_interval(self.bankruptcies, self.trials, level)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.trials, self.horizon, self.bankruptcies, self.estimate,
                self.wilson_95_low, self.wilson_95_high, self.never_entered, self.seed]


def pool_reports(reports, seed: int) -> SimReport:
    """Pooled report over several runs sharing a horizon."""
    reports = list(reports)
    return SimReport.from_counts(
        sum(r.trials for r in reports), reports[0].horizon,
        sum(r.bankruptcies for r in reports), sum(r.never_entered for r in reports), seed)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Randomness of one trial, a hash of (seed, trial index)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, trial])


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("INSURELAB_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_path(scheme: DominationScheme, path: np.ndarray) -> tuple[bool, bool]:
    """(went bankrupt, entered) for one loss path."""
    dom = scheme.dominants(path)
    bankrupt = bool(np.any(dom[:-1] < path))
    entered = bankrupt or bool(np.isfinite(dom[-1]))
    return bankrupt, entered


def _chunk(p, scheme, horizon, seed, lo, hi):
    b = ne = 0
    for t in range(lo, hi):
        path = p.sample(trial_rng(seed, t), horizon)
        bk, en = run_path(scheme, path)
        b += bk
        ne += not en
    return b, ne


def estimate_bankruptcy(p: Pmf, scheme: DominationScheme, horizon: int, trials: int,
                        seed: int, workers: int | None = None) -> SimReport:
    """Simulate ``trials`` i.i.d. paths of length ``horizon`` and count bankruptcies.

    Entry is monotone, so a path whose last dominant is infinite never entered.
    Results do not depend on the number of workers.
    """
    if horizon < 1 or trials < 1:
        raise DomainError("horizon and trials must be positive")
    w = min(worker_count(workers), trials)
    if w == 1:
        b, ne = _chunk(p, scheme, horizon, seed, 0, trials)
    else:
        edges = np.linspace(0, trials, w + 1).astype(int)
        with ThreadPoolExecutor(w) as ex:
            parts = list(ex.map(lambda k: _chunk(p, scheme, horizon, seed, edges[k], edges[k + 1]),
                                range(w)))
        b = sum(x for x, _ in parts)
        ne = sum(y for _, y in parts)
    return SimReport.from_counts(trials, horizon, int(b), int(ne), seed)


# ---------------------------------------------------------------------------
# exact enumeration


def subtree_bankruptcy(scheme: DominationScheme, prefix, symbols, weights,
                       depth: int, budget: int = 10 ** 7) -> float:
    """P(bankrupt within ``depth`` further steps | prefix), by walking the path tree.

    Branches stop at bankruptcy.  When the scheme exposes ``state_key``,
    histories with equal keys share one subtree value.  Raises if more than
    ``budget`` nodes are visited.
    """
    symbols = [int(s) for s in symbols]
    weights = [float(w) for w in weights]
    if scheme.state_key(list(prefix)) is not None:
        return _merged_subtree(scheme, list(prefix), symbols, weights, depth, budget)
    parts: list[float] = []
    stack = [(list(prefix), 1.0, depth)]
    visited = 0
    while stack:
        pre, prob, left = stack.pop()
        visited += 1
        if visited > budget:
            raise DomainError(f"path tree exceeds {budget} nodes")
        d = scheme.dominant(pre)
        for y, w in zip(symbols, weights):
            if d < y:
                parts.append(prob * w)
            elif left > 1:
                stack.append((pre + [y], prob * w, left - 1))
    return math.fsum(parts)


def _merged_subtree(scheme, prefix, symbols, weights, depth, budget) -> float:
    memo: dict = {}
    # explicit stack of (history, steps left, expanded?) to avoid deep recursion
    stack = [(prefix, depth, False)]
    while stack:
        pre, left, expanded = stack.pop()
        key = (scheme.state_key(pre), left)
        if key in memo:
            continue
        d = scheme.dominant(pre)
        kids = [(pre + [y], left - 1) for y in symbols if d >= y and left > 1]
        if not expanded:
            pending = [k for k in kids if (scheme.state_key(k[0]), k[1]) not in memo]
            if pending:
                stack.append((pre, left, True))
                stack.extend((k[0], k[1], False) for k in pending)
                continue
        total = []
        for y, w in zip(symbols, weights):
            if d < y:
                total.append(w)
            elif left > 1:
                total.append(w * memo[(scheme.state_key(pre + [y]), left - 1)])
        memo[key] = math.fsum(total)
        if len(memo) > budget:
            raise DomainError(f"path tree exceeds {budget} merged states")
    return memo[(scheme.state_key(prefix), depth)]


def exact_bankruptcy_small(p: Pmf, scheme: DominationScheme, horizon: int,
                           limit: int = 10 ** 7) -> float:
    """Exact P(bankrupt by ``horizon``) for a finite pmf, by full enumeration."""
    if not p.is_finite:
        raise DomainError("exact enumeration needs a finite pmf")
    if horizon < 1:
        return 0.0
    k = len(p.support)
    if k ** horizon > limit:
        raise DomainError(f"{k}^{horizon} paths exceed the enumeration limit {limit}")
    return subtree_bankruptcy(scheme, [], p.support, p.probs, horizon, budget=limit * 2)


# ---------------------------------------------------------------------------
# lemma property suites

LEMMA_TOL = 1e-9
RANDOM_ALPHABET = 40
RANDOM_SUPPORT = 20


@dataclass
class LemmaCheckReport:
    """Outcome of a lemma suite.

    ``worst_margin`` is the smallest (right side - left side) seen over the
    checked cases; ``vacuous`` counts cases skipped because the bound says
    nothing there.  A suite with no checked case does not pass.
    """

    lemma: str
    cases_run: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    vacuous: int = 0
    config: dict | None = None

    @property
    def passed(self) -> bool:
        return self.cases_run > 0 and self.violations == 0

    def absorb(self, margins, tol: float = 0.0) -> None:
        m = np.asarray(margins, dtype=float).reshape(-1)
        if m.size:
            self.cases_run += int(m.size)
            self.violations += int(np.sum(m < -tol))
            self.worst_margin = min(self.worst_margin, float(m.min()))

    def merge(self, other: "LemmaCheckReport") -> None:
        self.cases_run += other.cases_run
        self.violations += other.violations
        self.vacuous += other.vacuous
        self.worst_margin = min(self.worst_margin, other.worst_margin)

    def to_dict(self) -> dict:
        return {"lemma": self.lemma, "cases_run": self.cases_run,
                "violations": self.violations,
                "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
                "vacuous": self.vacuous, "passed": self.passed, "config": self.config or {}}


def random_pmf_rows(rng: np.random.Generator, rows: int, width: int = RANDOM_ALPHABET,
                    max_support: int = RANDOM_SUPPORT) -> np.ndarray:
    """Dense pmf rows: Dirichlet(1) masses on a random support of 1..max_support symbols."""
    k = rng.integers(1, max_support + 1, size=rows)
    rank = np.argsort(rng.random((rows, width)), axis=1)
    on = rank < k[:, None]
    w = np.where(on, rng.exponential(size=(rows, width)), 0.0)
    return w / w.sum(axis=1, keepdims=True)


def check_lemma_dist(trials: int, seed: int, chunk: int = 20_000) -> LemmaCheckReport:
    """Both sandwich bounds on ``trials`` random pairs and the triangle-like bound on triples."""
    rep = LemmaCheckReport("dist", config={"trials": trials, "seed": seed,
                                           "alphabet": RANDOM_ALPHABET,
                                           "max_support": RANDOM_SUPPORT, "tol": LEMMA_TOL})
    from .dist import jdist_arrays

    rng = np.random.default_rng(seed)
    ln2 = math.log(2.0)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        p, q, r = (random_pmf_rows(rng, m) for _ in range(3))
        dpq = jdist_arrays(p, q)
        l1 = np.abs(p - q).sum(axis=1)
        rep.absorb(dpq - l1 ** 2 / (4 * ln2), LEMMA_TOL)
        rep.absorb(l1 / ln2 - dpq, LEMMA_TOL)
        lhs = jdist_arrays(p, q) + jdist_arrays(q, r)
        rep.absorb(lhs - jdist_arrays(p, r) ** 2 * ln2 / 8.0, LEMMA_TOL)
        done += m
    return rep


def check_lemma_dpq(trials: int, seed: int, chunk: int = 20_000) -> LemmaCheckReport:
    """dist(p, q) >= eps0^2 ln2 / 16 given |p0 - q|_1 <= eps0^2 (ln2)^2 / 16 and dist(p, p0) >= eps0.

    eps0 is drawn as U * dist(p, p0) with U uniform on (0, 1] (U = 1, the
    boundary, in one case of eight); q moves from p0 towards a random law by at
    most the allowed l1 radius.  Samples whose premises fail numerically are
    skipped and counted as vacuous.
    """
    from .dist import jdist_arrays

    rep = LemmaCheckReport("dpq", config={"trials": trials, "seed": seed, "tol": LEMMA_TOL})
    rng = np.random.default_rng(seed)
    ln2 = math.log(2.0)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        p0, p, r = (random_pmf_rows(rng, m) for _ in range(3))
        d0 = jdist_arrays(p, p0)
        u = np.where(rng.random(m) < 0.125, 1.0, 1.0 - rng.random(m))
        eps0 = u * d0
        radius = eps0 ** 2 * ln2 ** 2 / 16.0
        gap = np.abs(r - p0).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(gap > 0, np.minimum(1.0, radius / gap), 0.0) * rng.random(m)
        q = (1.0 - lam[:, None]) * p0 + lam[:, None] * r
        ok = (np.abs(p0 - q).sum(axis=1) <= radius) & (d0 >= eps0) & (eps0 > 0)
        rep.vacuous += int(np.sum(~ok))
        margin = jdist_arrays(p[ok], q[ok]) - eps0[ok] ** 2 * ln2 / 16.0
        rep.absorb(margin, LEMMA_TOL)
        done += m
    return rep


def yeung_rhs(n: int, delta: float, k: int) -> float:
    return (2.0 ** k - 2.0) * math.exp(-n * delta * delta / 18.0)


def _type_counts(p: Pmf, n: int, trials: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial type counts; an infinite tail below TAIL_TOL is lumped past the cutoff."""
    ys, ps = p.table()
    rest = 1.0 - ps.sum()
    if rest > 0:
        ys = np.append(ys, ys[-1] + 1)
        ps = np.append(ps, rest)
    return ys, rng.multinomial(n, ps / ps.sum(), size=trials)


def check_lemma_yeung(p: Pmf, n: int, delta: float, k: int, trials: int,
                      seed: int) -> LemmaCheckReport:
    """MC estimate of P(|qhat - p|_1 > delta and 2 F_qhat^{-1}(1 - delta/6) <= k) against the bound.

    The margin is RHS - (estimate - 3 stderr).  Configurations whose right
    side is >= 1 are skipped as vacuous.
    """
    rhs = yeung_rhs(n, delta, k)
    rep = LemmaCheckReport("yeung", config={"p": p.to_dict(), "n": n, "delta": delta, "k": k,
                                            "trials": trials, "seed": seed, "rhs": rhs})
    if k < 2 or delta <= 0:
        raise DomainError("need k >= 2 and delta > 0")
    if rhs >= 1.0:
        rep.vacuous = 1
        return rep
    rng = np.random.default_rng(seed)
    ys, counts = _type_counts(p, n, trials, rng)
    _, pp = p.table()
    pvec = np.zeros(len(ys))
    pvec[:len(pp)] = pp
    pvec[len(pp):] = 1.0 - pp.sum()
    l1 = np.abs(counts / n - pvec).sum(axis=1)
    # F^{-1}(x) <= k/2 iff F(k/2) >= x, F being continuous and nondecreasing
    head_ok = empirical_cdf_at(ys, counts, k / 2.0) >= 1.0 - delta / 6.0 - 1e-12
    hits = int(np.sum((l1 > delta) & head_ok))
    est = hits / trials
    se = math.sqrt(est * (1 - est) / trials)
    rep.config.update({"estimate": est, "stderr": se})
    rep.absorb([rhs - (est - 3 * se)])
    return rep


def default_yeung_grid() -> list[tuple[Pmf, int, float, int]]:
    """Nonvacuous (p, n, delta, k) configurations with right sides between ~0.02 and ~0.6."""
    pmfs = [Pmf.uniform(0, 3), Pmf.geometric(0.5),
            Pmf.two_point(0, 10 ** 6, 0.9), Pmf.finite([1, 2, 5], [0.2, 0.5, 0.3])]
    out = []
    for p in pmfs:
        for k, delta in ((2, 0.5), (3, 0.3), (5, 0.4)):
            for extra in (0.5, 4.0):
                n = int(math.ceil(18.0 * (math.log(2.0 ** k - 2.0) + extra) / delta ** 2))
                out.append((p, n, delta, k))
    return out


def check_yeung_grid(grid=None, trials: int = 20_000, seed: int = 0) -> LemmaCheckReport:
    grid = default_yeung_grid() if grid is None else grid
    rep = LemmaCheckReport("yeung", config={"configs": len(grid), "trials": trials, "seed": seed})
    for i, (p, n, delta, k) in enumerate(grid):
        rep.merge(check_lemma_yeung(p, n, delta, k, trials, seed + i))
    return rep


def check_base_inequality(p: Pmf, n: int, t: float, trials: int, seed: int) -> LemmaCheckReport:
    """P(|qhat - p|_1 > t) <= (2^L - 2) exp(-n t^2 / 2) for a finite p with support size L."""
    if not p.is_finite:
        raise DomainError("needs a finite-support pmf")
    L = len(p.support)
    rhs = (2.0 ** L - 2.0) * math.exp(-n * t * t / 2.0)
    rep = LemmaCheckReport("base", config={"p": p.to_dict(), "n": n, "t": t,
                                           "trials": trials, "seed": seed, "rhs": rhs})
    if rhs >= 1.0 or L < 2:
        rep.vacuous = 1
        return rep
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, np.asarray(p.probs), size=trials)
    l1 = np.abs(counts / n - np.asarray(p.probs)).sum(axis=1)
    est = float(np.mean(l1 > t))
    se = math.sqrt(est * (1 - est) / trials)
    rep.config.update({"estimate": est, "stderr": se})
    rep.absorb([rhs + 3 * se - est])
    return rep


def default_base_grid() -> list[tuple[Pmf, int, float]]:
    out = []
    for p in (Pmf.uniform(0, 1), Pmf.uniform(0, 3), Pmf.finite([0, 1, 2], [0.7, 0.2, 0.1])):
        L = len(p.support)
        for t in (0.1, 0.2):
            for extra in (0.3, 2.0):
                out.append((p, int(math.ceil(2.0 * (math.log(2.0 ** L - 2.0) + extra) / t ** 2)), t))
    return out


def check_base_grid(grid=None, trials: int = 20_000, seed: int = 0) -> LemmaCheckReport:
    grid = default_base_grid() if grid is None else grid
    rep = LemmaCheckReport("base", config={"configs": len(grid), "trials": trials, "seed": seed})
    for i, (p, n, t) in enumerate(grid):
        rep.merge(check_base_inequality(p, n, t, trials, seed + i))
    return rep


JN_STRING_LIMIT = 10 ** 6


def product_probs(masses: np.ndarray, N: int) -> np.ndarray:
    """Probabilities of all length-N strings, lexicographic order."""
    out = np.ones(1)
    for _ in range(N):
        out = np.outer(out, masses).reshape(-1)
    return out


def jn_bound(alpha: float, N: int, eps: float) -> float:
    return 1.0 - alpha - 2.0 * N ** 3 * math.sqrt(4.0 * eps * math.log(2.0)) - 1.0 / N


def check_lemma_jn(p: Pmf, q: Pmf, N: int, alpha: float, seed: int,
                   events: int = 4) -> LemmaCheckReport:
    """Exact check of q^N(R) >= 1 - alpha - 2N^3 sqrt(4 eps ln2) - 1/N, eps = dist(p, q).

    Each event R holds the most p^N-likely strings until p^N(R) >= 1 - alpha,
    plus random padding; one extra event is built adversarially, taking strings
    in increasing order of q^N/p^N.  A bound below 0 is recorded as vacuous.
    """
    from .dist import align, jdist

    ys, a, b = align(p, q)
    if len(ys) ** N > JN_STRING_LIMIT:
        raise DomainError(f"{len(ys)}^{N} strings exceed {JN_STRING_LIMIT}")
    eps = jdist(p, q)
    bound = jn_bound(alpha, N, eps)
    rep = LemmaCheckReport("jn", config={"p": p.to_dict(), "q": q.to_dict(), "N": N,
                                         "alpha": alpha, "eps": eps, "bound": bound, "seed": seed})
    if bound <= 0:
        rep.vacuous = events + 1
        return rep
    pn, qn = product_probs(a, N), product_probs(b, N)
    rng = np.random.default_rng(seed)

    def greedy(order):
        csum = np.cumsum(pn[order])
        stop = int(np.searchsorted(csum, 1.0 - alpha - 1e-15)) + 1
        return order[:min(stop, len(order))]

    top = greedy(np.argsort(-pn, kind="stable"))
    margins = []
    for _ in range(events):
        inside = np.zeros(len(pn), bool)
        inside[top] = True
        rest = np.flatnonzero(~inside)
        if rest.size:
            inside[rng.choice(rest, size=int(rng.integers(0, rest.size + 1)), replace=False)] = True
        margins.append(math.fsum(qn[inside]) - bound)
    with np.errstate(divide="ignore"):
        ratio = np.where(pn > 0, qn / pn, np.inf)
    adv = greedy(np.argsort(ratio, kind="stable"))
    margins.append(math.fsum(qn[adv]) - bound)
    rep.absorb(margins, LEMMA_TOL)
    return rep


def random_jn_instance(rng: np.random.Generator) -> tuple[Pmf, Pmf, int, float]:
    """A (p, q, N, alpha) draw whose bound is nonvacuous: q is a tiny perturbation of p."""
    from .dist import jdist

    N = int(rng.integers(2, 7))
    k = int(rng.integers(2, 5 if N <= 5 else 4))
    alpha = float(rng.uniform(0.05, 0.3))
    w = rng.dirichlet(np.ones(k))
    w = np.maximum(w, 1e-3)
    w /= w.sum()
    p = Pmf.finite(range(k), w)
    # dist <= l1 / ln2, so an l1 step this small keeps 2N^3 sqrt(4 eps ln2) below the slack
    slack = 1.0 - alpha - 1.0 / N
    l1 = 0.5 * math.log(2.0) * (slack / (2.0 * N ** 3)) ** 2 / (4.0 * math.log(2.0))
    d = rng.normal(size=k)
    d -= d.mean()
    d *= l1 / np.abs(d).sum() * rng.uniform(0.2, 1.0)
    v = np.clip(w + d, 1e-12, None)
    q = Pmf.finite(range(k), v / v.sum())
    if jn_bound(alpha, N, jdist(p, q)) <= 0:
        return random_jn_instance(rng)
    return p, q, N, alpha


def check_jn_suite(instances: int = 60, seed: int = 0) -> LemmaCheckReport:
    rng = np.random.default_rng(seed)
    rep = LemmaCheckReport("jn", config={"instances": instances, "seed": seed})
    for i in range(instances):
        p, q, N, alpha = random_jn_instance(rng)
        rep.merge(check_lemma_jn(p, q, N, alpha, seed + i))
    return rep
