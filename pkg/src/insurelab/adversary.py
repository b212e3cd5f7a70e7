"""Bankruptcy attacks on domination schemes.

``attack_allzero`` builds a two-point law {0: 1-eps, L: eps} that strikes
right after the scheme commits on a run of zeros, with an analytic lower
bound on the bankruptcy probability.  ``attack_deceptive`` is a desk-scale
run of the necessity argument: it measures where the scheme enters under a
law p, computes the largest dominant the scheme sets on p's head strings,
asks a deception oracle for a nearby q with a larger quantile, and measures
how often q bankrupts the scheme.  It demonstrates non-insurability on
concrete instances; it does not prove it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classes import DeceptionWitness, ModelClass
from .dist import DomainError, Pmf, build_cdf, jdist
from .harness import SimReport, estimate_bankruptcy, subtree_bankruptcy, trial_rng
from .schemes import DominationScheme

LN2 = math.log(2.0)
MAX_LOSS = 2 ** 62


class AttackShortfall(RuntimeError):
    """The attack could not reach its target; ``info`` carries what it did achieve."""

    def __init__(self, msg: str, **info):
        super().__init__(msg)
        self.info = info


@dataclass(frozen=True)
class AttackCertificate:
    adversarial_p: Pmf
    eta_target: float
    N: int
    epsilon: float
    M: int
    L: int
    analytic_lower_bound: float
    grid: int
    scan_budget: int

    def to_dict(self) -> dict:
        return {
            "adversarial_p": self.adversarial_p.to_dict(),
            "eta_target": self.eta_target,
            "N": self.N,
            "epsilon": self.epsilon,
            "M": self.M,
            "L": self.L,
            "analytic_lower_bound": self.analytic_lower_bound,
            "grid": self.grid,
            "scan_budget": self.scan_budget,
        }


def zero_run_dominants(scheme: DominationScheme, length: int) -> np.ndarray:
    return scheme.dominants(np.zeros(length, dtype=np.int64))


def entry_on_zeros(scheme: DominationScheme, scan_budget: int) -> int | None:
    """Smallest n with a finite dominant on 0^n, scanning lengths up to the budget."""
    L = 16
    while True:
        L = min(L, scan_budget)
        dom = zero_run_dominants(scheme, L)
        fin = np.flatnonzero(np.isfinite(dom))
        if fin.size:
            return int(fin[0])
        if L >= scan_budget:
            return None
        L *= 4


def _first_below(ratio: float, level: float) -> int:
    """Smallest M with ratio**M < level."""
    M = max(0, int(math.floor(math.log(level) / math.log(ratio))))
    while ratio ** M >= level:
        M += 1
    while M > 0 and ratio ** (M - 1) < level:
        M -= 1
    return M


def attack_allzero(scheme: DominationScheme, eta_target: float, grid: int = 1000,
                   scan_budget: int = 10 ** 6, max_loss: int = MAX_LOSS,
                   model_class: ModelClass | None = None) -> AttackCertificate:
    """Two-point attack striking after the scheme enters on zeros.

    eps is the largest multiple of 1/grid with (1-eps)^N > 1 - delta/2
    (delta = 1 - eta_target), M the first length with (1-eps)^M < delta/2 and
    L exceeds every dominant on 0^N .. 0^M.  Raises AttackShortfall when no
    admissible (eps, L) exists; the exception reports the best bound reachable.
    """
    if not 0.0 < eta_target < 1.0:
        raise DomainError("eta_target must lie in (0, 1)")
    N = entry_on_zeros(scheme, scan_budget)
    if N is None:
        raise AttackShortfall("scheme resists all-zero probe", N=None, achieved_bound=0.0,
                              scan_budget=scan_budget)
    delta = 1.0 - eta_target
    eps_grid = [k / grid for k in range(grid - 1, 0, -1)]
    feasible = [e for e in eps_grid if (1.0 - e) ** N > 1.0 - delta / 2.0]
    M_all = {e: _first_below(1.0 - e, delta / 2.0) for e in eps_grid}
    top = max(M_all.values())
    dom = zero_run_dominants(scheme, max(top, N))
    runmax = np.maximum.accumulate(np.where(np.isfinite(dom), dom, -1.0))

    def build(e):
        M = max(M_all[e], N)
        peak = runmax[M]
        if not math.isfinite(peak) or peak + 1 > max_loss:
            return None
        L = int(math.ceil(peak)) + 1
        if L > max_loss:
            return None
        p = Pmf.two_point(0, L, 1.0 - e)
        if model_class is not None and not model_class.contains(p):
            return None
        return M, L, p

    for e in feasible:
        built = build(e)
        if built is None:
            continue
        M, L, p = built
        bound = (1.0 - e) ** N - (1.0 - e) ** M
        cert = AttackCertificate(p, eta_target, N, e, M, L, bound, grid, scan_budget)
        _verify_certificate(cert, dom)
        return cert

    best, best_eps = 0.0, None
    for e in eps_grid:
        built = build(e)
        if built is not None:
            b = (1.0 - e) ** N - (1.0 - e) ** built[0]
            if b > best:
                best, best_eps = b, e
    raise AttackShortfall(
        "no admissible two-point law reaches the target", N=N, achieved_bound=best,
        achieved_epsilon=best_eps, eta_target=eta_target, max_loss=max_loss)


def _verify_certificate(c: AttackCertificate, dom: np.ndarray) -> None:
    r = 1.0 - c.epsilon
    delta = 1.0 - c.eta_target
    ok = (r ** c.N > 1.0 - delta / 2.0 and r ** c.M < delta / 2.0
          and c.analytic_lower_bound >= c.eta_target
          and np.all(dom[c.N:c.M + 1] < c.L))
    if not ok:
        raise AssertionError(f"certificate failed self-check: {c}")


def exact_allzero_bankruptcy(scheme: DominationScheme, cert: AttackCertificate, horizon: int,
                             budget: int = 10 ** 6) -> float:
    """Exact P(bankrupt by ``horizon``) under the certificate's two-point law.

    Paths are split by the position of the first loss L (the prefix-free
    family 0^i L); a path bankrupt at that step contributes its whole mass,
    and a surviving branch is finished by walking its subtree.
    """
    if horizon < cert.M:
        raise DomainError(f"horizon {horizon} is shorter than M = {cert.M}")
    r, e, L = 1.0 - cert.epsilon, cert.epsilon, cert.L
    dom = zero_run_dominants(scheme, horizon)
    parts = []
    for i in range(horizon):
        w = r ** i * e
        if dom[i] < L:
            parts.append(w)
        elif i + 1 < horizon:
            sub = subtree_bankruptcy(scheme, [0] * i + [L], [0, L], [r, e],
                                     horizon - i - 1, budget=budget)
            parts.append(w * sub)
    return math.fsum(parts)


# ---------------------------------------------------------------------------
# deceptive-model attack


@dataclass(frozen=True)
class NcsAttackParams:
    alpha: float
    eta: float
    N: int
    epsilon_budget: float
    gamma_p: float
    delta: float
    f_values: dict = field(default_factory=dict)

    @property
    def eta_admissible(self) -> bool:
        """eta < (1 - alpha - 2/N)(1 - 1/e)."""
        return self.eta < (1.0 - self.alpha - 2.0 / self.N) * (1.0 - math.exp(-1.0))

    @property
    def strike_lengths(self) -> int:
        return int(math.ceil(1.0 / self.delta))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "eta": self.eta,
            "N": self.N,
            "epsilon_budget": self.epsilon_budget,
            "gamma_p": self.gamma_p,
            "delta": self.delta,
            "f_values": {repr(k): v for k, v in self.f_values.items()},
            "eta_admissible": self.eta_admissible,
        }


def default_epsilon(N: int) -> float:
    return 1.0 / (16.0 * LN2 * N ** 8)


def ncs_params(alpha: float, eta: float, N: int, epsilon: float | None = None,
               delta: float | None = None) -> NcsAttackParams:
    """Attack constants for entry length N.

    epsilon defaults to 1/(16 ln2 N^8); delta defaults to epsilon ln2 / 8, the
    level at which ``monotone_bad_q`` certifies its quantile.  gamma_p solves
    (1 - gamma)^(N + 1/delta) = 1 - alpha/2.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if not 0.0 < alpha < 1.0 or not 0.0 < eta < 1.0:
        raise DomainError("alpha and eta must lie in (0, 1)")
    eps = default_epsilon(N) if epsilon is None else float(epsilon)
    d = eps * LN2 / 8.0 if delta is None else float(delta)
    gamma = -math.expm1(math.log1p(-alpha / 2.0) / (N + 1.0 / d))
    return NcsAttackParams(alpha, eta, N, eps, gamma, d)


def estimate_entry_length(scheme: DominationScheme, p: Pmf, alpha: float, trials: int,
                          seed: int, max_len: int = 10_000) -> int | None:
    """Smallest N >= 1 with empirical P(entered by N) > 1 - alpha/2."""
    entry = np.full(trials, np.iinfo(np.int64).max)
    for t in range(trials):
        dom = scheme.dominants(p.sample(trial_rng(seed, t), max_len))
        fin = np.flatnonzero(np.isfinite(dom))
        if fin.size:
            entry[t] = fin[0]
    for N in range(1, max_len + 1):
        if np.mean(entry <= N) > 1.0 - alpha / 2.0:
            return N
    return None


def head_set(p: Pmf, gamma: float) -> np.ndarray:
    """Support points y <= 2 F^{-1}(1 - gamma/2)."""
    thr = 2.0 * build_cdf(p).inverse(1.0 - gamma / 2.0)
    if p.is_finite:
        return p._ys[p._ys <= thr]
    return np.arange(int(math.floor(thr)) + 1, dtype=np.int64)


@dataclass(frozen=True)
class HeadMaximum:
    value: float
    mode: str
    strings_seen: int


def max_head_dominant(scheme: DominationScheme, p: Pmf, head: np.ndarray, first: int,
                      last: int, budget: int, seed: int) -> HeadMaximum:
    """Max finite dominant over strings with symbols in ``head`` and lengths first..last.

    Exact when |head|^last <= budget (every string is a prefix of a full-length
    leaf); otherwise the max over ``budget`` leaves drawn from p restricted to
    the head, which can only under-estimate the true maximum.
    """
    k = len(head)
    exact = k ** last <= budget if k > 1 else True
    best = -math.inf
    seen = 0
    if exact:
        leaves = itertools.product(head.tolist(), repeat=last) if k > 1 else [[int(head[0])] * last]
        mode = "exact"
    else:
        w = np.array([p.mass(int(y)) for y in head])
        w /= w.sum()
        rng = trial_rng(seed, 0)
        leaves = (head[rng.choice(k, size=last, p=w)] for _ in range(budget))
        mode = "sampled"
    for leaf in leaves:
        dom = scheme.dominants(np.asarray(leaf, dtype=np.int64))[first:last + 1]
        dom = dom[np.isfinite(dom)]
        seen += 1
        if dom.size:
            best = max(best, float(dom.max()))
    return HeadMaximum(max(best, 0.0), mode, seen)


@dataclass(frozen=True)
class DeceptiveAttackResult:
    q: Pmf
    report: SimReport
    params: NcsAttackParams
    f_value: float
    mode: str
    head: tuple[int, ...]
    witness: DeceptionWitness | None
    dist_pq: float
    theorem_bound: float

    def to_dict(self) -> dict:
        return {
            "q": self.q.to_dict(),
            "report": self.report.to_dict(),
            "params": self.params.to_dict(),
            "f_value": self.f_value,
            "mode": self.mode,
            "head": list(self.head),
            "dist_pq": self.dist_pq,
            "theorem_bound": self.theorem_bound,
        }


def attack_deceptive(scheme: DominationScheme, p: Pmf,
                     bad_q_oracle: Callable[[float, float], DeceptionWitness | Pmf],
                     alpha: float, eta: float, budget: int = 10_000, trials: int = 2_000,
                     seed: int = 0, epsilon: float | None = None, delta: float | None = None,
                     horizon: int | None = None, max_entry_len: int = 10_000
                     ) -> DeceptiveAttackResult:
    """Run the deceptive-model attack against ``scheme`` with p as the decoy.

    The oracle is called as ``oracle(epsilon, f)`` and must return q (or a
    witness holding q) with dist(p, q) < epsilon and F_q^{-1}(1 - delta) > f.
    The returned report measures bankruptcy under q over ``horizon`` steps
    (default N + ceil(1/delta)).
    """
    N = estimate_entry_length(scheme, p, alpha, min(trials, 2_000), seed, max_entry_len)
    if N is None:
        raise AttackShortfall("scheme did not enter under p within the scan", N=None)
    params = ncs_params(alpha, eta, N, epsilon, delta)
    head = head_set(p, params.gamma_p)
    last = N + params.strike_lengths
    hm = max_head_dominant(scheme, p, head, N, last, budget, seed)
    params = NcsAttackParams(params.alpha, params.eta, N, params.epsilon_budget,
                             params.gamma_p, params.delta, {params.delta: hm.value})
    got = bad_q_oracle(params.epsilon_budget, hm.value)
    witness = got if isinstance(got, DeceptionWitness) else None
    q = got.witness_q if witness else got
    d = jdist(p, q)
    if not (d < params.epsilon_budget and build_cdf(q).inverse(1.0 - params.delta) > hm.value):
        raise AttackShortfall("oracle returned an invalid witness", dist=d, f_value=hm.value)
    report = estimate_bankruptcy(q, scheme, horizon or last, trials, seed + 1)
    thm = (1.0 - alpha - 2.0 / N) * (1.0 - (1.0 - params.delta) ** params.strike_lengths)
    return DeceptiveAttackResult(q, report, params, hm.value, hm.mode,
                                 tuple(int(y) for y in head), witness, d, thm)
