"""Model classes, deception witnesses and finite-class quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .dist import (
    DomainError,
    Pmf,
    ValidationError,
    build_cdf,
    geometric_entropy,
    jdist,
)

LN2 = math.log(2.0)
ENTROPY_TOL = 1e-9


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelClass:
    name: str
    params: dict
    sampler: Callable[[np.random.Generator], Pmf] = field(repr=False, compare=False)
    predicate: Callable[[Pmf], bool] = field(repr=False, compare=False)

    def sample(self, seed) -> Pmf:
        return self.sampler(np.random.default_rng(seed))

    def contains(self, p: Pmf) -> bool:
        return self.predicate(p)

    def to_dict(self) -> dict:
        d = {"class": self.name}
        for k, v in self.params.items():
            d[k] = [m.to_dict() for m in v] if k == "members" else v
        return d


# ---------------------------------------------------------------------------
# uniform distributions on contiguous supports


def is_uniform_contiguous(p: Pmf, max_M: int | None = None) -> bool:
    if not p.is_finite:
        return False
    ys, ps = p._ys, p._ps
    ok = ys[-1] - ys[0] == len(ys) - 1 and np.allclose(ps, 1.0 / len(ys), rtol=0, atol=1e-12)
    return bool(ok and (max_M is None or ys[-1] <= max_M))


def sample_uniform_class(seed, max_M: int) -> Pmf:
    """Uniform on {m..M}, (m, M) drawn uniformly from the pairs 0 <= m <= M <= max_M."""
    if max_M < 0:
        raise DomainError("max_M must be a natural")
    rng = np.random.default_rng(seed)
    k = int(rng.integers((max_M + 1) * (max_M + 2) // 2))
    # unrank k into (m, M): row M holds M + 1 pairs
    M = int((math.isqrt(8 * k + 1) - 1) // 2)
    m = k - M * (M + 1) // 2
    return Pmf.uniform(m, M)


def uniform_class(max_M: int) -> ModelClass:
    return ModelClass(
        "uniform_contiguous",
        {"max_M": max_M},
        lambda rng: sample_uniform_class(rng, max_M),
        lambda p: is_uniform_contiguous(p, max_M),
    )


# ---------------------------------------------------------------------------
# monotone distributions of bounded entropy


def in_entropy_class(p: Pmf, h: float) -> bool:
    return p.is_monotone() and p.entropy() <= h + ENTROPY_TOL


def max_geometric_ratio(h: float) -> float:
    """Largest rho whose geometric law has entropy <= h (entropy increases in rho)."""
    if h <= 0:
        raise DomainError("entropy bound must be positive")
    hi = 1.0 - 1e-15
    if geometric_entropy(hi) <= h:
        return hi
    return brentq(lambda r: geometric_entropy(r) - h, 1e-300, hi, xtol=1e-15)


def sample_entropy_bounded_monotone(seed, h: float, max_tries: int = 200) -> Pmf:
    """A monotone pmf with entropy at most h.

    Half the draws are geometric with a ratio below the entropy cap; the
    other half are sorted Dirichlet pmfs on {0..K} kept only if they meet the
    bound.  Rejection falls back to a geometric draw.
    """
    if h <= 0:
        raise DomainError("entropy bound must be positive")
    rng = np.random.default_rng(seed)
    if rng.random() < 0.5:
        for _ in range(max_tries):
            K = int(rng.integers(1, 16))
            w = np.sort(rng.dirichlet(np.ones(K + 1)))[::-1]
            w = w / w.sum()
            if np.any(w <= 0):
                continue
            p = Pmf.finite(range(K + 1), w)
            if in_entropy_class(p, h):
                return p
    rho_cap = max_geometric_ratio(h)
    # 1 - U lies in (0, 1]
    return Pmf.geometric(rho_cap * (1.0 - rng.random()) or rho_cap)


def entropy_class(h: float) -> ModelClass:
    return ModelClass(
        "monotone_entropy",
        {"h": h},
        lambda rng: sample_entropy_bounded_monotone(rng, h),
        lambda p: in_entropy_class(p, h),
    )


def finite_class(members: Sequence[Pmf]) -> ModelClass:
    members = tuple(members)
    return ModelClass(
        "finite",
        {"members": members},
        lambda rng: members[int(rng.integers(len(members)))],
        lambda p: any(p == m for m in members),
    )


def two_point_class(max_L: int) -> ModelClass:
    """Two-point laws {0, L} with L <= max_L; all have finite mean."""

    def sampler(rng):
        L = int(rng.integers(1, max_L + 1))
        return Pmf.two_point(0, L, float(1.0 - rng.random() * 0.5))

    def pred(p):
        return p.is_finite and len(p.support) <= 2 and p.support[0] == 0 and p.max_support <= max_L

    return ModelClass("two_point", {"max_L": max_L}, sampler, pred)


def class_from_dict(d: dict) -> ModelClass:
    kind = d.get("class")
    try:
        if kind in ("uniform", "uniform_contiguous"):
            return uniform_class(int(d["max_M"]))
        if kind == "monotone_entropy":
            return entropy_class(float(d["h"]))
        if kind == "finite":
            return finite_class([Pmf.from_dict(m) for m in d["members"]])
        if kind == "two_point":
            return two_point_class(int(d["max_L"]))
    except KeyError as e:
        raise ValidationError(f"class {kind!r} is missing field {e}") from None
    raise ValidationError(f"unknown model class {kind!r}")


# ---------------------------------------------------------------------------
# deception


@dataclass(frozen=True)
class DeceptionWitness:
    epsilon: float
    delta: float
    f_value: float
    witness_q: Pmf
    dist_achieved: float
    quantile_achieved: float

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "f_value": self.f_value,
            "witness_q": self.witness_q.to_dict(),
            "dist_achieved": self.dist_achieved,
            "quantile_achieved": self.quantile_achieved,
        }


MAX_WITNESS_SUPPORT = 10_000_000


def monotone_bad_q(p: Pmf, epsilon: float, f_value: float) -> DeceptionWitness:
    """A monotone q within divergence epsilon of p whose beta/2-quantile exceeds f.

    q mixes p with a uniform law on {0..K}, weight beta = epsilon ln2 / 4 and
    K = ceil(2 (f + 1)).  Both properties are checked before returning.
    """
    if not p.is_monotone():
        raise DomainError("monotone_bad_q needs a monotone p")
    if epsilon <= 0 or f_value < 0:
        raise DomainError("need epsilon > 0 and f_value >= 0")
    beta = min(epsilon * LN2 / 4.0, 0.5)
    delta = beta / 2.0
    K = int(math.ceil(2.0 * (f_value + 1.0)))
    if K + 1 > MAX_WITNESS_SUPPORT:
        raise ConstructionError(f"f_value {f_value:g} needs a support of {K + 1} symbols")
    ys, ps = p.table()
    top = max(K, int(ys[-1]))
    w = np.zeros(top + 1)
    w[ys] = (1.0 - beta) * ps
    # mass dropped by truncating an infinite tail goes to 0, which keeps w monotone
    w[0] += (1.0 - beta) * (1.0 - ps.sum())
    w[: K + 1] += beta / (K + 1)
    w /= w.sum()
    keep = w > 0
    q = Pmf.finite(np.flatnonzero(keep), w[keep])
    d = jdist(p, q)
    quant = build_cdf(q).inverse(1.0 - delta)
    if not (d < epsilon and quant > f_value and q.is_monotone()):
        raise ConstructionError(
            f"witness failed verification: dist={d:g} (< {epsilon:g}?), "
            f"quantile={quant:g} (> {f_value:g}?)"
        )
    return DeceptionWitness(epsilon, delta, f_value, q, d, float(quant))


def check_witness(p: Pmf, w: DeceptionWitness) -> bool:
    if jdist(p, w.witness_q) >= w.epsilon:
        return False
    return build_cdf(w.witness_q).inverse(1.0 - w.delta) > w.f_value


# ---------------------------------------------------------------------------
# quantization


@dataclass(frozen=True, eq=False)
class Centroid:
    """A quantization centroid.

    ``quantile_bound(delta)`` must upper-bound the (1 - delta)-quantile of
    every law within ``reach`` of ``center``; it is called with numpy arrays.
    ``ball`` lists those laws when they are known explicitly.
    """

    index: int
    center: Pmf
    reach: float
    quantile_bound: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    ball: tuple[Pmf, ...] = ()

    def __post_init__(self):
        if self.index < 1 or self.reach <= 0:
            raise ValidationError("centroid needs a positive index and reach")

    @property
    def zone_radius(self) -> float:
        """l1 radius of the capture zone: reach^2 (ln 2)^2 / 16."""
        return self.reach ** 2 * LN2 ** 2 / 16.0

    @property
    def separation(self) -> float:
        """Squared l1 gap between a wrongly captured type and the true law."""
        return self.reach ** 4 * LN2 ** 4 / 256.0

    @property
    def log2_capacity(self) -> float:
        """log2 of 2^(2 g(sqrt(D)/6)); kept in log form because it overflows."""
        return 2.0 * float(self.quantile_bound(np.asarray(math.sqrt(self.separation) / 6.0)))

    def to_dict(self) -> dict:
        d = {"index": self.index, "center": self.center.to_dict(), "reach": self.reach}
        if self.ball:
            d["ball"] = [r.to_dict() for r in self.ball]
        return d


def ball_quantile_bound(ball: Sequence[Pmf]) -> Callable:
    cdfs = [build_cdf(r) for r in ball]

    def g(delta):
        x = 1.0 - np.asarray(delta, dtype=float)
        return np.max([F.inverse(x) for F in cdfs], axis=0)

    return g


@dataclass(frozen=True)
class Quantization:
    centroids: tuple[Centroid, ...]

    def __post_init__(self):
        idx = [c.index for c in self.centroids]
        if len(set(idx)) != len(idx):
            raise ValidationError("centroid indices must be distinct")

    def __len__(self):
        return len(self.centroids)

    def index_weight(self) -> float:
        return sum(1.0 / c.index ** 2 for c in self.centroids)

    def to_dict(self) -> dict:
        return {"centroids": [c.to_dict() for c in self.centroids]}

    @classmethod
    def from_dict(cls, d: dict) -> "Quantization":
        if "members" in d:
            return quantize_finite_class([Pmf.from_dict(m) for m in d["members"]],
                                         reach=d.get("reach"))
        cents = []
        for c in d["centroids"]:
            center = Pmf.from_dict(c["center"])
            ball = tuple(Pmf.from_dict(r) for r in c.get("ball", [])) or (center,)
            cents.append(Centroid(int(c["index"]), center, float(c["reach"]),
                                  ball_quantile_bound(ball), ball))
        return cls(tuple(cents))


def quantize_finite_class(members: Sequence[Pmf], reach: float | None = None) -> Quantization:
    """One centroid per member, indexed by 1-based position.

    The reach of member i defaults to min(half its smallest divergence to
    another member, 1), so each reach-ball holds only the member itself.  An
    explicit ``reach`` overrides this for every centroid; since the class is
    finite the quantile bound stays exact (a max over the ball).
    """
    members = list(members)
    k = len(members)
    if k == 0:
        raise DomainError("empty class")
    dmat = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dmat[i, j] = dmat[j, i] = jdist(members[i], members[j])
            if dmat[i, j] == 0.0:
                raise DomainError(f"members {i + 1} and {j + 1} coincide")
    cents = []
    for i, p in enumerate(members):
        if reach is None:
            others = np.delete(dmat[i], i)
            eps = min(0.5 * others.min(), 1.0) if k > 1 else 1.0
        else:
            eps = float(reach)
        ball = tuple(members[j] for j in range(k) if dmat[i, j] < eps)
        cents.append(Centroid(i + 1, p, eps, ball_quantile_bound(ball), ball))
    return Quantization(tuple(cents))
