"""Loss distributions on the naturals, their piecewise-linear CDFs, and divergences.

Entropic quantities are in bits.  Natural logs appear only inside
concentration exponents elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SUM_TOL = 1e-12
# knots snap to x when |F(knot) - x| is below this
SNAP_TOL = 1e-12
# geometric tails are materialized until the residual mass drops below this
TAIL_TOL = 1e-15
FLOAT_MAX = float(np.finfo(float).max)


class ValidationError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Pmf:
    """A probability mass function on {0, 1, 2, ...}.

    ``kind`` is one of ``"finite"``, ``"two_point"`` (finite, remembers its
    parameters for serialization) or ``"geometric"`` with mass
    ``(1 - rho) * rho**y``.  Use the classmethod constructors rather than the
    raw initializer.
    """

    kind: str
    support: tuple[int, ...] = ()
    probs: tuple[float, ...] = ()
    rho: float | None = None
    counts: tuple[int, ...] | None = field(default=None, compare=False)
    two_point_params: tuple[int, int, float] | None = None

    # ---- constructors -------------------------------------------------
    @classmethod
    def finite(cls, support: Iterable[int], probs: Iterable[float]) -> "Pmf":
        sup = tuple(int(y) for y in support)
        pr = tuple(float(w) for w in probs)
        _validate_finite(sup, pr)
        return cls("finite", sup, pr)

    @classmethod
    def from_mapping(cls, masses: dict[int, float]) -> "Pmf":
        """Finite pmf from ``{symbol: mass}``; zero masses are dropped."""
        items = sorted((int(y), float(w)) for y, w in masses.items() if w != 0)
        return cls.finite([y for y, _ in items], [w for _, w in items])

    @classmethod
    def point(cls, y: int) -> "Pmf":
        return cls.finite([y], [1.0])

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "Pmf":
        if not 0 <= lo <= hi:
            raise ValidationError(f"need 0 <= lo <= hi, got {lo}, {hi}")
        k = hi - lo + 1
        return cls.finite(range(lo, hi + 1), [1.0 / k] * k)

    @classmethod
    def geometric(cls, rho: float) -> "Pmf":
        rho = float(rho)
        if not 0.0 < rho < 1.0:
            raise ValidationError(f"geometric ratio must lie in (0, 1), got {rho}")
        return cls("geometric", rho=rho)

    @classmethod
    def two_point(cls, a: int, b: int, weight_a: float) -> "Pmf":
        a, b, w = int(a), int(b), float(weight_a)
        if a == b or a < 0 or b < 0:
            raise ValidationError("two-point pmf needs distinct naturals a, b")
        if not 0.0 < w <= 1.0:
            raise ValidationError(f"weight_a must lie in (0, 1], got {w}")
        masses = {a: w, b: 1.0 - w}
        items = sorted((y, m) for y, m in masses.items() if m > 0)
        sup = tuple(y for y, _ in items)
        pr = tuple(m for _, m in items)
        _validate_finite(sup, pr)
        return cls("two_point", sup, pr, two_point_params=(a, b, w))

    # ---- basic queries -----------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.kind != "geometric"

    @cached_property
    def _ys(self) -> np.ndarray:
        return np.asarray(self.support, dtype=np.int64)

    @cached_property
    def _ps(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self._ps)
        c[-1] = 1.0
        return c

    def mass(self, y: int) -> float:
        if y < 0:
            return 0.0
        if self.kind == "geometric":
            return (1.0 - self.rho) * self.rho ** y
        i = np.searchsorted(self._ys, y)
        if i < len(self._ys) and self._ys[i] == y:
            return float(self._ps[i])
        return 0.0

    def table(self, tail_tol: float = TAIL_TOL) -> tuple[np.ndarray, np.ndarray]:
        """(symbols, masses); geometric kinds are cut where the residual < tail_tol."""
        if self.is_finite:
            return self._ys, self._ps
        top = geometric_cutoff(self.rho, tail_tol)
        ys = np.arange(top + 1, dtype=np.int64)
        return ys, (1.0 - self.rho) * self.rho ** ys.astype(float)

    @property
    def max_support(self) -> float:
        return float(self._ys[-1]) if self.is_finite else math.inf

    def mean(self) -> float:
        if self.kind == "geometric":
            return self.rho / (1.0 - self.rho)
        return float(np.dot(self._ys, self._ps))

    def entropy(self) -> float:
        """Shannon entropy in bits."""
        if self.kind == "geometric":
            return geometric_entropy(self.rho)
        ps = self._ps
        return float(-np.sum(ps * np.log2(ps)))

    def is_monotone(self) -> bool:
        """p(y+1) <= p(y) for every natural y."""
        if self.kind == "geometric":
            return True
        n = len(self._ys)
        if self._ys[0] != 0 or self._ys[-1] != n - 1:
            return False
        return bool(np.all(np.diff(self._ps) <= 1e-15))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "geometric":
            return rng.geometric(1.0 - self.rho, size=size).astype(np.int64) - 1
        ys = self._ys
        if len(ys) == 1:
            return np.full(size, ys[0], dtype=np.int64)
        if self._is_uniform_run:
            return rng.integers(ys[0], ys[-1] + 1, size=size, dtype=np.int64)
        idx = np.searchsorted(self._cum, rng.random(size), side="right")
        np.minimum(idx, len(ys) - 1, out=idx)
        return ys[idx]

    @cached_property
    def _is_uniform_run(self) -> bool:
        ys, ps = self._ys, self._ps
        return bool(ys[-1] - ys[0] == len(ys) - 1 and np.all(ps == ps[0]))

    # ---- serialization -----------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {"kind": "geometric", "rho": self.rho}
        if self.kind == "two_point":
            a, b, w = self.two_point_params
            return {"kind": "two_point", "a": a, "b": b, "weight_a": w}
        return {"kind": "finite", "support": list(self.support), "probs": list(self.probs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Pmf":
        kind = d.get("kind")
        try:
            if kind == "finite":
                return cls.finite(d["support"], d["probs"])
            if kind == "geometric":
                return cls.geometric(d["rho"])
            if kind == "two_point":
                return cls.two_point(d["a"], d["b"], d["weight_a"])
        except KeyError as e:
            raise ValidationError(f"pmf of kind {kind!r} is missing field {e}") from None
        raise ValidationError(f"unknown pmf kind {kind!r}")

    def __repr__(self) -> str:
        if self.kind == "geometric":
            return f"Pmf.geometric({self.rho})"
        body = ", ".join(f"{y}: {w:.6g}" for y, w in zip(self.support, self.probs))
        return f"Pmf({{{body}}})"


def _validate_finite(sup: tuple[int, ...], pr: tuple[float, ...]) -> None:
    if len(sup) == 0 or len(sup) != len(pr):
        raise ValidationError("support and probs must be nonempty and of equal length")
    if sup[0] < 0 or any(b <= a for a, b in zip(sup, sup[1:])):
        raise ValidationError("support must be strictly increasing naturals")
    if any(not (w > 0.0) or math.isinf(w) for w in pr):
        raise ValidationError("listed probabilities must be positive and finite")
    if abs(math.fsum(pr) - 1.0) > SUM_TOL:
        raise ValidationError(f"probabilities sum to {math.fsum(pr)!r}, not 1")


def geometric_cutoff(rho: float, tol: float) -> int:
    """Smallest y with P(Y > y) = rho**(y+1) < tol."""
    return max(0, int(math.ceil(math.log(tol) / math.log(rho))) - 1)


def geometric_entropy(rho: float) -> float:
    if rho <= 0.0:
        return 0.0
    hb = -(1.0 - rho) * math.log2(1.0 - rho) - rho * math.log2(rho)
    return hb / (1.0 - rho)


# ---------------------------------------------------------------------------
# CDF


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCdf:
    """F on [0, inf]: linear between support knots, F(inf) = 1.

    Below the smallest support point y0 > 0 the function ramps linearly from
    (0, 0) to (y0, F(y0)).  A geometric source keeps ``rho`` and answers
    evaluations and quantiles in closed form; its stored knots are only a
    truncated view.
    """

    ys: np.ndarray
    fs: np.ndarray
    rho: float | None = None

    @property
    def unbounded(self) -> bool:
        return self.rho is not None

    @property
    def knots(self) -> list[tuple[int, float]]:
        return [(int(y), float(f)) for y, f in zip(self.ys, self.fs)]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.rho is not None:
            out = _geometric_cdf(self.rho, y)
        else:
            out = _finite_cdf(self.ys, self.fs, y)
        return float(out) if out.ndim == 0 else out

    def inverse(self, x):
        """inf{y : F(y) >= x}; accepts scalars or arrays in [0, 1]."""
        xa = np.asarray(x, dtype=float)
        if np.any(np.isnan(xa)) or np.any(xa < 0.0) or np.any(xa > 1.0):
            raise DomainError("quantile level must lie in [0, 1]")
        if self.rho is not None:
            out = _geometric_inverse(self.rho, xa)
        else:
            out = _finite_inverse(self.ys, self.fs, xa)
        return float(out) if out.ndim == 0 else out


def build_cdf(p: Pmf) -> PiecewiseLinearCdf:
    if p.is_finite:
        return PiecewiseLinearCdf(p._ys.astype(float), p._cum.copy())
    top = geometric_cutoff(p.rho, SUM_TOL)
    ys = np.arange(top + 1, dtype=float)
    return PiecewiseLinearCdf(ys, 1.0 - p.rho ** (ys + 1.0), rho=p.rho)


def cdf_inverse(F: PiecewiseLinearCdf, x):
    return F.inverse(x)


def _finite_cdf(ys, fs, y):
    shape = y.shape
    y = y.reshape(-1)
    # np.interp holds fs[-1] = 1 past the last knot
    out = np.interp(y, ys, fs)
    if ys[0] > 0:
        below = y < ys[0]
        out[below] = fs[0] * y[below] / ys[0]
    out[np.isinf(y)] = 1.0
    return out.reshape(shape)


def _finite_inverse(ys, fs, x):
    shape = x.shape
    x = x.reshape(-1)
    j = np.searchsorted(fs, x - SNAP_TOL, side="left")
    j = np.minimum(j, len(fs) - 1)
    fj = fs[j]
    prev_y = np.where(j > 0, ys[j - 1], 0.0)
    prev_f = np.where(j > 0, fs[j - 1], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (x - prev_f) / (fj - prev_f)
    out = prev_y + np.clip(frac, 0.0, 1.0) * (ys[j] - prev_y)
    # 0 in the support: F is flat at F(0) on the left, so F^{-1} = 0 there
    out = np.where((j == 0) & (ys[0] == 0), 0.0, out)
    out = np.where(np.abs(fj - x) <= SNAP_TOL, ys[j], out)
    return out.reshape(shape)


def _geometric_cdf(rho, y):
    shape = y.shape
    y = y.reshape(-1)
    out = np.ones_like(y)
    fin = np.isfinite(y)
    k = np.floor(y[fin])
    lo = 1.0 - rho ** (k + 1.0)
    hi = 1.0 - rho ** (k + 2.0)
    out[fin] = lo + (y[fin] - k) * (hi - lo)
    return out.reshape(shape)


def _geometric_inverse(rho, x):
    shape = x.shape
    x = x.reshape(-1)
    out = np.zeros_like(x)
    top = x >= 1.0
    out[top] = math.inf
    mid = ~top & (x > 1.0 - rho + SNAP_TOL)
    if np.any(mid):
        xm = x[mid]
        # smallest k >= 1 with F(k) = 1 - rho^(k+1) >= x - tol
        k = np.maximum(np.ceil(np.log1p(-xm) / math.log(rho) - 1.0), 1.0)
        for _ in range(2):
            k = np.where(1.0 - rho ** (k + 1.0) < xm - SNAP_TOL, k + 1.0, k)
            k = np.where((k > 1.0) & (1.0 - rho ** k >= xm - SNAP_TOL), k - 1.0, k)
        fk = 1.0 - rho ** (k + 1.0)
        fprev = 1.0 - rho ** k
        val = (k - 1.0) + (xm - fprev) / (fk - fprev)
        out[mid] = np.where(np.abs(fk - xm) <= SNAP_TOL, k, val)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# tails and heads


@dataclass(frozen=True)
class TailHeadReport:
    delta: float
    tail_threshold: float
    tail_mass: float
    head_threshold: float
    head_mass: float

    def holds(self, tol: float = 1e-12) -> bool:
        return self.tail_mass > self.delta - tol and self.head_mass > 1.0 - self.delta - tol


def tail_head(p: Pmf, delta: float, F: PiecewiseLinearCdf | None = None) -> TailHeadReport:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    F = F or build_cdf(p)
    t = F.inverse(1.0 - delta)
    h = 2.0 * F.inverse(1.0 - delta / 2.0)
    if p.kind == "geometric":
        tail = p.rho ** math.ceil(t)
        head = 1.0 - p.rho ** (math.floor(h) + 1)
    else:
        ys, ps = p._ys, p._ps
        tail = math.fsum(ps[ys >= t])
        head = math.fsum(ps[ys <= h])
    return TailHeadReport(delta, float(t), tail, float(h), head)


# ---------------------------------------------------------------------------
# divergences


def align(p: Pmf, q: Pmf) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both pmfs as mass vectors over the union of their (materialized) supports."""
    yp, pp = p.table()
    yq, pq = q.table()
    ys = np.union1d(yp, yq)
    a = np.zeros(len(ys))
    b = np.zeros(len(ys))
    a[np.searchsorted(ys, yp)] = pp
    b[np.searchsorted(ys, yq)] = pq
    return ys, a, b


def jdist_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """D(a||m) + D(b||m) with m the midpoint, in bits, summed over the last axis."""
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log2(2.0 * a / s), 0.0)
        tb = np.where(b > 0, b * np.log2(2.0 * b / s), 0.0)
    return np.maximum(np.sum(ta + tb, axis=-1), 0.0)


def jdist(p: Pmf, q: Pmf) -> float:
    if p == q:
        return 0.0
    _, a, b = align(p, q)
    return float(jdist_arrays(a, b))


def l1_dist(p: Pmf, q: Pmf) -> float:
    if p == q:
        return 0.0
    _, a, b = align(p, q)
    return float(np.sum(np.abs(a - b)))


def kl_div(p: Pmf, q: Pmf) -> float:
    if p == q:
        return 0.0
    _, a, b = align(p, q)
    on = a > 0
    if np.any(b[on] == 0):
        return math.inf
    return float(np.sum(a[on] * np.log2(a[on] / b[on])))


def empirical(x: Sequence[int]) -> Pmf:
    """Type of a loss sequence; exact counts are kept on ``Pmf.counts``."""
    arr = np.asarray(x, dtype=np.int64)
    if arr.size == 0:
        raise DomainError("empirical distribution of an empty sequence")
    if np.any(arr < 0):
        raise DomainError("losses must be naturals")
    ys, cnt = np.unique(arr, return_counts=True)
    n = int(arr.size)
    pr = tuple(float(c) / n for c in cnt)
    sup = tuple(int(y) for y in ys)
    _validate_finite(sup, pr)
    return Pmf("finite", sup, pr, counts=tuple(int(c) for c in cnt))


def empirical_cdf_at(support: np.ndarray, counts: np.ndarray, t: float) -> np.ndarray:
    """F_qhat(t) for each row of ``counts`` (types over ``support``), interpolation convention included.

    Knots are the symbols with positive count; below the first knot F ramps
    up from (0, 0).
    """
    counts = np.asarray(counts)
    n = counts.sum(axis=1)
    cum = np.cumsum(counts, axis=1) / n[:, None]
    s = len(support)
    pos = counts > 0
    pos_idx = np.arange(s)
    j = int(np.searchsorted(support, t, side="right")) - 1
    rows = np.arange(counts.shape[0])
    if j >= 0:
        last = np.maximum.accumulate(np.where(pos, pos_idx, -1), axis=1)[:, j]
        f_lo = cum[:, j]
        y_lo = np.where(last >= 0, support[np.maximum(last, 0)], 0).astype(float)
        f_lo = np.where(last >= 0, f_lo, 0.0)
    else:
        last = np.full(len(rows), -1)
        f_lo = np.zeros(len(rows))
        y_lo = np.zeros(len(rows))
    if j + 1 < s:
        nxt = np.minimum.accumulate(np.where(pos, pos_idx, s)[:, ::-1], axis=1)[:, ::-1][:, j + 1]
    else:
        nxt = np.full(len(rows), s)
    has_hi = nxt < s
    safe = np.minimum(nxt, s - 1)
    y_hi = support[safe].astype(float)
    f_hi = cum[rows, safe]
    with np.errstate(divide="ignore", invalid="ignore"):
        interp = f_lo + (f_hi - f_lo) * (t - y_lo) / (y_hi - y_lo)
    out = np.where(has_hi & (y_lo < t), interp, f_lo)
    return np.where(has_hi, out, 1.0)
