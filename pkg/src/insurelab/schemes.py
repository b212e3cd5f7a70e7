"""Loss-domination schemes and the insurance-scheme correspondence.

A scheme maps a loss history x^n to a dominant in [0, inf]; ``inf`` means the
scheme has not entered yet.  ``dominants(path)`` returns the dominants of
every prefix x^0 .. x^n in one pass and is what simulations use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .classes import Centroid, Quantization
from .dist import FLOAT_MAX, SNAP_TOL, DomainError, ValidationError, empirical_cdf_at

INF = math.inf


@dataclass(frozen=True)
class History:
    losses: tuple[int, ...]

    @classmethod
    def of(cls, x) -> "History":
        return x if isinstance(x, History) else cls(tuple(int(v) for v in x))

    def __len__(self):
        return len(self.losses)

    @cached_property
    def running_max(self) -> int | None:
        return max(self.losses) if self.losses else None

    @cached_property
    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for v in self.losses:
            out[v] = out.get(v, 0) + 1
        return out

    def extend(self, y: int) -> "History":
        return History(self.losses + (int(y),))


def _as_path(path) -> np.ndarray:
    if isinstance(path, History):
        path = path.losses
    arr = np.asarray(path, dtype=np.int64).reshape(-1)
    if np.any(arr < 0):
        raise DomainError("losses must be naturals")
    return arr


class DominationScheme:
    """Base class.  Subclasses override ``dominants`` (vectorized) or ``dominant``."""

    name = "scheme"

    def dominant(self, history) -> float:
        return float(self.dominants(_as_path(history))[-1])

    def dominants(self, path) -> np.ndarray:
        arr = _as_path(path)
        return np.array([self.dominant(arr[:n]) for n in range(len(arr) + 1)], dtype=float)

    def state_key(self, history):
        """Hashable summary fixing every future dominant, or None when unknown.

        Exact enumeration merges histories that share a key.
        """
        return None

    def to_dict(self) -> dict:
        return {"scheme": self.name}


def bankruptcy_step(scheme: DominationScheme, path) -> Optional[int]:
    """Smallest n >= 1 with dominant(x^{n-1}) < x_n, or None."""
    arr = _as_path(path)
    if arr.size == 0:
        return None
    dom = scheme.dominants(arr)
    hit = np.flatnonzero(dom[:-1] < arr)
    return int(hit[0]) + 1 if hit.size else None


# ---------------------------------------------------------------------------


class DoublingScheme(DominationScheme):
    """Wait while n <= log2(1/eta) + 1, then dominate by twice the largest loss."""

    name = "doubling"

    def __init__(self, eta: float):
        if not 0.0 < eta < 1.0:
            raise DomainError(f"eta must lie in (0, 1), got {eta}")
        self.eta = float(eta)
        self.wait = math.log2(1.0 / self.eta) + 1.0

    def dominants(self, path) -> np.ndarray:
        arr = _as_path(path)
        out = np.full(arr.size + 1, INF)
        if arr.size:
            n = np.arange(1, arr.size + 1)
            live = n > self.wait
            out[1:][live] = 2.0 * np.maximum.accumulate(arr)[live]
        return out

    def state_key(self, history):
        arr = _as_path(history)
        top = int(arr.max()) if arr.size else -1
        return min(arr.size, int(self.wait) + 1), top

    def to_dict(self):
        return {"scheme": self.name, "eta": self.eta}


def doubling_scheme(eta: float) -> DoublingScheme:
    return DoublingScheme(eta)


class EntropyScheme(DominationScheme):
    """History-blind schedule for monotone laws of entropy <= h.

    At length i the dominant is 2 * 2^(2h (i+1)(i+2) / eta), the head
    threshold at delta_i = eta / ((i+1)(i+2)).  Values past the float range
    are held at the largest finite float so the scheme stays entered.
    """

    name = "entropy"

    def __init__(self, h: float, eta: float):
        if h <= 0:
            raise DomainError("h must be positive")
        if not 0.0 < eta < 1.0:
            raise DomainError(f"eta must lie in (0, 1), got {eta}")
        self.h = float(h)
        self.eta = float(eta)

    def schedule(self, n_max: int) -> np.ndarray:
        i = np.arange(n_max + 1, dtype=float)
        expo = 1.0 + 2.0 * self.h * (i + 1.0) * (i + 2.0) / self.eta
        with np.errstate(over="ignore"):
            out = np.exp2(expo)
        return np.minimum(out, FLOAT_MAX)

    def dominants(self, path) -> np.ndarray:
        return self.schedule(_as_path(path).size)

    def state_key(self, history):
        return len(history)

    def to_dict(self):
        return {"scheme": self.name, "h": self.h, "eta": self.eta}


def entropy_scheme(h: float, eta: float) -> EntropyScheme:
    return EntropyScheme(h, eta)


class GenericScheme(DominationScheme):
    """Capture-and-trap scheme built on a quantization of the class.

    While untrapped at length n, a centroid captures the empirical type q of
    x^n when q lies in its l1 zone and both

        exp(-n D / 18) <= eta / (2 C iota^2 n (n + 1))
        2 F_q^{-1}(1 - sqrt(D) / 6) <= log2 C

    hold.  The smallest-index capturing centroid traps every extension of
    x^n; from then on the dominant at length m is 2 g(eta / (4 m (m + 1))).
    """

    name = "generic"

    def __init__(self, quantization: Quantization, eta: float):
        if not 0.0 < eta < 1.0:
            raise DomainError(f"eta must lie in (0, 1), got {eta}")
        if len(quantization) == 0:
            raise ValidationError("empty quantization")
        self.quantization = quantization
        self.eta = float(eta)
        cents = sorted(quantization.centroids, key=lambda c: c.index)
        self._cents = cents
        self._sep = np.array([c.separation for c in cents])
        self._log2c = np.array([c.log2_capacity for c in cents])
        self._level = np.array([1.0 - math.sqrt(c.separation) / 6.0 for c in cents])
        self._iota = np.array([float(c.index) for c in cents])
        self._zone = np.array([c.zone_radius for c in cents])
        # union of center supports; centers with infinite support are materialized
        tables = [c.center.table() for c in cents]
        self._alpha = np.unique(np.concatenate([t[0] for t in tables]))
        self._centers = np.zeros((len(cents), self._alpha.size))
        for k, (ys, ps) in enumerate(tables):
            self._centers[k, np.searchsorted(self._alpha, ys)] = ps
        self._center_mass = self._centers.sum(axis=1)
        self._ready = np.zeros((0, len(cents)), dtype=bool)

    def _ready_upto(self, L: int) -> np.ndarray:
        if self._ready.shape[0] < L:
            self._ready = self.entry_ready(np.arange(1, L + 1))
        return self._ready[:L]

    # the exponential entry bound depends on n alone, never on the losses
    def entry_ready(self, n) -> np.ndarray:
        """Boolean (len(n), n_centroids): the exponential entry bound holds."""
        n = np.asarray(n, dtype=float).reshape(-1, 1)
        lhs = -n * self._sep / 18.0
        rhs = (math.log(self.eta) - math.log(2.0) - self._log2c * math.log(2.0)
               - 2.0 * np.log(self._iota) - np.log(n * (n + 1.0)))
        return lhs <= rhs

    def first_ready_length(self, limit: int = 10 ** 9) -> int | None:
        """Smallest n at which some centroid passes the exponential bound."""
        lo = 1
        while lo <= limit:
            hi = min(limit, lo * 2)
            ns = np.arange(lo, hi + 1)
            ok = self.entry_ready(ns).any(axis=1)
            if ok.any():
                return int(ns[np.argmax(ok)])
            lo = hi + 1
        return None

    def trap(self, path) -> tuple[int, Centroid] | None:
        """(n, centroid) of the first capture along the path, if any."""
        arr = _as_path(path)
        L = arr.size
        if L == 0:
            return None
        ready = self._ready_upto(L)
        rows = np.flatnonzero(ready.any(axis=1))
        if rows.size == 0:
            return None
        # counts over the union of the center supports and the path's own symbols
        U = np.union1d(self._alpha, arr)
        pos = np.searchsorted(U, arr)
        onehot = np.zeros((L, U.size))
        onehot[np.arange(L), pos] = 1.0
        counts = np.cumsum(onehot, axis=0)[rows]
        centers = np.zeros((len(self._cents), U.size))
        centers[:, np.searchsorted(U, self._alpha)] = self._centers
        n = (rows + 1).astype(float)
        q = counts / n[:, None]
        # mass a center puts beyond its materialized table counts fully toward l1
        l1 = (np.abs(q[:, None, :] - centers[None, :, :]).sum(axis=2)
              + (1.0 - self._center_mass)[None, :])
        cand = ready[rows] & (l1 <= self._zone[None, :])
        if not cand.any():
            return None
        hit_rows = np.flatnonzero(cand.any(axis=1))
        sub = counts[hit_rows]
        ok = np.zeros((hit_rows.size, len(self._cents)), dtype=bool)
        for k in np.flatnonzero(cand[hit_rows].any(axis=0)):
            # 2 F^{-1}(level) <= log2 C  iff  F(log2 C / 2) >= level, F being continuous
            Fk = empirical_cdf_at(U, sub, self._log2c[k] / 2.0)
            ok[:, k] = cand[hit_rows, k] & (Fk >= self._level[k] - SNAP_TOL)
        good = np.flatnonzero(ok.any(axis=1))
        if good.size == 0:
            return None
        r = good[0]
        return int(rows[hit_rows[r]]) + 1, self._cents[int(np.argmax(ok[r]))]

    def trapped_dominants(self, centroid: Centroid, lengths) -> np.ndarray:
        m = np.asarray(lengths, dtype=float)
        vals = 2.0 * np.asarray(centroid.quantile_bound(self.eta / (4.0 * m * (m + 1.0))), dtype=float)
        return np.minimum(vals, FLOAT_MAX)

    def dominants(self, path) -> np.ndarray:
        arr = _as_path(path)
        out = np.full(arr.size + 1, INF)
        tr = self.trap(arr)
        if tr is not None:
            n0, c = tr
            out[n0:] = self.trapped_dominants(c, np.arange(n0, arr.size + 1))
        return out

    def to_dict(self):
        return {"scheme": self.name, "eta": self.eta, "quantization": self.quantization.to_dict()}


def generic_scheme(q: Quantization, eta: float) -> GenericScheme:
    return GenericScheme(q, eta)


class TableScheme(DominationScheme):
    """Dominant depends only on the history length; ``None``/inf entries mean not entered."""

    name = "table"

    def __init__(self, values: Sequence[float | None]):
        vals = [INF if v is None else float(v) for v in values]
        if not vals or any(v < 0 for v in vals):
            raise ValidationError("table dominants must be a nonempty list of values >= 0")
        self.values = vals

    def dominants(self, path) -> np.ndarray:
        n = _as_path(path).size
        v = self.values
        return np.array([v[min(i, len(v) - 1)] for i in range(n + 1)], dtype=float)

    def state_key(self, history):
        return min(len(history), len(self.values) - 1)

    def to_dict(self):
        return {"scheme": self.name,
                "dominants": [None if math.isinf(v) else v for v in self.values]}


# ---------------------------------------------------------------------------
# insurance schemes


class InsuranceScheme:
    """Entry rule tau, premium rule Pi (0 before entry) and initial capital Pi_0.

    ``schedule(path)`` gives tau and Pi for every prefix of the path.
    """

    def __init__(self, entry: Callable, premium: Callable, initial_capital: float = 0.0):
        if initial_capital < 0:
            raise ValidationError("initial capital must be nonnegative")
        self._entry = entry
        self._premium = premium
        self.initial_capital = float(initial_capital)

    def entered(self, history) -> int:
        return int(self._entry(_as_path(history)))

    def premium(self, history) -> float:
        h = _as_path(history)
        return float(self._premium(h)) if self._entry(h) else 0.0

    def schedule(self, path) -> tuple[np.ndarray, np.ndarray]:
        arr = _as_path(path)
        tau = np.array([self.entered(arr[:n]) for n in range(arr.size + 1)], dtype=np.int8)
        pi = np.array([self.premium(arr[:n]) for n in range(arr.size + 1)], dtype=float)
        return tau, pi

    def capital(self, path) -> np.ndarray:
        """Pi_0 + sum_{i<=n} (Pi(x^{i-1}) - x_i) 1(tau(x^{i-1}) = 1), for n = 0..len."""
        arr = _as_path(path)
        tau, pi = self.schedule(arr)
        return self.capital_from(arr, tau, pi)

    def capital_from(self, arr, tau, pi) -> np.ndarray:
        flows = (pi[:-1] - arr) * tau[:-1]
        with np.errstate(over="ignore"):
            cap = self.initial_capital + np.concatenate([[0.0], np.cumsum(flows)])
        return np.minimum(cap, FLOAT_MAX)


class _DominationInsurance(InsuranceScheme):
    """Insurance view of a domination scheme: tau = 1 iff finite, Pi = dominant."""

    def __init__(self, phi: DominationScheme):
        self.phi = phi
        super().__init__(lambda h: phi.dominant(h) < INF,
                         lambda h: phi.dominant(h), 0.0)

    def schedule(self, path):
        dom = self.phi.dominants(_as_path(path))
        fin = np.isfinite(dom)
        return fin.astype(np.int8), np.where(fin, dom, 0.0)


def insurance_from_domination(phi: DominationScheme) -> InsuranceScheme:
    return _DominationInsurance(phi)


def insurance_bankruptcy_step(s: InsuranceScheme, path) -> Optional[int]:
    """First n >= 1 at which the built-up capital goes negative."""
    cap = s.capital(path)
    hit = np.flatnonzero(cap[1:] < 0)
    return int(hit[0]) + 1 if hit.size else None


class CapitalScheme(DominationScheme):
    """Domination scheme whose dominant is the insurer's capital plus current premium.

    The returned dominant is clamped at 0; a negative value only arises on a
    path that has already gone bankrupt, so first-bankruptcy steps agree.
    """

    name = "capital"

    def __init__(self, s: InsuranceScheme):
        self.insurance = s

    def dominants(self, path) -> np.ndarray:
        arr = _as_path(path)
        tau, pi = self.insurance.schedule(arr)
        cap = self.insurance.capital_from(arr, tau, pi)
        with np.errstate(over="ignore"):
            # premiums near the float ceiling must not turn an entered scheme into inf
            val = np.minimum(np.maximum(cap + pi, 0.0), FLOAT_MAX)
        return np.where(tau == 1, val, INF)


def domination_from_insurance(s: InsuranceScheme) -> CapitalScheme:
    return CapitalScheme(s)


def scheme_from_dict(d: dict) -> DominationScheme:
    kind = d.get("scheme")
    try:
        if kind == "doubling":
            return DoublingScheme(float(d["eta"]))
        if kind == "entropy":
            return EntropyScheme(float(d["h"]), float(d["eta"]))
        if kind == "generic":
            return GenericScheme(Quantization.from_dict(d["quantization"]), float(d["eta"]))
        if kind == "table":
            return TableScheme(d["dominants"])
    except KeyError as e:
        raise ValidationError(f"scheme {kind!r} is missing field {e}") from None
    raise ValidationError(f"unknown scheme {kind!r}")


def insurance_from_dict(d: dict) -> InsuranceScheme:
    """Explicit length-indexed insurance scheme: entry length, premium table, capital."""
    try:
        entry_at = int(d["entry_at"])
        prem = [float(v) for v in d["premiums"]]
    except KeyError as e:
        raise ValidationError(f"insurance scheme is missing field {e}") from None
    if not prem or any(v < 0 for v in prem):
        raise ValidationError("premiums must be a nonempty list of nonnegative values")

    def premium(h):
        return prem[min(len(h), len(prem) - 1)]

    return InsuranceScheme(lambda h: len(h) >= entry_at, premium,
                           float(d.get("initial_capital", 0.0)))
