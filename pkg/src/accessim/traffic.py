"""Behavioral HTTP and FTP traffic sources.

Web browsing follows the standard cellular-evaluation behavioral model: a
packet call is one page (main object plus a Pareto-distributed number of
embedded objects), pages are separated by exponential reading times, and a
parsing pause sits between the main object and the embedded fetches.  File
transfer is the single-object special case with its own size and reading
parameters.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TruncatedLognormal:
    """Lognormal(mu, sigma) conditioned on [min_val, max_val], in bytes."""

    mu: float
    sigma: float
    min_val: float = 0.0
    max_val: float = math.inf

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.min_val >= self.max_val:
            raise ValueError("min_val must be below max_val")

    def sample(self, rng, size=None):
        """Rejection sampling keeps the conditional shape inside the bounds."""
        if size is None:
            return float(self.sample(rng, 1)[0])
        out = np.empty(size)
        need = np.ones(size, dtype=bool)
        n = size
        while n:
            draw = rng.lognormal(self.mu, self.sigma, n)
            ok = (draw >= self.min_val) & (draw <= self.max_val)
            idx = np.flatnonzero(need)[ok]
            out[idx] = draw[ok]
            need[idx] = False
            n = int(need.sum())
        return out


@dataclass(frozen=True)
class TruncatedPareto:
    """Pareto(alpha, k) with the tail mass at and above m collapsed onto m."""

    alpha: float
    k: float
    m: float

    def __post_init__(self):
        if self.k >= self.m:
            raise ValueError("k must be below m")

    def sample_raw(self, rng, size=None):
        """Capped draw: X = min(Pareto(alpha, k), m); P(X == m) = (k/m)**alpha."""
        if size is None:
            return float(self.sample_raw(rng, 1)[0])
        u = rng.random(size)
        x = self.k / u ** (1.0 / self.alpha)
        return np.minimum(x, self.m)

    def sample_count(self, rng, size=None):
        """Integer count: k subtracted from the capped draw, rounded to nearest.

        Nearest-integer rounding keeps the sample mean on the continuous
        mean of (X - k); flooring would bias it low by almost half a unit.
        """
        if size is None:
            return int(self.sample_count(rng, 1)[0])
        raw = self.sample_raw(rng, size)
        return np.rint(raw - self.k).astype(np.int64)

    def mass_at_cutoff(self):
        return (self.k / self.m) ** self.alpha

    def mean_count(self):
        """Analytic E[min(X, m) - k]."""
        a, k, m = self.alpha, self.k, self.m
        body = (a * k**a / (a - 1.0)) * (k ** (1.0 - a) - m ** (1.0 - a))
        return body + m * (k / m) ** a - k


@dataclass(frozen=True)
class HttpSessionModel:
    html_size: TruncatedLognormal
    embedded_size: TruncatedLognormal
    n_embedded: TruncatedPareto
    parsing_mean: float
    reading_mean: float
    request_low: float
    request_high: float


@dataclass(frozen=True)
class FtpSessionModel:
    file_size: TruncatedLognormal
    reading_mean: float
    request_low: float
    request_high: float


# Exponential gaps are parameterized by their documented means; the
# model's published rate constants are rounded reciprocals of these.
HTTP_MODEL = HttpSessionModel(
    html_size=TruncatedLognormal(mu=8.35, sigma=1.37, min_val=100, max_val=2e6),
    embedded_size=TruncatedLognormal(mu=6.17, sigma=2.36, min_val=50, max_val=2e6),
    n_embedded=TruncatedPareto(alpha=1.1, k=2, m=55),
    parsing_mean=0.13,
    reading_mean=30.0,
    request_low=0.0,
    request_high=700.0,
)

FTP_MODEL = FtpSessionModel(
    file_size=TruncatedLognormal(mu=14.45, sigma=0.35, max_val=5e6),
    reading_mean=180.0,
    request_low=0.0,
    request_high=700.0,
)


class HttpSession:
    """Closed-loop web browsing source.

    Drives a fetcher callback ``fetch(size_bytes, request_bytes, on_done)``
    and reports one record per completed packet call through
    ``on_call(start_time, end_time, total_bytes)``.  Embedded objects are
    requested only after the main object has fully arrived, then fetched
    one at a time.
    """

    __slots__ = ("sim", "rng", "model", "fetch", "on_call",
                 "_start", "_bytes", "_left")

    def __init__(self, sim, rng, fetch, on_call, model=HTTP_MODEL):
        self.sim = sim
        self.rng = rng
        self.model = model
        self.fetch = fetch
        self.on_call = on_call
        self._start = 0.0
        self._bytes = 0
        self._left = 0

    def start(self, at):
        self.sim.schedule(at, self._begin_call)

    def _request_size(self):
        return self.rng.uniform(self.model.request_low, self.model.request_high)

    def _begin_call(self, _=None):
        self._start = self.sim.now
        self._bytes = 0
        self._left = self.model.n_embedded.sample_count(self.rng)
        size = self.model.html_size.sample(self.rng)
        self.fetch(size, self._request_size(), self._main_done)

    def _main_done(self, nbytes):
        self._bytes += nbytes
        delay = self.rng.exponential(self.model.parsing_mean)
        self.sim.schedule_after(delay, self._next_embedded)

    def _next_embedded(self, _=None):
        if self._left > 0:
            self._left -= 1
            size = self.model.embedded_size.sample(self.rng)
            self.fetch(size, self._request_size(), self._embedded_done)
        else:
            self._end_call()

    def _embedded_done(self, nbytes):
        self._bytes += nbytes
        self._next_embedded()

    def _end_call(self):
        self.on_call(self._start, self.sim.now, self._bytes)
        gap = self.rng.exponential(self.model.reading_mean)
        self.sim.schedule_after(gap, self._begin_call)


class FtpSession:
    """Closed-loop file download source: one object per packet call."""

    __slots__ = ("sim", "rng", "model", "fetch", "on_call", "_start")

    def __init__(self, sim, rng, fetch, on_call, model=FTP_MODEL):
        self.sim = sim
        self.rng = rng
        self.model = model
        self.fetch = fetch
        self.on_call = on_call
        self._start = 0.0

    def start(self, at):
        self.sim.schedule(at, self._begin_call)

    def _begin_call(self, _=None):
        self._start = self.sim.now
        size = self.model.file_size.sample(self.rng)
        request = self.rng.uniform(self.model.request_low, self.model.request_high)
        self.fetch(size, request, self._done)

    def _done(self, nbytes):
        self.on_call(self._start, self.sim.now, nbytes)
        gap = self.rng.exponential(self.model.reading_mean)
        self.sim.schedule_after(gap, self._begin_call)
