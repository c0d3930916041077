"""Spot prices, inflows, reserve activations and expected bid coefficients.

All samplers take an integer seed and a stream name; independent streams are
derived from ``(seed, stream)`` so that, e.g., prices and activations of one
run never share random numbers.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HOURS_PER_DAY_CALENDAR = 24
PEAK_START, PEAK_END = 8, 20


def substream(seed: int, stream: str) -> np.random.Generator:
    """Generator for a named stream of a seeded run."""
    return np.random.default_rng([int(seed), zlib.crc32(stream.encode())])


def read_series_csv(path: str | Path) -> np.ndarray:
    """Read a two-column ``index,value`` CSV (with header) into a value array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["index", "value"]:
        raise ValueError(f"{path}: expected header 'index,value'")
    data = sorted((int(i), float(v)) for i, v in rows[1:] if i.strip())
    idx = [i for i, _ in data]
    if idx != list(range(idx[0], idx[0] + len(idx))):
        raise ValueError(f"{path}: index column must be consecutive")
    return np.array([v for _, v in data])


def is_peak(hours: np.ndarray, hours_per_day: int, start_weekday: int = 0) -> np.ndarray:
    """Weekday daytime mask (08:00-20:00 Mon-Fri) for absolute hour indices."""
    hours = np.asarray(hours)
    day = hours // hours_per_day
    clock = (hours % hours_per_day) * HOURS_PER_DAY_CALENDAR // hours_per_day
    weekday = (start_weekday + day) % 7
    return (weekday < 5) & (clock >= PEAK_START) & (clock < PEAK_END)


@dataclass(frozen=True, eq=False)
class PriceModel:
    """Two-factor mean-reverting log-price model around a forward curve."""

    forward_curve: np.ndarray
    mean_reversion: float
    vol_x: float
    vol_y: float
    capacity_price_up: np.ndarray | float = 0.0
    capacity_price_down: np.ndarray | float = 0.0
    activation_price_up: tuple[float, float] = (0.0, 0.0)  # (peak, off-peak)
    activation_price_down: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.mean_reversion <= 1.0:
            raise ValueError("mean reversion must lie in [0, 1]")
        if self.vol_x < 0 or self.vol_y < 0:
            raise ValueError("volatilities must be nonnegative")
        if np.any(np.asarray(self.forward_curve) <= 0):
            raise ValueError("forward curve must be strictly positive")

    def forward(self, start: int, n: int) -> np.ndarray:
        fc = np.asarray(self.forward_curve, dtype=float)
        return fc[(start + np.arange(n)) % fc.size]

    def log_variance(self, T: int) -> np.ndarray:
        """Var(x_t) for t = 1..T from the covariance recursion, x_0 = y_0 = 0."""
        a = self.mean_reversion
        trans = np.array([[1.0 - a, a], [0.0, 1.0]])
        noise = np.diag([self.vol_x ** 2, self.vol_y ** 2])
        cov = np.zeros((2, 2))
        out = np.empty(T)
        for t in range(T):
            cov = trans @ cov @ trans.T + noise
            out[t] = cov[0, 0]
        return out

    def normalizer(self, T: int) -> np.ndarray:
        """E[exp(x_t)] in closed form for t = 1..T."""
        return np.exp(0.5 * self.log_variance(T))

    def capacity_prices(self, start: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        def pick(v):
            v = np.asarray(v, dtype=float)
            return np.full(n, float(v)) if v.ndim == 0 else v[(start + np.arange(n)) % v.size]
        return pick(self.capacity_price_up), pick(self.capacity_price_down)

    def activation_prices(self, start: int, n: int, hours_per_day: int,
                          start_weekday: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Per-hour expected activation prices from the peak/off-peak split."""
        peak = is_peak(start + np.arange(n), hours_per_day, start_weekday)
        up = np.where(peak, self.activation_price_up[0], self.activation_price_up[1])
        down = np.where(peak, self.activation_price_down[0], self.activation_price_down[1])
        return up.astype(float), down.astype(float)


def simulate_log_factors(m: PriceModel, T: int, rng: np.random.Generator, n_paths: int = 1,
                         x0: float | np.ndarray = 0.0, y0: float | np.ndarray = 0.0
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Paths of (x_t, y_t) for t = 1..T, shape (n_paths, T) each."""
    if T <= 0:
        raise ValueError("hour count must be positive")
    a = m.mean_reversion
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,)).copy()
    y = np.broadcast_to(np.asarray(y0, dtype=float), (n_paths,)).copy()
    xs = np.empty((n_paths, T))
    ys = np.empty((n_paths, T))
    wx = rng.standard_normal((T, n_paths))
    wy = rng.standard_normal((T, n_paths))
    for t in range(T):
        x, y = x + a * (y - x) + m.vol_x * wx[t], y + m.vol_y * wy[t]
        xs[:, t] = x
        ys[:, t] = y
    return xs, ys


def prices_from_factors(m: PriceModel, xs: np.ndarray, start: int = 0) -> np.ndarray:
    """Map log factors at absolute hours start+1..start+T to spot prices."""
    T = xs.shape[-1]
    norm = m.normalizer(start + T)[start:]
    return m.forward(start, T) * np.exp(xs) / norm


def sample_spot_prices(m: PriceModel, T: int, seed: int, n_paths: int | None = None,
                       stream: str = "prices") -> np.ndarray:
    """Spot price paths over ``T`` hours; 1-D if ``n_paths`` is None."""
    xs, _ = simulate_log_factors(m, T, substream(seed, stream), n_paths or 1)
    prices = prices_from_factors(m, xs)
    return prices[0] if n_paths is None else prices


@dataclass(frozen=True, eq=False)
class InflowModel:
    """Daily inflow means with a year-type factor and daily noise.

    ``daily_means`` has shape (D, K) for the K non-sink reservoirs;
    ``year_type_var`` is (K,) and ``daily_var`` is (K,) or (D, K).
    """

    daily_means: np.ndarray
    year_type_var: np.ndarray
    daily_var: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.daily_means) < 0):
            raise ValueError("inflow means must be nonnegative")
        if np.any(np.asarray(self.year_type_var) < 0) or np.any(np.asarray(self.daily_var) < 0):
            raise ValueError("inflow variances must be nonnegative")

    @property
    def n_days(self) -> int:
        return np.asarray(self.daily_means).shape[0]

    def means(self, start_day: int, n_days: int) -> np.ndarray:
        mu = np.asarray(self.daily_means, dtype=float)
        return mu[(start_day + np.arange(n_days)) % mu.shape[0]]

    def daily_std(self, start_day: int, n_days: int) -> np.ndarray:
        v = np.asarray(self.daily_var, dtype=float)
        k = np.asarray(self.daily_means).shape[1]
        if v.ndim <= 1:
            return np.broadcast_to(np.sqrt(v), (n_days, k)).copy()
        return np.sqrt(v[(start_day + np.arange(n_days)) % v.shape[0]])


def sample_daily_inflows(m: InflowModel, start_day: int, n_days: int, rng: np.random.Generator,
                         n_paths: int = 1) -> np.ndarray:
    """Daily inflow volumes (n_paths, n_days, K) with the (.)^+ clamp."""
    mu = m.means(start_day, n_days)
    k = mu.shape[1]
    alpha = 1.0 + np.sqrt(np.asarray(m.year_type_var, dtype=float)) * rng.standard_normal((n_paths, 1, k))
    beta = m.daily_std(start_day, n_days) * rng.standard_normal((n_paths, n_days, k))
    return np.maximum(alpha * mu + beta, 0.0)


def sample_inflows(m: InflowModel, n_reservoirs: int, hours_per_day: int, seed: int,
                   n_days: int | None = None, stream: str = "inflows") -> np.ndarray:
    """Hourly inflows (T, R) with a zero sink column, constant within each day."""
    D = m.n_days if n_days is None else n_days
    k = np.asarray(m.daily_means).shape[1]
    if k != n_reservoirs - 1:
        raise ValueError(f"inflow table has {k} reservoirs, cascade has {n_reservoirs - 1}")
    daily = sample_daily_inflows(m, 0, D, substream(seed, stream))[0]
    return hourly_inflows(daily, hours_per_day)


def hourly_inflows(daily: np.ndarray, hours_per_day: int) -> np.ndarray:
    """Spread (..., D, K) daily volumes evenly over hours; append a sink column."""
    hourly = np.repeat(daily / hours_per_day, hours_per_day, axis=-2)
    pad = [(0, 0)] * (hourly.ndim - 1) + [(0, 1)]
    return np.pad(hourly, pad)


@dataclass(frozen=True)
class ActivationModel:
    """Probabilities of no call, an up call and a down call in an hour."""

    p_none: float = 0.98
    p_up: float = 0.01
    p_down: float = 0.01

    def __post_init__(self):
        p = np.array([self.p_none, self.p_up, self.p_down])
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("activation probabilities must be positive and sum to 1")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([self.p_none, self.p_up, self.p_down])


# outcome k maps to (rho_up, rho_down)
ACTIVATION_OUTCOMES = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int8)


def sample_activations(m: ActivationModel, T: int, seed: int,
                       stream: str = "activations") -> tuple[np.ndarray, np.ndarray]:
    """I.i.d. hourly activations; returns (rho_up, rho_down) integer arrays."""
    rng = substream(seed, stream)
    k = rng.choice(3, size=T, p=m.probabilities)
    out = ACTIVATION_OUTCOMES[k]
    return out[:, 0].copy(), out[:, 1].copy()


@dataclass(frozen=True, eq=False)
class BidCoefficients:
    """Per-hour expected revenue coefficients and activation means."""

    spot: np.ndarray
    up: np.ndarray
    down: np.ndarray
    rho_up: np.ndarray
    rho_down: np.ndarray

    def spot_only(self) -> "BidCoefficients":
        z = np.zeros_like(self.spot)
        return BidCoefficients(self.spot, z, z, self.rho_up, self.rho_down)


def expected_bid_coefficients(m: PriceModel, a: ActivationModel, spot_prices: np.ndarray,
                              start_hour: int, hours_per_day: int,
                              start_weekday: int = 0) -> BidCoefficients:
    """Coefficients of the here-and-now bids for hours already priced."""
    spot = np.asarray(spot_prices, dtype=float)
    n = spot.size
    cap_up, cap_down = m.capacity_prices(start_hour, n)
    psi_up, psi_down = m.activation_prices(start_hour, n, hours_per_day, start_weekday)
    return BidCoefficients(
        spot=spot.copy(),
        up=cap_up + a.p_up * psi_up,
        down=cap_down + a.p_down * psi_down,
        rho_up=np.full(n, a.p_up),
        rho_down=np.full(n, a.p_down),
    )


@dataclass(frozen=True, eq=False)
class Scenario:
    """One realization over the horizon: prices, inflows (T, R), activations."""

    spot: np.ndarray
    inflows: np.ndarray
    rho_up: np.ndarray
    rho_down: np.ndarray
    psi_up: np.ndarray
    psi_down: np.ndarray
    seed: int
    log_factors: tuple[np.ndarray, np.ndarray] = field(default=(np.zeros(0), np.zeros(0)))

    def __post_init__(self):
        if np.any(self.rho_up * self.rho_down != 0):
            raise ValueError("simultaneous up and down activation")
        if np.any(self.inflows < 0) or np.any(self.spot < 0):
            raise ValueError("negative inflow or price")


def sample_scenario(prices: PriceModel, inflows: InflowModel, activations: ActivationModel,
                    n_reservoirs: int, n_days: int, hours_per_day: int, seed: int,
                    start_weekday: int = 0) -> Scenario:
    """Draw one full scenario from independent named streams of ``seed``."""
    T = n_days * hours_per_day
    xs, ys = simulate_log_factors(prices, T, substream(seed, "prices"))
    spot = prices_from_factors(prices, xs)[0]
    phi = sample_inflows(inflows, n_reservoirs, hours_per_day, seed, n_days)
    ru, rd = sample_activations(activations, T, seed)
    psi_u, psi_d = prices.activation_prices(0, T, hours_per_day, start_weekday)
    return Scenario(spot, phi, ru, rd, psi_u, psi_d, seed, (xs[0], ys[0]))
