"""High/low-fidelity function pairs.

Two sources of pairs are provided: a small catalogue of closed-form pairs
from the multi-fidelity literature, and a generator that derives a low
fidelity from any base function by adding a compactly supported bump
("disturbance") either around chosen centres or around a level of the
base function.

All functions are vectorised: they take an ``(n, d)`` array in domain
coordinates and return an ``(n,)`` array.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from .exceptions import ConfigError, DomainError

CATALOGUE_VERSION = "1"

# Relative slack when checking bounds; points produced by scaling unit-cube
# plans can overshoot the upper bound by one ulp.
_BOUNDS_RTOL = 1e-12


@dataclass(frozen=True)
class Hypercube:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) == 0 or len(lower) != len(upper):
            raise DomainError("lower and upper bounds must be non-empty and of equal length")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise DomainError(f"every lower bound must be below its upper bound: {lower} / {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, d: int) -> "Hypercube":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def bounds(self) -> np.ndarray:
        """``(d, 2)`` array of ``[lower, upper]`` rows."""
        return np.column_stack([self.lower, self.upper])

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        slack = _BOUNDS_RTOL * (hi - lo)
        return np.all((X >= lo - slack) & (X <= hi + slack), axis=1)

    def check(self, X) -> np.ndarray:
        """Return ``X`` as an ``(n, d)`` float array or raise `DomainError`."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DomainError(f"expected points of dimension {self.d}, got shape {X.shape}")
        inside = self.contains(X)
        if not inside.all():
            bad = X[np.argmin(inside)]
            raise DomainError(f"point {bad.tolist()} lies outside [{self.lower}, {self.upper}]")
        return X

    def from_unit(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.clip(lo + U * (hi - lo), lo, hi)

    def to_unit(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return (X - lo) / (hi - lo)


@dataclass(frozen=True)
class FunctionPair:
    """A deterministic high/low-fidelity pair on a shared hypercube."""

    id: str
    domain: Hypercube
    high: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    low: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    source_tag: str = "literature"
    description: str = field(default="", repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.domain.d


def evaluate(pair: FunctionPair, fidelity: str, x) -> np.ndarray | float:
    """Evaluate one fidelity of `pair` at a point or an ``(n, d)`` array.

    A 1-d input of length ``d`` is treated as a single point and returns a
    float.
    """
    if fidelity not in ("high", "low"):
        raise ValueError(f"fidelity must be 'high' or 'low', got {fidelity!r}")
    single = np.ndim(x) == 1
    X = pair.domain.check(x)
    fn = pair.high if fidelity == "high" else pair.low
    y = np.asarray(fn(X), dtype=float).reshape(-1)
    return float(y[0]) if single else y


# ---------------------------------------------------------------------------
# Literature catalogue


def _forrester_high(X):
    x = X[:, 0]
    return (6 * x - 2) ** 2 * np.sin(12 * x - 4)


def _forrester_low(X):
    x = X[:, 0]
    return 0.5 * _forrester_high(X) + 10 * (x - 0.5) - 5


def _paciorek_high(X):
    return np.sin(1.0 / (X[:, 0] * X[:, 1]))


def _paciorek_low(X, a=0.5):
    return _paciorek_high(X) - 9 * a**2 * np.cos(1.0 / (X[:, 0] * X[:, 1]))


def _currin_high(X):
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="ignore"):
        factor = 1 - np.exp(-1 / (2 * x2))
    num = 2300 * x1**3 + 1900 * x1**2 + 2092 * x1 + 60
    den = 100 * x1**3 + 500 * x1**2 + 4 * x1 + 20
    return factor * num / den


def _currin_low(X):
    x1, x2 = X[:, 0], X[:, 1]
    up = x2 + 0.05
    down = np.maximum(0.0, x2 - 0.05)
    total = 0.0
    for a, b in ((x1 + 0.05, up), (x1 + 0.05, down), (x1 - 0.05, up), (x1 - 0.05, down)):
        total = total + _currin_high(np.column_stack([a, b]))
    return total / 4


def _branin_high(X):
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4 * np.pi**2)
    c = 5 / np.pi
    t = 1 / (8 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10


def _branin_low(X):
    x1, x2 = X[:, 0], X[:, 1]
    return 10 * np.sqrt(_branin_high(X - 2)) + 2 * (x1 - 0.5) - 3 * (3 * x2 - 1) - 1


def _park91b_high(X):
    x1, x2, x3, x4 = X.T
    return (2 / 3) * np.exp(x1 + x2) - x4 * np.sin(x3) + x3


def _park91b_low(X):
    return 1.2 * _park91b_high(X) - 1


def _borehole(X, scale, offset):
    rw, r, tu, hu, tl, hl, length, kw = X.T
    log_ratio = np.log(r / rw)
    return scale * tu * (hu - hl) / (
        log_ratio * (offset + 2 * length * tu / (log_ratio * rw**2 * kw) + tu / tl)
    )


def _rosenbrock_high(X):
    a, b = X[:, :-1], X[:, 1:]
    return np.sum(100 * (b - a**2) ** 2 + (1 - a) ** 2, axis=1)


def _rosenbrock_low(X):
    a, b = X[:, :-1], X[:, 1:]
    return np.sum(50 * (b - a**2) ** 2 + (-2 - a) ** 2, axis=1) - 0.5 * np.sum(X, axis=1)


def _literature() -> list[FunctionPair]:
    pairs = [
        FunctionPair(
            "forrester", Hypercube((0.0,), (1.0,)), _forrester_high, _forrester_low,
            description="f_h = (6x-2)^2 sin(12x-4); f_l = 0.5 f_h + 10(x-0.5) - 5",
        ),
        FunctionPair(
            "paciorek", Hypercube((0.3, 0.3), (1.0, 1.0)), _paciorek_high, _paciorek_low,
            description="f_h = sin(1/(x1 x2)); f_l = f_h - 9 A^2 cos(1/(x1 x2)), A = 0.5",
        ),
        FunctionPair(
            "currin", Hypercube((0.0, 0.0), (1.0, 1.0)), _currin_high, _currin_low,
            description="Currin exponential; f_l averages f_h over four +-0.05 offsets (x2 floored at 0)",
        ),
        FunctionPair(
            "branin", Hypercube((-5.0, 0.0), (10.0, 15.0)), _branin_high, _branin_low,
            description="Branin; f_l = 10 sqrt(f_h(x-2)) + 2(x1-0.5) - 3(3x2-1) - 1",
        ),
        FunctionPair(
            "park91b", Hypercube((0.0,) * 4, (1.0,) * 4), _park91b_high, _park91b_low,
            description="f_h = 2/3 exp(x1+x2) - x4 sin(x3) + x3; f_l = 1.2 f_h - 1",
        ),
        FunctionPair(
            "borehole",
            Hypercube(
                (0.05, 100.0, 63070.0, 990.0, 63.1, 700.0, 1120.0, 9855.0),
                (0.15, 50000.0, 115600.0, 1110.0, 116.0, 820.0, 1680.0, 12045.0),
            ),
            partial(_borehole, scale=2 * np.pi, offset=1.0),
            partial(_borehole, scale=5.0, offset=1.5),
            description="Borehole flow; f_l replaces 2*pi by 5 and the leading 1 by 1.5",
        ),
    ]
    for d in (2, 3, 5, 10):
        pairs.append(
            FunctionPair(
                f"rosenbrock{d}", Hypercube((-2.0,) * d, (2.0,) * d),
                _rosenbrock_high, _rosenbrock_low,
                description=(
                    "Rosenbrock; f_l = sum 50(x_{i+1}-x_i^2)^2 + (-2-x_i)^2 - 0.5 sum x_i"
                ),
            )
        )
    return pairs


_CATALOGUE = {pair.id: pair for pair in _literature()}


def list_literature_pairs() -> list[FunctionPair]:
    """The literature catalogue, in a fixed order."""
    return list(_CATALOGUE.values())


# ---------------------------------------------------------------------------
# Disturbance-based pairs


@dataclass(frozen=True)
class DisturbanceConfig:
    """Parameters of a disturbance added to a base function.

    ``radius`` is a fraction of the unit-cube diagonal for the centre-based
    mode and a fraction of the probed value range for the height-based mode.
    """

    mode: str = "centre-based"
    amplitude: float = 1.0
    num_centres: int = 1
    radius: float = 0.1
    target_height_quantile: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("centre-based", "height-based"):
            raise ConfigError(f"unknown disturbance mode {self.mode!r}")
        if not np.isfinite(self.amplitude):
            raise ConfigError(f"amplitude must be finite, got {self.amplitude}")
        if not 0 < self.radius <= 1:
            raise ConfigError(f"radius must lie in (0, 1], got {self.radius}")
        if not 0 <= self.target_height_quantile <= 1:
            raise ConfigError("target_height_quantile must lie in [0, 1]")
        if self.mode == "centre-based" and self.num_centres < 1:
            raise ConfigError("num_centres must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown disturbance fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "DisturbanceConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def bump(t):
    """Smooth radial bump: 1 at ``t = 0``, exactly 0 for ``|t| >= 1``."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inside = t < 1
    out[inside] = np.exp(1 - 1 / (1 - t[inside] ** 2))
    return out


class _Disturbed:
    """Callable ``base + disturbance``; kept as a class so pairs pickle."""

    def __init__(self, base, domain: Hypercube, cfg: DisturbanceConfig):
        self.base = base
        self.domain = domain
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d = domain.d
        if cfg.mode == "centre-based":
            self.centres = rng.uniform(size=(cfg.num_centres, d))
            self.scale = cfg.radius * np.sqrt(d)
        else:
            probe = domain.from_unit(rng.uniform(size=(1000, d)))
            values = np.asarray(base(probe), dtype=float)
            self.level = float(np.quantile(values, cfg.target_height_quantile))
            self.scale = cfg.radius * float(np.ptp(values))

    def disturbance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.cfg.amplitude == 0 or self.scale == 0:
            return np.zeros(len(X))
        if self.cfg.mode == "centre-based":
            U = self.domain.to_unit(X)
            dist = np.linalg.norm(U[:, None, :] - self.centres[None, :, :], axis=2)
            return self.cfg.amplitude * bump(dist / self.scale).sum(axis=1)
        values = np.asarray(self.base(X), dtype=float)
        return self.cfg.amplitude * bump((values - self.level) / self.scale)

    def __call__(self, X):
        base = np.asarray(self.base(X), dtype=float)
        if self.cfg.amplitude == 0:
            return base
        return base + self.disturbance(X)


def make_disturbance_pair(base, cfg: DisturbanceConfig, *, domain: Hypercube | None = None,
                          pair_id: str | None = None) -> FunctionPair:
    """Build a pair whose low fidelity is ``base`` plus a seeded disturbance.

    Parameters
    ----------
    base : FunctionPair or callable
        If a pair, its high fidelity is the base function and its domain is
        used. A bare callable requires ``domain``.
    cfg : DisturbanceConfig
    domain : Hypercube, optional
    pair_id : str, optional
        Defaults to a name derived from the base id and the config.
    """
    if isinstance(base, FunctionPair):
        base_id, fn, domain = base.id, base.high, base.domain
    else:
        if domain is None:
            raise ConfigError("a domain is required when base is a bare callable")
        base_id, fn = getattr(base, "__name__", "base"), base
    if pair_id is None:
        tag = "c" if cfg.mode == "centre-based" else "h"
        pair_id = f"{base_id}~{tag}{cfg.seed}"
    low = _Disturbed(fn, domain, cfg)
    return FunctionPair(
        pair_id, domain, fn, low, source_tag="disturbance",
        description=f"{base_id} + {cfg.mode} disturbance {cfg.to_dict()}",
    )


def get_pair(pair_id: str, registry: dict[str, FunctionPair] | None = None) -> FunctionPair:
    """Look up a pair by id in `registry` (default: the literature catalogue)."""
    registry = _CATALOGUE if registry is None else registry
    try:
        return registry[pair_id]
    except KeyError:
        raise ConfigError(f"unknown function pair id {pair_id!r}") from None
