"""Car-arrival laws: the binary family and bounded families with power-law
small-alpha asymptotics.

A law is a pmf on ``{0, ..., K}``. Families map a density ``alpha`` (the mean
number of cars per vertex) to a law.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

_TOL = 1e-12


class AlphaOutOfRange(ValueError):
    """Raised when a family cannot produce a valid pmf at the requested alpha."""

    def __init__(self, alpha: float, max_alpha: float):
        super().__init__(
            f"alpha={alpha!r} outside the validated range [0, {max_alpha:.9g}]"
        )
        self.alpha = alpha
        self.max_alpha = max_alpha


@dataclass(frozen=True)
class CarLaw:
    """Bounded distribution of the number of cars arriving at one vertex."""

    pmf: tuple[float, ...]

    def __post_init__(self):
        pmf = tuple(float(p) for p in self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if not pmf:
            raise ValueError("pmf must have at least one atom")
        if any(p < 0.0 or p > 1.0 for p in pmf):
            raise ValueError(f"pmf entries must lie in [0, 1]: {pmf}")
        if abs(sum(pmf) - 1.0) > _TOL:
            raise ValueError(f"pmf sums to {sum(pmf)!r}, not 1")

    @classmethod
    def point_mass(cls, k: int) -> "CarLaw":
        return cls(tuple([0.0] * k + [1.0]))

    @property
    def K(self) -> int:
        return len(self.pmf) - 1

    @property
    def mean(self) -> float:
        return float(sum(k * p for k, p in enumerate(self.pmf)))

    @property
    def delta(self) -> float:
        """Probability that a vertex receives at least two cars."""
        return max(0.0, 1.0 - sum(self.pmf[:2]))

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c

    def prob(self, k: int) -> float:
        return self.pmf[k] if 0 <= k <= self.K else 0.0

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform; monotone in the law for a fixed ``u``."""
        return np.searchsorted(self.cdf, u, side="right").astype(np.int64)

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return int(self.from_uniforms(np.array([rng.random()]))[0])
        return self.from_uniforms(rng.random(size))


def binary_law(alpha: float) -> CarLaw:
    """Zero cars with probability ``1 - alpha/2``, two cars otherwise."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    return CarLaw((1.0 - alpha / 2.0, 0.0, alpha / 2.0))


def assign_cars(tree, law: CarLaw, rng: np.random.Generator) -> np.ndarray:
    """One i.i.d. draw from ``law`` per vertex of ``tree``."""
    return law.sample(rng, tree.n)


@dataclass(frozen=True)
class GeneralFamily:
    """Family with ``P(k cars) = C_k * alpha**(beta_k * k)`` for ``k >= 2``.

    The mass on one car balances the mean to exactly ``alpha``; the rest sits
    on zero. ``C`` and ``beta`` are keyed by car count ``1..K``. An entry for
    ``k = 1`` only documents the asymptotics of the balancing mass and enters
    ``beta_star``; it does not change the pmf.
    """

    K: int
    C: Mapping[int, float]
    beta: Mapping[int, float]
    max_alpha: float = field(init=False)

    def __post_init__(self):
        C = {int(k): float(v) for k, v in self.C.items() if float(v) != 0.0}
        beta = {int(k): float(v) for k, v in self.beta.items()}
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "beta", beta)
        if self.K < 1:
            raise ValueError("K must be at least 1")
        for k, c in C.items():
            if not 1 <= k <= self.K:
                raise ValueError(f"coefficient index {k} outside 1..{self.K}")
            if c < 0:
                raise ValueError(f"C_{k} must be nonnegative")
            if k not in beta:
                raise ValueError(f"missing exponent beta_{k} for C_{k} > 0")
            if beta[k] < 1.0 / k - _TOL:
                raise ValueError(f"beta_{k}={beta[k]} is below 1/{k}")
        if not any(k >= 2 for k in C):
            raise ValueError("need some C_k > 0 with k >= 2 so that delta(alpha) > 0")
        if self.beta_star > 1.0 + _TOL:
            raise ValueError(
                f"beta_star={self.beta_star} exceeds 1; declare C1 and b1=1"
            )
        object.__setattr__(self, "max_alpha", self._find_max_alpha())

    @property
    def beta_star(self) -> float:
        return min(self.beta[k] for k in self.C)

    @property
    def k_star(self) -> int:
        b = self.beta_star
        return min(k for k in self.C if self.beta[k] == b)

    @property
    def gamma(self) -> float:
        return min(self.beta[k] * k for k in self.C if k >= 2)

    @property
    def max_C(self) -> float:
        return max(self.C.values())

    def _upper_masses(self, alpha: float) -> dict[int, float]:
        return {
            k: c * alpha ** (self.beta[k] * k) for k, c in self.C.items() if k >= 2
        }

    def _is_valid(self, alpha: float) -> bool:
        upper = self._upper_masses(alpha)
        p1 = alpha - sum(k * p for k, p in upper.items())
        p0 = 1.0 - p1 - sum(upper.values())
        return p1 >= -_TOL and p0 >= -_TOL

    def _find_max_alpha(self) -> float:
        if self._is_valid(1.0):
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            if self._is_valid(mid):
                lo = mid
            else:
                hi = mid
        return lo

    def law(self, alpha: float) -> CarLaw:
        return family_law(self, alpha)


def family_law(family: GeneralFamily, alpha: float) -> CarLaw:
    if alpha < 0.0 or alpha > 1.0:
        raise AlphaOutOfRange(alpha, family.max_alpha)
    upper = family._upper_masses(alpha)
    pmf = np.zeros(family.K + 1)
    for k, p in upper.items():
        pmf[k] = p
    pmf[1] = alpha - sum(k * p for k, p in upper.items())
    pmf[0] = 1.0 - pmf[1:].sum()
    if pmf[1] < -_TOL or pmf[0] < -_TOL:
        raise AlphaOutOfRange(alpha, family.max_alpha)
    pmf = np.clip(pmf, 0.0, 1.0)
    return CarLaw(tuple(pmf))


def binary_family() -> GeneralFamily:
    return GeneralFamily(K=2, C={2: 0.5}, beta={2: 0.5})


def beta_star(family: GeneralFamily) -> float:
    return family.beta_star


def k_star(family: GeneralFamily) -> int:
    return family.k_star


def gamma(family: GeneralFamily) -> float:
    return family.gamma


def is_stochastically_increasing(family: GeneralFamily, alphas) -> bool:
    """Check that every CDF value is nonincreasing along an increasing grid."""
    cdfs = [np.cumsum(family_law(family, a).pmf) for a in alphas]
    return all(np.all(b <= a + _TOL) for a, b in zip(cdfs, cdfs[1:]))


@dataclass(frozen=True)
class LawSpec:
    """Parsed ``--law`` string: a binary or general family, optionally with alpha."""

    kind: str
    family: GeneralFamily
    alpha: float | None = None

    def law(self, alpha: float | None = None) -> CarLaw:
        a = self.alpha if alpha is None else alpha
        if a is None:
            raise ValueError("law spec carries no alpha; pass one explicitly")
        if self.kind == "binary":
            return binary_law(a)
        return family_law(self.family, a)

    @property
    def max_alpha(self) -> float:
        return 1.0 if self.kind == "binary" else self.family.max_alpha


_KEY = re.compile(r"^(C|b)(\d+)$")


def parse_law_spec(spec: str) -> LawSpec:
    """Parse ``binary:alpha=0.5`` or ``family:K=4,C2=0.5,b2=0.5,alpha=0.01``."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    params: dict[str, str] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"malformed law parameter {item!r}")
        params[key.strip()] = value.strip()
    alpha = float(params.pop("alpha")) if "alpha" in params else None
    if kind == "binary":
        if params:
            raise ValueError(f"unknown binary law parameters: {sorted(params)}")
        if alpha is not None:
            binary_law(alpha)
        return LawSpec("binary", binary_family(), alpha)
    if kind == "family":
        if "K" not in params:
            raise ValueError("family law spec needs K")
        K = int(params.pop("K"))
        C: dict[int, float] = {}
        beta: dict[int, float] = {}
        for key, value in params.items():
            m = _KEY.match(key)
            if m is None:
                raise ValueError(f"unknown family parameter {key!r}")
            (C if m.group(1) == "C" else beta)[int(m.group(2))] = float(value)
        family = GeneralFamily(K=K, C=C, beta=beta)
        if alpha is not None:
            family_law(family, alpha)
        return LawSpec("family", family, alpha)
    raise ValueError(f"unknown law kind {kind!r}")
