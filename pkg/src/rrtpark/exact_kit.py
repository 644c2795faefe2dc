"""Exact small-size combinatorics and the analytic bounds used as oracles.

Plane trees are stored by their preorder parent array, children left to
right, so ``parent[v] < v`` and the parking kernels apply unchanged.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from . import _kernels
from .car_laws import CarLaw, GeneralFamily, family_law

MAX_PLANE_N = 12
MAX_FPT_N = 9
MAX_EXACT_FLUX_N = 7


@dataclass(frozen=True)
class PlaneTree:
    parent: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.parent)

    def to_brackets(self) -> str:
        kids: list[list[int]] = [[] for _ in self.parent]
        for v, p in enumerate(self.parent[1:], 1):
            kids[p].append(v)

        def enc(v: int) -> str:
            return "(" + "".join(enc(w) for w in kids[v]) + ")"

        return enc(0)


@dataclass(frozen=True)
class FullyParkedInstance:
    shape: PlaneTree
    cars: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def m(self) -> int:
        return sum(self.cars)


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def _balanced(pairs: int) -> Iterator[str]:
    # lexicographic with "(" < ")"
    def rec(prefix: str, opened: int, closed: int):
        if closed == pairs:
            yield prefix
            return
        if opened < pairs:
            yield from rec(prefix + "(", opened + 1, closed)
        if closed < opened:
            yield from rec(prefix + ")", opened, closed + 1)

    yield from rec("", 0, 0)


def enum_plane_trees(n: int) -> Iterator[PlaneTree]:
    """Every plane tree with ``n`` vertices, once each, in bracket-word order."""
    if not 1 <= n <= MAX_PLANE_N:
        raise ValueError(f"n must lie in 1..{MAX_PLANE_N}, got {n}")
    for word in _balanced(n - 1):
        parent = [-1]
        stack = [0]
        for ch in word:
            if ch == "(":
                parent.append(stack[-1])
                stack.append(len(parent) - 1)
            else:
                stack.pop()
        yield PlaneTree(tuple(parent))


@lru_cache(maxsize=None)
def _all_configs(n: int, K: int) -> np.ndarray:
    return np.array(list(itertools.product(range(K + 1), repeat=n)), dtype=np.int64)


def _fpt_rows(n: int, K: int):
    """Per shape: (shape, configs that fully park it, root visits)."""
    configs = _all_configs(n, K)
    for shape in enum_plane_trees(n):
        parents = np.broadcast_to(np.array(shape.parent, dtype=np.int64), configs.shape)
        psi = _kernels.park_psi_batch(np.ascontiguousarray(parents), configs)
        full = np.all(psi >= 1, axis=1)
        yield shape, configs[full], psi[full, 0]


def _check_fpt_args(n: int, m: int, K: int) -> None:
    if not 1 <= n <= MAX_FPT_N:
        raise ValueError(f"n must lie in 1..{MAX_FPT_N}, got {n}")
    if K < 1 or not n <= m <= n * K:
        raise ValueError(f"need n <= m <= n*K, got n={n}, m={m}, K={K}")


def iter_fpt(n: int, m: int, K: int) -> Iterator[FullyParkedInstance]:
    """Fully parked plane trees with ``n`` vertices and ``m`` cars (``c_v <= K``)."""
    _check_fpt_args(n, m, K)
    for shape, rows, root in _fpt_rows(n, K):
        keep = rows.sum(axis=1) == m
        if np.any(root[keep] != m - n + 1):
            raise AssertionError("fully parked tree with wrong number of root visits")
        for row in rows[keep]:
            yield FullyParkedInstance(shape, tuple(int(c) for c in row))


def count_fpt(n: int, m: int, K: int) -> int:
    return sum(1 for _ in iter_fpt(n, m, K))


def fpt_table(n_max: int, K: int) -> list[tuple[int, int, int]]:
    """``(n, m, |FPT(n, m)|)`` for every ``n <= n_max`` and ``n <= m <= nK``."""
    out = []
    for n in range(1, n_max + 1):
        _check_fpt_args(n, n, K)
        counts = np.zeros(n * K + 1, dtype=np.int64)
        for _, rows, _ in _fpt_rows(n, K):
            counts += np.bincount(rows.sum(axis=1), minlength=n * K + 1)
        out.extend((n, m, int(counts[m])) for m in range(n, n * K + 1))
    return out


def _recursive_tree_parents(n: int) -> np.ndarray:
    choices = [range(v) for v in range(1, n)]
    rows = [(-1,) + combo for combo in itertools.product(*choices)]
    return np.array(rows, dtype=np.int64).reshape(len(rows), n)


def exact_expected_flux(n: int, law: CarLaw) -> float:
    """Mean flux over all ``(n-1)!`` recursive trees and all car configurations."""
    if not 1 <= n <= MAX_EXACT_FLUX_N:
        raise ValueError(f"n must lie in 1..{MAX_EXACT_FLUX_N}, got {n}")
    configs = _all_configs(n, law.K)
    pmf = np.asarray(law.pmf)
    weights = pmf[configs].prod(axis=1)
    terms = []
    for parent in _recursive_tree_parents(n):
        parents = np.ascontiguousarray(np.broadcast_to(parent, configs.shape))
        psi = _kernels.park_psi_batch(parents, configs)
        flux = np.maximum(psi[:, 0] - 1, 0)
        terms.append(math.fsum(weights * flux))
    return math.fsum(terms) / math.factorial(n - 1)


def subcritical_constants(family: GeneralFamily) -> tuple[float, float]:
    """``(C, c)`` with ``C = 8 (K+1) max_j C_j`` and ``c = 1 / (2C)``."""
    C = 8.0 * (family.K + 1) * family.max_C
    return C, 1.0 / (2.0 * C)


def alpha_small_enough(family: GeneralFamily, alpha: float) -> bool:
    """Whether ``P(k cars) <= 2 C_k alpha**(beta_k k)`` for every ``k >= 1``."""
    law = family_law(family, alpha)
    for k in range(1, family.K + 1):
        c = family.C.get(k, 0.0)
        bound = 2.0 * c * alpha ** (family.beta[k] * k) if c else 0.0
        if law.prob(k) > bound * (1 + 1e-12) + 1e-300:
            return False
    return True


@dataclass(frozen=True)
class FirstMomentBound:
    """Upper bounds on the mean number of cars visiting the root of a
    continuous-time tree of age ``t``.

    ``truncated_sum`` weighs every fully parked instance with its exact car
    probability; ``coarse_sum`` uses the cruder ``(2 max C)^n alpha^(beta* m)``
    weight on the same cells. ``closed_form`` is the geometric-series bound
    over all cells, scaled by the plane-tree constant ``cst``, and is ``inf``
    when the series diverges. ``tail`` bounds the cells outside the
    truncation by the same series.
    """

    t: float
    alpha: float
    n_max: int
    m_max: int
    truncated_sum: float
    coarse_sum: float
    closed_form: float
    tail: float
    diverged: bool
    alpha_small: bool


def first_moment_bound(
    t: float,
    family: GeneralFamily,
    alpha: float,
    n_max: int,
    m_max: int,
    cst: float = 1.0,
) -> FirstMomentBound:
    if t <= 0:
        raise ValueError("t must be positive")
    if not 1 <= n_max <= MAX_FPT_N:
        raise ValueError(f"n_max must lie in 1..{MAX_FPT_N}")
    law = family_law(family, alpha)
    pmf = np.asarray(law.pmf)
    K = family.K
    bs = family.beta_star
    C, _ = subcritical_constants(family)
    two_max_c = 2.0 * family.max_C
    a = alpha**bs

    exact_terms = []
    coarse_terms = []
    for n in range(1, n_max + 1):
        per_m = np.zeros(n * K + 1)
        counts = np.zeros(n * K + 1, dtype=np.int64)
        for _, rows, _ in _fpt_rows(n, K):
            ms = rows.sum(axis=1)
            w = pmf[rows].prod(axis=1)
            per_m += np.bincount(ms, weights=w, minlength=n * K + 1)
            counts += np.bincount(ms, minlength=n * K + 1)
        for m in range(n, min(m_max, n * K) + 1):
            mult = (m - n + 1) * t ** (n - 1)
            exact_terms.append(mult * per_m[m])
            coarse_terms.append(mult * counts[m] * two_max_c**n * alpha ** (bs * m))
    truncated = math.fsum(exact_terms)
    coarse = math.fsum(coarse_terms)

    x = C * t * a
    diverged = x >= 1.0 or a >= 1.0
    if diverged:
        closed = tail = math.inf
    else:
        closed = cst / (t * (1.0 - a) ** 2) / (1.0 - x) ** 2
        # same series restricted to n >= 1, minus its truncated cells
        total = cst / t * (x / (1.0 - x)) / (1.0 - a) ** 2
        inside = math.fsum(
            cst / t * (m - n + 1) * (C * t) ** n * a**m
            for n in range(1, n_max + 1)
            for m in range(n, m_max + 1)
        )
        tail = max(total - inside, 0.0)
    return FirstMomentBound(
        t=t,
        alpha=alpha,
        n_max=n_max,
        m_max=m_max,
        truncated_sum=truncated,
        coarse_sum=coarse,
        closed_form=closed,
        tail=tail,
        diverged=diverged,
        alpha_small=alpha_small_enough(family, alpha),
    )


def spine_bound(delta: float, k: int) -> float:
    """``(1 + delta)^-k``: bound on the chance that spine vertex ``S_k`` stays empty."""
    return (1.0 + delta) ** (-k)


def root_empty_bound(delta: float, t: float) -> float:
    """``exp(-delta t)``: bound on the chance the root of a tree of age ``t`` stays empty."""
    return math.exp(-delta * t)
