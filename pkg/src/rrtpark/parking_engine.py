"""Parking dynamics on recursive trees.

Cars drive towards the root and park at the first empty vertex; cars that
pass the root without finding a spot form the flux.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .car_laws import CarLaw
from .rrt_core import RecursiveTree

CarConfig = np.ndarray


@dataclass(frozen=True, eq=False)
class ParkingResult:
    """Cars visiting each vertex (``psi``) and the outgoing flux at the root."""

    psi: np.ndarray
    flux: int

    @property
    def occupied(self) -> np.ndarray:
        return self.psi >= 1

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.psi))

    @property
    def root_visits(self) -> int:
        return int(self.psi[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParkingResult)
            and self.flux == other.flux
            and np.array_equal(self.psi, other.psi)
        )


def _check_config(tree: RecursiveTree, config) -> np.ndarray:
    cars = np.asarray(config, dtype=np.int64)
    if cars.shape != (tree.n,):
        raise ValueError(f"car config of shape {cars.shape} for a tree of size {tree.n}")
    if np.any(cars < 0):
        raise ValueError("car counts must be nonnegative")
    return cars


def config_to_text(config: CarConfig) -> str:
    """One ``"v c_v"`` line per vertex, 1-based labels."""
    return "".join(f"{v} {int(c)}\n" for v, c in enumerate(config, 1))


def config_from_text(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    cars = np.zeros(len(rows), dtype=np.int64)
    for expected, row in enumerate(rows, 1):
        v, c = (int(x) for x in row)
        if v != expected or c < 0:
            raise ValueError(f"bad car line {' '.join(row)!r}")
        cars[v - 1] = c
    return cars


def park(tree: RecursiveTree, config: CarConfig) -> ParkingResult:
    """Final parking state, computed in one leaf-to-root sweep."""
    cars = _check_config(tree, config)
    psi = _kernels.park_psi(tree.parent, cars)
    return ParkingResult(psi=psi, flux=max(int(psi[0]) - 1, 0))


def park_sequential(
    tree: RecursiveTree, config: CarConfig, order: Sequence[int]
) -> ParkingResult:
    """Drive cars one at a time; ``order`` lists the arrival vertex of each car."""
    cars = _check_config(tree, config)
    order = [int(v) for v in order]
    expected = Counter({v: int(c) for v, c in enumerate(cars) if c})
    if Counter(order) != expected:
        raise ValueError("order must list every car's arrival vertex exactly once")
    parked = np.zeros(tree.n, dtype=bool)
    psi = np.zeros(tree.n, dtype=np.int64)
    flux = 0
    parent = tree.parent
    for v in order:
        u = v
        while True:
            psi[u] += 1
            if not parked[u]:
                parked[u] = True
                break
            if u == 0:
                flux += 1
                break
            u = parent[u]
    return ParkingResult(psi=psi, flux=flux)


def parked_cluster(tree: RecursiveTree, result: ParkingResult) -> set[int]:
    """Root's component after keeping only edges between two occupied vertices."""
    occupied = result.occupied
    if not occupied[0]:
        return set()
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in tree.children(u):
            w = int(w)
            if occupied[w]:
                seen.add(w)
                queue.append(w)
    return seen


class IncrementalParker:
    """Grow the coupled recursive tree one vertex at a time, keeping parking exact.

    Randomness is drawn in fixed-size blocks (parent uniforms, then car
    uniforms), so the realized tree and cars depend only on the generator and
    not on how the growth is driven. Cars come from the law's inverse CDF,
    which makes runs with different laws on the same seed monotonically
    coupled.
    """

    block = 1 << 14

    def __init__(self, law: CarLaw, rng: np.random.Generator):
        self.law = law
        self.rng = rng
        self._cdf = law.cdf
        self._parent = np.empty(self.block, dtype=np.int64)
        self._cars = np.empty(self.block, dtype=np.int64)
        self._psi = np.zeros(self.block, dtype=np.int64)
        self._drawn = 0
        self.n = 0
        self.flux = 0

    def _draw_block(self) -> None:
        lo, hi = self._drawn, self._drawn + self.block
        if hi > self._parent.size:
            cap = 2 * self._parent.size
            for name in ("_parent", "_cars", "_psi"):
                old = getattr(self, name)
                new = np.zeros(cap, dtype=np.int64)
                new[:lo] = old[:lo]
                setattr(self, name, new)
        par = (self.rng.random(self.block) * np.arange(lo, hi)).astype(np.int64)
        if lo == 0:
            par[0] = -1
        self._parent[lo:hi] = par
        self._cars[lo:hi] = np.searchsorted(
            self._cdf, self.rng.random(self.block), side="right"
        )
        self._drawn = hi

    def _advance(self, stop: int, target: int) -> None:
        while self.n < stop and self.flux < target:
            if self.n >= self._drawn:
                self._draw_block()
            self.n, self.flux = _kernels.incremental_advance(
                self._parent, self._psi, self._cars, self.n,
                min(stop, self._drawn), self.flux, target,
            )

    def step(self) -> tuple[int, int]:
        """Attach the next vertex; return the new size and flux."""
        self._advance(self.n + 1, np.iinfo(np.int64).max)
        return self.n, self.flux

    def advance_to(self, n: int) -> int:
        """Grow to ``n`` vertices and return the flux."""
        self._advance(n, np.iinfo(np.int64).max)
        return self.flux

    def run_until_flux(self, target: int, n_cap: int) -> int:
        """Grow until the flux reaches ``target`` or the size reaches ``n_cap``."""
        if self.flux < target:
            self._advance(n_cap, target)
        return self.n

    @property
    def tree(self) -> RecursiveTree:
        return RecursiveTree(self._parent[: self.n].copy())

    @property
    def config(self) -> np.ndarray:
        return self._cars[: self.n].copy()

    def state(self) -> ParkingResult:
        psi = self._psi[: self.n].copy()
        if self.n and self.flux != max(int(psi[0]) - 1, 0):
            raise AssertionError("stored flux out of sync with root visits")
        return ParkingResult(psi=psi, flux=self.flux)


@dataclass(frozen=True)
class NotReached:
    """The flux stayed below the target up to ``n_cap`` vertices."""

    n_cap: int
    flux: int


def theta(law: CarLaw, C: int, n_cap: int, rng: np.random.Generator) -> int | NotReached:
    """First tree size at which the coupled flux reaches ``C``."""
    if C < 1 or n_cap < 1:
        raise ValueError("C and n_cap must be positive")
    if law.delta == 0.0:
        # at most one car per vertex: every car parks where it lands
        return NotReached(n_cap, 0)
    parker = IncrementalParker(law, rng)
    n = parker.run_until_flux(C, n_cap)
    if parker.flux >= C:
        return n
    return NotReached(n_cap, parker.flux)


def psi_sparse(n: int, law: CarLaw, rng: np.random.Generator) -> int:
    """Cars visiting the root of a uniform recursive tree of size ``n``.

    Only vertices that receive cars, and their ancestor lines, are drawn:
    each vertex's parent is an independent uniform on the smaller labels, so
    drawing parents lazily along the ancestor lines gives the exact law at a
    cost proportional to (number of car vertices) x depth.
    """
    p0 = law.pmf[0]
    k = int(rng.binomial(n, 1.0 - p0)) if p0 < 1.0 else 0
    if k == 0:
        return 0
    verts = np.sort(rng.choice(n, size=k, replace=False))
    pos = np.asarray(law.pmf[1:]) / (1.0 - p0)
    cdf = np.cumsum(pos)
    cdf[-1] = 1.0
    counts = np.searchsorted(cdf, rng.random(k), side="right") + 1
    return int(_kernels.sparse_root_visits(rng, verts.astype(np.int64), counts.astype(np.int64)))
