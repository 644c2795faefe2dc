"""Random recursive trees: discrete growth, the Yule-process construction and
the grafted limit tree seen from a typical vertex.

Vertices are stored 0-based: vertex ``i`` carries label ``i + 1`` and
``parent[i] < i`` for every ``i >= 1`` (``parent[0] == -1``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class RecursiveTree:
    """Labeled rooted tree whose labels increase away from the root."""

    parent: np.ndarray

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        if parent.ndim != 1 or parent.size == 0:
            raise ValueError("parent must be a nonempty 1-D array")
        if parent[0] != -1:
            raise ValueError("vertex 0 must be the root (parent -1)")
        if parent.size > 1:
            idx = np.arange(1, parent.size)
            if np.any(parent[1:] < 0) or np.any(parent[1:] >= idx):
                raise ValueError("parent[v] must lie in 0..v-1 for every v >= 1")
        parent.setflags(write=False)
        object.__setattr__(self, "parent", parent)

    @property
    def n(self) -> int:
        return int(self.parent.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, RecursiveTree) and np.array_equal(
            self.parent, other.parent
        )

    def __hash__(self) -> int:
        return hash(self.parent.tobytes())

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        # stable sort keeps each child list in ascending label order
        order = np.argsort(self.parent[1:], kind="stable") + 1
        counts = np.bincount(self.parent[1:], minlength=self.n)
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return offsets, order.astype(np.int64)

    def children(self, v: int) -> np.ndarray:
        offsets, order = self._csr
        return order[offsets[v] : offsets[v + 1]]

    def child_counts(self) -> np.ndarray:
        return np.diff(self._csr[0])

    def depth(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for v in range(1, self.n):
            d[v] = d[self.parent[v]] + 1
        return d

    def neighbors(self, v: int) -> list[int]:
        out = [int(u) for u in self.children(v)]
        if v > 0:
            out.append(int(self.parent[v]))
        return out

    def descendants(self, v: int) -> np.ndarray:
        """Vertex ``v`` and everything below it, in increasing order."""
        inside = np.zeros(self.n, dtype=bool)
        inside[v] = True
        for u in range(v + 1, self.n):
            if inside[self.parent[u]]:
                inside[u] = True
        return np.flatnonzero(inside)

    def subtree(self, v: int) -> "RecursiveTree":
        """Descendants of ``v`` relabeled in order, rooted at ``v``."""
        verts = self.descendants(v)
        index = np.full(self.n, -1, dtype=np.int64)
        index[verts] = np.arange(verts.size)
        par = index[self.parent[verts]]
        par[0] = -1
        return RecursiveTree(par)

    def to_text(self) -> str:
        lines = [str(self.n)]
        lines.extend(f"{v + 1} {p + 1}" for v, p in enumerate(self.parent[1:], 1))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RecursiveTree":
        rows = text.strip().splitlines()
        n = int(rows[0])
        if len(rows) != n:
            raise ValueError(f"expected {n - 1} edge lines, found {len(rows) - 1}")
        parent = np.full(n, -1, dtype=np.int64)
        for expected, row in enumerate(rows[1:], 2):
            v, p = (int(x) for x in row.split())
            if v != expected:
                raise ValueError(f"edge line for vertex {v} out of order")
            parent[v - 1] = p - 1
        return cls(parent)


def sample_recursive_tree(n: int, rng: np.random.Generator) -> RecursiveTree:
    """Uniform recursive tree on ``n`` vertices."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return RecursiveTree(_uniform_parents(n, rng))


def _uniform_parents(n: int, rng: np.random.Generator) -> np.ndarray:
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    if n > 1:
        parent[1:] = (rng.random(n - 1) * np.arange(1, n)).astype(np.int64)
    return parent


def grow(tree: RecursiveTree, rng: np.random.Generator) -> RecursiveTree:
    """Attach one new vertex to a uniform vertex of ``tree``."""
    p = int(rng.random() * tree.n)
    return RecursiveTree(np.append(tree.parent, p))


def sample_tree_at_time(t: float, rng: np.random.Generator) -> RecursiveTree:
    """Recursive tree of a Yule process cut at time ``t``.

    Draws the Geometric(e^-t) size first, then a uniform recursive tree of
    that size; the two steps have the joint law of the continuous-time tree.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return sample_recursive_tree(int(rng.geometric(math.exp(-t))), rng)


@dataclass(frozen=True, eq=False)
class YuleTree:
    """Plane binary tree of particles, cut at time ``t``.

    Node ``0`` is the initial particle. ``left``/``right`` are ``-1`` for a
    particle still alive at ``t``; otherwise it split at ``split[i]`` into
    ``left[i]`` (drawn on the left) and ``right[i]``.
    """

    t: float
    birth: np.ndarray
    split: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def alive(self) -> np.ndarray:
        return self.left < 0

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.alive))

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(~self.alive))


def sample_yule_tree(t: float, rng: np.random.Generator) -> YuleTree:
    """Event simulation of the rate-1 binary branching process up to ``t``."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    birth = [0.0]
    split: list[float] = []
    left: list[int] = []
    right: list[int] = []
    stack = [0]
    split.append(math.inf)
    left.append(-1)
    right.append(-1)
    while stack:
        i = stack.pop()
        s = birth[i] + rng.standard_exponential()
        if s > t:
            continue
        split[i] = s
        for side in (left, right):
            j = len(birth)
            birth.append(s)
            split.append(math.inf)
            left.append(-1)
            right.append(-1)
            side[i] = j
            stack.append(j)
    return YuleTree(
        t=float(t),
        birth=np.array(birth),
        split=np.array(split),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
    )


def yule_to_recursive(yule: YuleTree) -> RecursiveTree:
    """Contract left-going chains into vertices, labeling by creation time."""
    owner = np.full(yule.birth.size, -1, dtype=np.int64)
    owner[0] = 0
    created: list[tuple[float, int, int]] = []  # (time, provisional id, parent id)
    stack = [0]
    next_id = 1
    while stack:
        i = stack.pop()
        if yule.left[i] < 0:
            continue
        l, r = yule.left[i], yule.right[i]
        owner[l] = owner[i]
        owner[r] = next_id
        created.append((yule.split[i], next_id, owner[i]))
        next_id += 1
        stack.extend((l, r))
    created.sort()
    label = np.zeros(next_id, dtype=np.int64)
    for rank, (_, vid, _) in enumerate(created, 1):
        label[vid] = rank
    parent = np.full(next_id, -1, dtype=np.int64)
    for _, vid, pid in created:
        parent[label[vid]] = label[pid]
    return RecursiveTree(parent)


def _grow_window(parent: list, rng: np.random.Generator, duration: float) -> None:
    """Let every vertex spawn children at rate 1 for ``duration`` time units."""
    t = 0.0
    while True:
        m = len(parent)
        chunk = max(64, m)
        gaps = rng.standard_exponential(chunk) / (m + np.arange(chunk))
        times = t + np.cumsum(gaps)
        k = int(np.searchsorted(times, duration))
        u = rng.random(k)
        parent.extend((u * (m + np.arange(k))).astype(np.int64).tolist())
        if k < chunk:
            return
        t = float(times[-1])


@dataclass(frozen=True, eq=False)
class LocalLimitSample:
    """The limit tree truncated at spine depth ``K``.

    ``tree`` is rooted at ``S_K`` with vertices in birth order; ``spine[k]``
    is the vertex index of ``S_k``, and ``tau`` holds the Exp(1) gaps.
    """

    K: int
    tau: np.ndarray
    spine: np.ndarray
    tree: RecursiveTree

    @property
    def distinguished(self) -> int:
        return int(self.spine[0])

    def descendants(self, k: int) -> np.ndarray:
        return self.tree.descendants(int(self.spine[k]))

    def spine_subtree(self, k: int) -> RecursiveTree:
        return self.tree.subtree(int(self.spine[k]))


def sample_local_limit(
    K: int, rng: np.random.Generator, max_vertices: int = 20_000_000
) -> LocalLimitSample:
    """Materialize the grafted Yule trees up to spine vertex ``S_K``.

    ``S_k`` is born at time ``-(tau_0 + ... + tau_k)``; every vertex spawns
    children at rate 1 until time 0, and ``S_{k-1}`` is grafted onto ``S_k``
    at its own birth time. Raises ``RuntimeError`` past ``max_vertices``
    (sizes are finite a.s. but heavy tailed).
    """
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    tau = rng.standard_exponential(K + 1)
    birth = -np.cumsum(tau)
    parent = [-1]
    spine = np.empty(K + 1, dtype=np.int64)
    spine[K] = 0
    for k in range(K - 1, -1, -1):
        _grow_window(parent, rng, birth[k] - birth[k + 1])
        if len(parent) > max_vertices:
            raise RuntimeError(f"local-limit sample exceeded {max_vertices} vertices")
        spine[k] = len(parent)
        parent.append(int(spine[k + 1]))
    _grow_window(parent, rng, -birth[0])
    if len(parent) > max_vertices:
        raise RuntimeError(f"local-limit sample exceeded {max_vertices} vertices")
    return LocalLimitSample(
        K=K, tau=tau, spine=spine, tree=RecursiveTree(np.array(parent))
    )


@dataclass(frozen=True)
class Ball:
    """Canonical parenthesis code of a rooted radius-``r`` neighborhood."""

    radius: int
    code: str

    def __str__(self) -> str:
        return self.code


def _canonical(adj: dict[int, list[int]], root: int) -> str:
    # iterative AHU: children codes sorted so the string is isomorphism-invariant
    order = [root]
    from_ = {root: -1}
    for u in order:
        for w in adj[u]:
            if w != from_[u]:
                from_[w] = u
                order.append(w)
    code: dict[int, str] = {}
    for u in reversed(order):
        kids = sorted(code.pop(w) for w in adj[u] if w != from_[u])
        code[u] = "(" + "".join(kids) + ")"
    return code[root]


def ball(tree: RecursiveTree, v: int, r: int) -> Ball:
    """Radius-``r`` neighborhood of ``v`` in the (undirected) tree metric."""
    if not 0 <= v < tree.n:
        raise ValueError(f"vertex {v} out of range for a tree of size {tree.n}")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    adj: dict[int, list[int]] = {v: []}
    frontier = [v]
    for _ in range(r):
        nxt = []
        for u in frontier:
            for w in tree.neighbors(u):
                if w not in adj:
                    adj[w] = [u]
                    adj[u].append(w)
                    nxt.append(w)
        frontier = nxt
    return Ball(r, _canonical(adj, v))


def _random_fringe(age: float, depth: int, rng: np.random.Generator) -> list:
    """Nested child lists of a rate-1 recursive tree of given age, cut at ``depth``."""
    if depth <= 0:
        return []
    k = rng.poisson(age)
    ages = rng.random(k) * age
    return [_random_fringe(a, depth - 1, rng) for a in ages]


def sample_local_limit_ball(r: int, rng: np.random.Generator) -> Ball:
    """Exact draw of the radius-``r`` ball around ``S_0`` in the limit tree.

    Only spine vertices ``S_0..S_r`` and their fringe within distance ``r``
    are generated: a vertex of age ``a`` has Poisson(a) children with ages
    uniform on ``(0, a)``.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    ages = np.cumsum(rng.standard_exponential(r + 1))
    adj: dict[int, list[int]] = {}
    counter = iter(range(1 << 62))

    def attach(node_children: list, parent_id: int) -> None:
        for kids in node_children:
            c = next(counter)
            adj[c] = [parent_id]
            adj[parent_id].append(c)
            attach(kids, c)

    spine_ids = [next(counter) for _ in range(r + 1)]
    for s in spine_ids:
        adj[s] = []
    for k in range(r):
        adj[spine_ids[k]].append(spine_ids[k + 1])
        adj[spine_ids[k + 1]].append(spine_ids[k])
    for k, s in enumerate(spine_ids):
        attach(_random_fringe(ages[k], r - k, rng), s)
    return Ball(r, _canonical(adj, spine_ids[0]))
