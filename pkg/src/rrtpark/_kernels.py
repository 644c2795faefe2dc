"""Compiled inner loops. Vertices are 0-based and ``parent[v] < v``."""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def park_psi(parent, cars):
    """Cars visiting each vertex, by one reverse sweep over the labels."""
    n = cars.shape[0]
    psi = cars.astype(np.int64)
    for v in range(n - 1, 0, -1):
        if psi[v] > 1:
            psi[parent[v]] += psi[v] - 1
    return psi


@numba.njit(cache=True)
def park_psi_batch(parents, cars):
    """Row-wise ``park_psi`` for small trees stacked in a 2-D array."""
    rows, n = cars.shape
    psi = cars.astype(np.int64)
    for r in range(rows):
        for v in range(n - 1, 0, -1):
            if psi[r, v] > 1:
                psi[r, parents[r, v]] += psi[r, v] - 1
    return psi


@numba.njit(cache=True)
def push_surplus(parent, psi, v, stop_at):
    """Send the surplus of a freshly attached vertex ``v`` rootward.

    Returns the number of cars leaving through the root. Propagation also
    halts after updating ``stop_at`` (pass -1 to run to the root).
    """
    o = psi[v] - 1
    if o <= 0:
        return 0
    u = parent[v]
    while u >= 0:
        old = psi[u]
        psi[u] = old + o
        if old == 0:
            o -= 1
            if o == 0:
                return 0
        if u == stop_at:
            return 0
        u = parent[u]
    return o


@numba.njit(cache=True)
def incremental_advance(parent, psi, cars, start, stop, flux, target):
    """Attach vertices ``start..stop-1`` one at a time.

    ``parent`` and ``cars`` must already hold the draws for those vertices.
    Stops early, right after the vertex whose arrival brings the flux to
    ``target``. Returns ``(vertices_processed_up_to, flux)``.
    """
    for v in range(start, stop):
        psi[v] = cars[v]
        flux += push_surplus(parent, psi, v, -1)
        if flux >= target:
            return v + 1, flux
    return stop, flux


@numba.njit(cache=True)
def _mark_subtree(parent, n, root, rel):
    in_sub = np.zeros(n, dtype=np.bool_)
    in_sub[root] = True
    rel[0] = root
    m = 1
    for v in range(root + 1, n):
        p = parent[v]
        if p >= 0 and in_sub[p]:
            in_sub[v] = True
            rel[m] = v
            m += 1
    return m


@numba.njit(cache=True)
def spine_empty_indicators(rng, birth, cdf, max_vertices):
    """Exact indicators ``psi(S_k) == 0`` at time 0 for the grafted limit tree.

    ``birth[k] = -(tau_0 + ... + tau_k)`` is the birth time of spine vertex
    ``S_k``; ``S_k`` is grafted as a child of ``S_{k+1}``. Every vertex spawns
    children at rate 1 until time 0. Occupancy only ever grows, so once
    ``S_k`` is occupied its indicator is settled and only the subtree of the
    highest unsettled spine vertex keeps growing.

    Returns ``(empty, n_vertices)``; ``n_vertices == -1`` flags that
    ``max_vertices`` was exceeded.
    """
    K = birth.shape[0] - 1
    cap = 1024
    parent = np.empty(cap, dtype=np.int64)
    psi = np.empty(cap, dtype=np.int64)
    rel = np.empty(cap, dtype=np.int64)
    spine = np.full(K + 1, -1, dtype=np.int64)
    empty = np.zeros(K + 1, dtype=np.bool_)

    n = 0
    nrel = 0
    j = K
    nxt = K
    t = 0.0
    while True:
        while j >= 0 and spine[j] >= 0 and psi[spine[j]] >= 1:
            j -= 1
        if j < 0:
            break
        if spine[j] < 0:
            # every existing spine vertex is settled: jump to the next graft
            t = birth[j]
            p = -2
        else:
            t_graft = birth[nxt] if nxt >= 0 else 0.0
            gap = rng.standard_exponential() / nrel
            if t + gap < t_graft:
                t += gap
                p = rel[int(rng.random() * nrel)]
            else:
                if nxt < 0:
                    break
                t = t_graft
                p = -2
        if n == cap:
            if cap >= max_vertices:
                return empty, -1
            cap = min(2 * cap, max_vertices)
            parent2 = np.empty(cap, dtype=np.int64)
            psi2 = np.empty(cap, dtype=np.int64)
            rel2 = np.empty(cap, dtype=np.int64)
            parent2[:n] = parent[:n]
            psi2[:n] = psi[:n]
            rel2[:nrel] = rel[:nrel]
            parent, psi, rel = parent2, psi2, rel2
        c = np.searchsorted(cdf, rng.random(), side="right")
        v = n
        n += 1
        psi[v] = c
        if p == -2 or spine[j] < 0:
            k = nxt
            nxt -= 1
            spine[k] = v
            parent[v] = spine[k + 1] if k < K else -1
            if spine[j] == v:
                rel[0] = v
                nrel = 1
                continue
        else:
            parent[v] = p
        rel[nrel] = v
        nrel += 1
        push_surplus(parent, psi, v, spine[j])
        if psi[spine[j]] >= 1:
            while j >= 0 and spine[j] >= 0 and psi[spine[j]] >= 1:
                j -= 1
            if j >= 0 and spine[j] >= 0:
                nrel = _mark_subtree(parent, n, spine[j], rel)
    for k in range(K + 1):
        empty[k] = spine[k] >= 0 and psi[spine[k]] == 0
    return empty, n


@numba.njit(cache=True)
def sparse_root_visits(rng, verts, counts):
    """Root visits when only ``verts`` (sorted, 0-based) receive cars.

    Parents are drawn lazily, uniform on the smaller labels, along the
    ancestor lines of the car vertices; all other vertices stay empty and
    off every car's route, so they cannot change the outcome.
    """
    parent = numba.typed.Dict.empty(numba.types.int64, numba.types.int64)
    psi = numba.typed.Dict.empty(numba.types.int64, numba.types.int64)
    psi[0] = 0
    for i in range(verts.shape[0]):
        psi[verts[i]] = counts[i]
    for i in range(verts.shape[0]):
        u = verts[i]
        while u != 0 and u not in parent:
            p = np.int64(rng.random() * u)
            parent[u] = p
            if p not in psi:
                psi[p] = 0
            u = p
    labels = np.empty(len(parent), dtype=np.int64)
    i = 0
    for u in parent.keys():
        labels[i] = u
        i += 1
    labels.sort()
    for i in range(labels.shape[0] - 1, -1, -1):
        u = labels[i]
        if psi[u] > 1:
            psi[parent[u]] += psi[u] - 1
    return psi[0]
