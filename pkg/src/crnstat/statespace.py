"""Discrete state space of the reaction CTMC, truncated to a finite box.

Irreducible components are the closed classes of the in-box transition
graph. A class that has a transition leaving the box cannot be certified
closed and is reported with ``truncated=True``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .network import MassActionSystem, stoichiometric_matrix
from .structure import Subnetwork, conservation_laws, induced_subnetwork, mapped_subsystem

State = tuple[int, ...]


@dataclass(frozen=True)
class StateBox:
    upper: tuple[int, ...]

    def __post_init__(self):
        if any(u < 0 for u in self.upper):
            raise ValueError("box caps must be non-negative")

    @classmethod
    def uniform(cls, n: int, cap: int) -> "StateBox":
        return cls((cap,) * n)

    def contains(self, x: Sequence[int]) -> bool:
        return all(0 <= xi <= ui for xi, ui in zip(x, self.upper))

    def states(self) -> np.ndarray:
        grids = [np.arange(u + 1) for u in self.upper]
        if not grids:
            return np.zeros((1, 0), dtype=np.int64)
        mesh = np.meshgrid(*grids, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1).astype(np.int64)


@dataclass(frozen=True)
class IrreducibleComponent:
    states: tuple[State, ...]
    truncated: bool = False

    def __len__(self):
        return len(self.states)

    def __contains__(self, x) -> bool:
        return tuple(int(v) for v in x) in self._index

    @property
    def _index(self) -> frozenset:
        return frozenset(self.states)

    def as_array(self) -> np.ndarray:
        return np.array(self.states, dtype=np.int64).reshape(len(self.states), -1)


@dataclass(frozen=True)
class ComponentAnalysis:
    """Closed classes of a region plus its transient states.

    ``certified_transient`` holds the transient states that reach a
    certified (non-truncated) component inside the region, so they are
    transient in the untruncated chain as well.
    """

    components: tuple[IrreducibleComponent, ...]
    transient: tuple[State, ...]
    certified_transient: tuple[State, ...]
    truncated: bool

    def component_of(self, x: Sequence[int]) -> IrreducibleComponent | None:
        x = tuple(int(v) for v in x)
        for comp in self.components:
            if x in comp:
                return comp
        return None


@dataclass(frozen=True)
class GammaSystem:
    component: IrreducibleComponent
    active_reactions: tuple[int, ...]
    subnetwork: Subnetwork
    system: MassActionSystem


@dataclass(frozen=True)
class EssentialityCertificate:
    classification: str  # "essential" | "almost_essential" | "neither"
    transient_count: int
    transient_states: tuple[State, ...]
    bound: int  # K: every certified transient state has Euclidean norm <= K
    uncertified_count: int


def active_reactions_at(sys: MassActionSystem, x: Sequence[int]) -> tuple[int, ...]:
    x = np.asarray(x, dtype=np.int64)
    src = sys.network.source_matrix()
    return tuple(int(j) for j in np.flatnonzero(np.all(src <= x, axis=1)))


def reachable_set(sys: MassActionSystem, x0: Sequence[int], box: StateBox) -> tuple[frozenset, bool]:
    """Breadth-first closure of ``x0`` under active reactions inside ``box``.

    Returns the reached states and whether some transition left the box.
    """
    x0 = tuple(int(v) for v in x0)
    if not box.contains(x0):
        raise ValueError("initial state lies outside the box")
    src = sys.network.source_matrix()
    xi = stoichiometric_matrix(sys.network).T
    seen = {x0}
    queue = deque([x0])
    truncated = False
    while queue:
        x = np.asarray(queue.popleft())
        for j in np.flatnonzero(np.all(src <= x, axis=1)):
            u = tuple(int(v) for v in x + xi[j])
            if not box.contains(u):
                truncated = True
                continue
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return frozenset(seen), truncated


def region_states(sys: MassActionSystem, box: StateBox, through: Sequence[int] | None = None) -> np.ndarray:
    """States of ``box``, optionally restricted to the compatibility class of ``through``."""
    states = box.states()
    if through is None:
        return states
    through = np.asarray(through, dtype=np.int64)
    laws = conservation_laws(sys.network)
    if laws.size == 0:
        return states
    keep = np.all(states @ laws.T == laws @ through, axis=1)
    return states[keep]


def _transition_graph(sys: MassActionSystem, states: np.ndarray, box: StateBox):
    """Sparse adjacency among ``states`` and a per-state leak flag."""
    n_states = states.shape[0]
    dims = np.asarray(box.upper, dtype=np.int64) + 1
    radix = np.concatenate([[1], np.cumprod(dims[::-1])[:-1]])[::-1] if dims.size else np.zeros(0, np.int64)
    keys = states @ radix if dims.size else np.zeros(n_states, dtype=np.int64)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    src = sys.network.source_matrix()
    xi = stoichiometric_matrix(sys.network).T
    rows, cols = [], []
    leak = np.zeros(n_states, dtype=bool)
    upper = np.asarray(box.upper, dtype=np.int64)
    for j in range(sys.network.k):
        active = np.all(states >= src[j], axis=1)
        targets = states + xi[j]
        in_box = np.all((targets >= 0) & (targets <= upper), axis=1)
        tkeys = targets @ radix
        pos = np.searchsorted(sorted_keys, tkeys)
        pos = np.minimum(pos, n_states - 1)
        found = in_box & (sorted_keys[pos] == tkeys)
        leak |= active & ~found
        ok = active & found
        rows.append(np.flatnonzero(ok))
        cols.append(order[pos[ok]])
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    adj = sparse.csr_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(n_states, n_states))
    return adj, leak


def _as_tuples(arr: np.ndarray) -> tuple[State, ...]:
    return tuple(tuple(int(v) for v in row) for row in arr)


def irreducible_components(
    sys: MassActionSystem,
    box: StateBox,
    through: Sequence[int] | None = None,
) -> ComponentAnalysis:
    """Enumerate closed communicating classes inside a box region.

    With ``through`` given, the region is the stoichiometric compatibility
    class of that state intersected with the box.
    """
    states = region_states(sys, box, through)
    if states.shape[0] == 0:
        raise ValueError("region is empty")
    adj, leak = _transition_graph(sys, states, box)
    n_scc, labels = connected_components(adj, directed=True, connection="strong")
    coo = adj.tocoo()
    crossing = labels[coo.row] != labels[coo.col]
    has_exit = np.zeros(n_scc, dtype=bool)
    has_exit[labels[coo.row[crossing]]] = True
    leaky = np.zeros(n_scc, dtype=bool)
    np.logical_or.at(leaky, labels, leak)

    comps = []
    certified_members = []
    for lab in np.flatnonzero(~has_exit):
        idx = np.flatnonzero(labels == lab)
        comps.append(IrreducibleComponent(_as_tuples(states[idx]), truncated=bool(leaky[lab])))
        if not leaky[lab]:
            certified_members.append(idx)
    transient_idx = np.flatnonzero(has_exit[labels])

    certified = np.zeros(states.shape[0], dtype=bool)
    if certified_members:
        # reverse reachability to certified closed classes
        rev = adj.T.tocsr()
        targets = np.concatenate(certified_members)
        hit = np.zeros(states.shape[0], dtype=bool)
        hit[targets] = True
        frontier = targets
        while frontier.size:
            nxt = rev[frontier].indices
            nxt = nxt[~hit[nxt]]
            nxt = np.unique(nxt)
            hit[nxt] = True
            frontier = nxt
        certified = hit
    cert_transient = transient_idx[certified[transient_idx]]
    comps.sort(key=lambda c: c.states)
    return ComponentAnalysis(
        components=tuple(comps),
        transient=tuple(sorted(_as_tuples(states[transient_idx]))),
        certified_transient=tuple(sorted(_as_tuples(states[cert_transient]))),
        truncated=bool(leak.any()),
    )


def active_reactions_on(sys: MassActionSystem, comp: IrreducibleComponent) -> tuple[int, ...]:
    arr = comp.as_array()
    src = sys.network.source_matrix()
    return tuple(int(j) for j in range(sys.network.k) if np.any(np.all(arr >= src[j], axis=1)))


def gamma_system(sys: MassActionSystem, comp: IrreducibleComponent, allow_truncated: bool = False) -> GammaSystem:
    if comp.truncated and not allow_truncated:
        raise ValueError("component is truncated; its active reaction set is not certified")
    active = active_reactions_on(sys, comp)
    sub = induced_subnetwork(sys.network, active)
    return GammaSystem(comp, active, sub, mapped_subsystem(sys, sub))


def is_positive_component(sys: MassActionSystem, comp: IrreducibleComponent) -> bool:
    if comp.truncated:
        raise ValueError("component is truncated; positivity is not certified")
    return len(active_reactions_on(sys, comp)) == sys.network.k


def certify_essential(sys: MassActionSystem, box: StateBox) -> EssentialityCertificate:
    """Box-relative essential / almost-essential classification.

    Only transient states that provably reach a certified component count.
    If there are none the box is "essential"; if all of them lie in the
    lower half of the box (so the transient set does not grow towards the
    box boundary) it is "almost_essential"; otherwise "neither".
    """
    analysis = irreducible_components(sys, box)
    cert = analysis.certified_transient
    uncertified = len(analysis.transient) - len(cert)
    uncertified += sum(len(c) for c in analysis.components if c.truncated)
    if not cert:
        return EssentialityCertificate("essential", 0, (), 0, uncertified)
    half = np.asarray(box.upper) // 2
    arr = np.asarray(cert)
    bound = int(np.ceil(np.max(np.linalg.norm(arr, axis=1))))
    label = "almost_essential" if np.all(arr <= half) else "neither"
    return EssentialityCertificate(label, len(cert), cert, bound, uncertified)


def path_accessible(sys: MassActionSystem, x: Sequence[int], u: Sequence[int], box: StateBox) -> bool:
    """True if ``u`` is reachable from ``x`` without leaving ``box``."""
    reached, _ = reachable_set(sys, x, box)
    return tuple(int(v) for v in u) in reached


def iter_box(box: StateBox) -> Iterable[State]:
    return itertools.product(*(range(u + 1) for u in box.upper))
