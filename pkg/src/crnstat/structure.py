"""Structural invariants of reaction networks.

Linkage classes, terminal strongly connected components, weak reversibility,
deficiency and conservation laws. All ranks are computed exactly over the
rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np

from .linalg import left_kernel, rank
from .network import MassActionSystem, ReactionNetwork, stoichiometric_matrix, subsystem


@dataclass(frozen=True)
class StructureReport:
    m: int
    ell: int
    s: int
    delta: int
    linkage_classes: tuple[tuple[int, ...], ...]
    terminal_sccs: tuple[tuple[int, ...], ...]
    terminal_reactions: tuple[int, ...]
    weakly_reversible: bool
    conservation_laws: tuple[tuple[int, ...], ...]

    def to_dict(self, net: ReactionNetwork | None = None) -> dict:
        out = {
            "m": self.m,
            "ell": self.ell,
            "s": self.s,
            "delta": self.delta,
            "linkage_classes": [list(c) for c in self.linkage_classes],
            "terminal_sccs": [list(c) for c in self.terminal_sccs],
            "terminal_reactions": list(self.terminal_reactions),
            "weakly_reversible": self.weakly_reversible,
            "conservation_laws": [list(w) for w in self.conservation_laws],
        }
        if net is not None:
            out["species"] = net.species_names
            out["complexes"] = [net.complex_label(i) for i in range(net.m)]
            out["reactions"] = [net.reaction_label(j) for j in range(net.k)]
        return out


@dataclass(frozen=True)
class Subnetwork:
    """Network induced by a subset of the parent's reactions.

    ``species_map``/``complex_map``/``reaction_map`` send indices of the
    induced network to indices of the parent.
    """

    parent: ReactionNetwork
    reaction_subset: tuple[int, ...]
    network: ReactionNetwork
    species_map: tuple[int, ...] = field(default=())
    complex_map: tuple[int, ...] = field(default=())
    reaction_map: tuple[int, ...] = field(default=())


def reaction_graph(net: ReactionNetwork) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(net.m))
    g.add_edges_from((r.source, r.target) for r in net.reactions)
    return g


def _sorted_sets(groups: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted(tuple(sorted(g)) for g in groups))


def linkage_classes(net: ReactionNetwork) -> tuple[tuple[int, ...], ...]:
    return _sorted_sets(nx.connected_components(reaction_graph(net).to_undirected()))


def terminal_sccs(net: ReactionNetwork) -> tuple[tuple[int, ...], ...]:
    """Sink strongly connected components of the reaction graph (singletons included)."""
    g = reaction_graph(net)
    cond = nx.condensation(g)
    sinks = [cond.nodes[v]["members"] for v in cond.nodes if cond.out_degree(v) == 0]
    return _sorted_sets(sinks)


def terminal_reactions(net: ReactionNetwork) -> tuple[int, ...]:
    owner = {}
    for i, scc in enumerate(terminal_sccs(net)):
        for c in scc:
            owner[c] = i
    return tuple(
        j
        for j, r in enumerate(net.reactions)
        if r.source in owner and owner.get(r.target) == owner[r.source]
    )


def conservation_laws(net: ReactionNetwork) -> np.ndarray:
    """Integer basis (rows) of the left kernel of the stoichiometric matrix."""
    return left_kernel(stoichiometric_matrix(net))


def deficiency(net: ReactionNetwork) -> int:
    if net.k == 0:
        return 0
    return net.m - len(linkage_classes(net)) - rank(stoichiometric_matrix(net))


def analyze_structure(net: ReactionNetwork) -> StructureReport:
    if net.k == 0:
        laws = tuple(tuple(int(v) for v in row) for row in np.eye(net.n, dtype=np.int64))
        return StructureReport(0, 0, 0, 0, (), (), (), True, laws)
    lcs = linkage_classes(net)
    s = rank(stoichiometric_matrix(net))
    tsccs = terminal_sccs(net)
    treac = terminal_reactions(net)
    laws = conservation_laws(net)
    delta = net.m - len(lcs) - s
    return StructureReport(
        m=net.m,
        ell=len(lcs),
        s=s,
        delta=delta,
        linkage_classes=lcs,
        terminal_sccs=tsccs,
        terminal_reactions=treac,
        weakly_reversible=len(treac) == net.k,
        conservation_laws=tuple(tuple(int(v) for v in row) for row in laws),
    )


def is_weakly_reversible(net: ReactionNetwork) -> bool:
    return len(terminal_reactions(net)) == net.k


def induced_subnetwork(net: ReactionNetwork, reaction_subset: Iterable[int]) -> Subnetwork:
    subset = tuple(sorted(set(reaction_subset)))
    if any(j < 0 or j >= net.k for j in subset):
        raise IndexError("reaction index out of range")
    dummy = MassActionSystem(net, (1.0,) * net.k)
    sub = subsystem(dummy, subset).network
    names = net.species_names
    species_map = tuple(names.index(s.name) for s in sub.species)
    complex_map = []
    for y in sub.complexes:
        full = [0] * net.n
        for i, v in zip(species_map, y):
            full[i] = v
        complex_map.append(net.complexes.index(tuple(full)))
    lookup = {(net.reactions[j].source, net.reactions[j].target): j for j in subset}
    reaction_map = tuple(lookup[(complex_map[r.source], complex_map[r.target])] for r in sub.reactions)
    return Subnetwork(net, subset, sub, species_map, tuple(complex_map), reaction_map)


def terminal_network(net: ReactionNetwork) -> Subnetwork:
    return induced_subnetwork(net, terminal_reactions(net))


def terminal_component_of(net: ReactionNetwork, y: int) -> Subnetwork:
    """Subnetwork formed by the terminal SCC containing complex ``y``."""
    for scc in terminal_sccs(net):
        if y in scc:
            members = set(scc)
            reactions = [j for j, r in enumerate(net.reactions) if r.source in members and r.target in members]
            if reactions:
                return induced_subnetwork(net, reactions)
    raise ValueError(f"complex {net.complex_label(y)} is not in the terminal network")


def subnetwork_deficiency_check(net: ReactionNetwork, subset: Iterable[int]) -> tuple[int, int, bool]:
    d_sub = deficiency(induced_subnetwork(net, subset).network)
    d_parent = deficiency(net)
    return d_sub, d_parent, d_sub <= d_parent


def mapped_subsystem(sys: MassActionSystem, sub: Subnetwork) -> MassActionSystem:
    """Mass-action system on ``sub.network`` with rates inherited from ``sys``."""
    return MassActionSystem(sub.network, tuple(sys.rates[j] for j in sub.reaction_map))
