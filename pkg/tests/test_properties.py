import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _checks import (
    all_property_failures,
    check_gamma_lemmas,
    check_path_lemma,
    check_subnetwork_deficiency,
)
from crnstat import corpus
from crnstat.network import parse_network
from crnstat.statespace import StateBox, irreducible_components, gamma_system
from crnstat.structure import deficiency, is_weakly_reversible, terminal_reactions

CORPUS = corpus.corpus()


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_path_lemma_on_corpus(name):
    assert check_path_lemma(CORPUS[name], np.random.default_rng(0), trials=25) == []


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_gamma_lemmas_on_corpus(name):
    assert check_gamma_lemmas(CORPUS[name]) == []


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_subnetwork_deficiency_on_corpus(name):
    assert check_subnetwork_deficiency(CORPUS[name], np.random.default_rng(1), trials=25) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_properties_on_random_networks(seed):
    rng = np.random.default_rng(seed)
    assert all_property_failures(corpus.random_network(rng), rng) == []


def test_one_way_components_are_absorbing_singletons():
    sys = parse_network("A -> B : 1")
    an = irreducible_components(sys, StateBox((3, 3)))
    comps = [c for c in an.components if not c.truncated]
    assert all(len(c) == 1 for c in comps)
    assert all(gamma_system(sys, c).active_reactions == () for c in comps)
    assert terminal_reactions(sys.network) == ()


def test_swap_gamma_network_is_deficiency_zero_and_terminal():
    sys = CORPUS["absorbing_swap"]
    an = irreducible_components(sys, StateBox((6, 6)), through=(5, 1))
    gs = gamma_system(sys, an.component_of((5, 1)))
    # both reactions are active on the large component, but the whole network is not weakly reversible
    assert gs.active_reactions == (0, 1)
    assert deficiency(gs.subnetwork.network) == 1
    assert not is_weakly_reversible(sys.network)
