"""Worked example systems and random network generators used in tests.

Systems whose rates depend on an integer parameter (theta) are built for a
concrete value.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .network import MassActionSystem, build_system, parse_network
from .structure import analyze_structure, deficiency, is_weakly_reversible

# .crn sources for networks used throughout; rates are placeholders
TEXT = {
    "dimerization": "A + B <-> 2C : k1, k2",
    "absorbing_swap": "2A -> 2B : k1\nA + 3B -> 3A + B : k2",
    "terminal_demo": "2A <-> 2B : k1, k2\nA -> 2B : k3\nA -> 0 : k4\n0 <-> C : k5, k6",
    "no_terminal": "A -> B : k1\n2B -> 2A : k2",
    "deficiency_one": "A <-> B : k1, k2\n2A <-> 2B : k3, k4",
    "boundary_demo": "species A B C D\nC <-> D : k1, k2\n2A <-> 2B : k3, k4\nA -> 0 : k5",
    "isomer_decay": "A <-> B : k1, k2\n10A -> 0 : k3",
    "isomer_decay_reversible": "A <-> B : k1, k2\n10A <-> 10B : k3, k4",
    "catalytic_autocatalysis": "A <-> 2A : k1, k2\nA + B <-> 2A + B : k3, k4",
    "absorbing_swap_replacement": "2A <-> 2B : k1, k2",
    "cubic_swap": "2A -> 3A + B : k1\nA + 3B -> 2B : k2",
    "cubic_swap_replacement": "2A <-> 3A + B : k1, k2",
    "birth_death": "0 <-> A : k1, k2\n2A <-> 3A : k3, k4",
    "two_poisson": "A -> 0 : k1\n0 -> 2A : k2",
    "isomerization": "A <-> B : k1, k2",
    "one_way": "A -> B : k1",
}


def _ks(n, values=None):
    values = values or {}
    return {f"k{i}": float(values.get(f"k{i}", 1.0)) for i in range(1, n + 1)}


def from_text(name: str, **rates) -> MassActionSystem:
    return parse_network(TEXT[name], _ks(8, rates))


def dimerization(k1=1.0, k2=1.0):
    return from_text("dimerization", k1=k1, k2=k2)


def absorbing_swap(k1=1.0, k2=1.0):
    return from_text("absorbing_swap", k1=k1, k2=k2)


def isomer_dimer(theta: int, rho: float = 1.0) -> MassActionSystem:
    """``A -> B`` at rho*(theta-1), ``2B -> 2A`` at rho."""
    return from_text("no_terminal", k1=rho * (theta - 1), k2=rho)


def isomer_dimer_balanced(theta: int, rho1=1.0, rho2=1.0, rho3=1.0) -> MassActionSystem:
    text = "A <-> B : a, b\n2B <-> 2A : c, d"
    return parse_network(text, {"a": rho1 * (theta - 1) + rho2, "b": rho2, "c": rho1 + rho3, "d": rho3})


def isomer_dimer_cubic(theta1: int, theta2: int, rho: float = 1.0) -> MassActionSystem:
    text = "A -> B : a\n2B -> 2A : b\n3A -> A + 2B : c\n2A + B -> 3B : d"
    return parse_network(text, {"a": rho * theta1 * theta2, "b": rho * (theta1 + theta2 - 1), "c": rho, "d": rho})


def catalytic_autocatalysis(k1=1.0, k2=1.0, k3=1.0, k4=1.0):
    return from_text("catalytic_autocatalysis", k1=k1, k2=k2, k3=k3, k4=k4)


def boundary_demo(k1=1.0, k2=2.0, k3=3.0, k4=4.0, k5=5.0):
    return from_text("boundary_demo", k1=k1, k2=k2, k3=k3, k4=k4, k5=k5)


def birth_death(k1, k2, k3, k4):
    return from_text("birth_death", k1=k1, k2=k2, k3=k3, k4=k4)


def birth_death_product(x_max: int, theta1: float, theta2: float, theta3: float) -> np.ndarray:
    """Unnormalized ``prod_{i<=x} theta1 ((i-1)(i-2)+theta2) / (i(i-1)(i-2)+theta3 i)`` for x = 0..x_max, in log space."""
    out = np.zeros(x_max + 1)
    for i in range(1, x_max + 1):
        num = theta1 * ((i - 1) * (i - 2) + theta2)
        den = i * (i - 1) * (i - 2) + theta3 * i
        out[i] = out[i - 1] + np.log(num) - np.log(den)
    return out


def two_poisson_pmf(x_max: int, k1=1.0, k2=1.0) -> np.ndarray:
    """Law of ``Y1 + 2 Y2`` with ``Y1 ~ Poi(k2/k1)``, ``Y2 ~ Poi(k2/(2 k1))``."""
    from scipy.special import gammaln

    a, b = k2 / k1, k2 / (2 * k1)
    out = np.zeros(x_max + 1)
    for x in range(x_max + 1):
        terms = [
            np.exp(-a - b + i * np.log(a) - gammaln(i + 1) + j * np.log(b) - gammaln(j + 1))
            for j in range(x // 2 + 1)
            for i in [x - 2 * j]
        ]
        out[x] = np.sum(terms)
    return out


def corpus() -> dict[str, MassActionSystem]:
    """Named systems with concrete (integer) rates."""
    return {
        "dimerization": dimerization(1.0, 2.0),
        "absorbing_swap": absorbing_swap(1.0, 1.0),
        "terminal_demo": from_text("terminal_demo", k1=1, k2=2, k3=3, k4=4, k5=5, k6=6),
        "isomer_dimer_theta3": isomer_dimer(3),
        "isomer_dimer_balanced": isomer_dimer_balanced(3, 1.0, 2.0, 5.0),
        "isomer_dimer_cubic": isomer_dimer_cubic(3, 6),
        "deficiency_one": from_text("deficiency_one", k1=1, k2=1, k3=1, k4=2),
        "boundary_demo": boundary_demo(),
        "isomer_decay": from_text("isomer_decay", k1=2, k2=3, k3=1),
        "isomer_decay_reversible": from_text("isomer_decay_reversible", k1=2, k2=3, k3=1, k4=1),
        "catalytic_autocatalysis": catalytic_autocatalysis(1.0, 2.0, 3.0, 5.0),
        "absorbing_swap_replacement": from_text("absorbing_swap_replacement", k1=1, k2=3),
        "cubic_swap": from_text("cubic_swap", k1=2, k2=3),
        "birth_death": birth_death(2.0, 2.0, 2.0, 1.0),
        "two_poisson": from_text("two_poisson"),
        "isomerization": from_text("isomerization", k1=1, k2=2),
        "one_way": from_text("one_way"),
    }


# ---------------------------------------------------------------------------
# random networks


def random_network(rng: np.random.Generator, max_species: int = 3, max_complexes: int = 6, max_coeff: int = 2):
    """Random mass-action system with no structural guarantees."""
    while True:
        n = int(rng.integers(1, max_species + 1))
        m = int(rng.integers(2, max_complexes + 1))
        pool = list(itertools.product(range(max_coeff + 1), repeat=n))
        if m > len(pool):
            continue
        picks = rng.choice(len(pool), size=m, replace=False)
        complexes = [pool[i] for i in picks]
        edges = set()
        for c in range(m):
            # make every complex part of at least one reaction
            other = int(rng.integers(0, m - 1))
            other += other >= c
            edges.add((c, other) if rng.random() < 0.5 else (other, c))
        for _ in range(int(rng.integers(0, m + 1))):
            a, b = rng.choice(m, size=2, replace=False)
            edges.add((int(a), int(b)))
        triples = [(complexes[a], complexes[b], float(rng.uniform(0.2, 5.0))) for a, b in sorted(edges)]
        names = ["A", "B", "C", "D"][:n]
        try:
            return build_system(triples, names)
        except ValueError:
            continue


def has_positive_conservation_law(sys: MassActionSystem) -> bool:
    laws = np.array(analyze_structure(sys.network).conservation_laws, dtype=float)
    n = sys.network.n
    if laws.size == 0:
        return False
    # find w = laws^T a with w >= 1
    res = linprog(np.zeros(laws.shape[0]), A_ub=-laws.T, b_ub=-np.ones(n), bounds=[(None, None)] * laws.shape[0])
    return res.status == 0


def random_weakly_reversible_deficiency_zero(
    rng: np.random.Generator, max_species: int = 3, max_complexes: int = 6, conservative: bool = True
) -> MassActionSystem:
    """Rejection-sample a weakly reversible deficiency-zero system.

    With ``conservative`` the network must admit a strictly positive
    conservation law, so every irreducible component is finite.
    """
    while True:
        n = int(rng.integers(1, max_species + 1))
        m = int(rng.integers(2, max_complexes + 1))
        pool = list(itertools.product(range(3), repeat=n))
        if m > len(pool):
            continue
        complexes = [pool[i] for i in rng.choice(len(pool), size=m, replace=False)]
        order = rng.permutation(m)
        cuts = sorted(rng.choice(np.arange(2, m - 1), size=int(rng.integers(0, max(1, m // 2))), replace=False)) if m >= 4 else []
        blocks = np.split(order, cuts)
        if any(len(b) < 2 for b in blocks):
            continue
        edges = set()
        for block in blocks:
            block = [int(v) for v in block]
            for a, b in zip(block, block[1:] + block[:1]):
                edges.add((a, b))
            if len(block) > 2 and rng.random() < 0.5:
                a, b = rng.choice(block, size=2, replace=False)
                edges.add((int(a), int(b)))
        triples = [(complexes[a], complexes[b], float(rng.uniform(0.2, 5.0))) for a, b in sorted(edges)]
        try:
            sys = build_system(triples, ["A", "B", "C"][:n])
        except ValueError:
            continue
        if deficiency(sys.network) != 0 or not is_weakly_reversible(sys.network):
            continue
        if conservative and not has_positive_conservation_law(sys):
            continue
        return sys
