"""Reaction networks, mass-action systems and the ``.crn`` text format.

A ``.crn`` file is line oriented::

    # comment
    species A B C            # optional, fixes the species ordering
    k1 = 2.0                 # optional named rate constant
    A + B <-> 2 C : k1, 0.5  # reversible: forward, backward rate
    C -> 0 : 1.0             # irreversible

Complexes are ``+``-separated terms ``coeff name`` (coefficient optional) or
``0`` for the zero complex.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


class CRNParseError(ValueError):
    """Raised for malformed ``.crn`` input; carries a 1-based line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Species:
    name: str
    index: int


@dataclass(frozen=True)
class Reaction:
    source: int
    target: int


@dataclass(frozen=True)
class ReactionNetwork:
    """Species, complexes (integer vectors) and directed reactions."""

    species: tuple[Species, ...]
    complexes: tuple[tuple[int, ...], ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        n = len(self.species)
        names = [s.name for s in self.species]
        if len(set(names)) != n:
            raise ValueError("species names must be unique")
        if len(set(self.complexes)) != len(self.complexes):
            raise ValueError("complexes must be distinct")
        for y in self.complexes:
            if len(y) != n or any(v < 0 for v in y):
                raise ValueError(f"bad complex vector {y}")
        used = set()
        for r in self.reactions:
            if r.source == r.target:
                raise ValueError("self-loop reaction")
            used.update((r.source, r.target))
        if self.reactions:
            if used != set(range(len(self.complexes))):
                raise ValueError("every complex must be part of a reaction")
            touched = np.zeros(n, dtype=bool)
            for y in self.complexes:
                touched |= np.asarray(y) > 0
            if not touched.all():
                orphans = [names[i] for i in np.flatnonzero(~touched)]
                raise ValueError(f"species not part of any complex: {orphans}")
        elif self.complexes:
            raise ValueError("complexes given without reactions")

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def m(self) -> int:
        return len(self.complexes)

    @property
    def k(self) -> int:
        return len(self.reactions)

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    def complex_matrix(self) -> np.ndarray:
        """Species-by-complex matrix whose columns are the complex vectors."""
        if not self.complexes:
            return np.zeros((self.n, 0), dtype=np.int64)
        return np.array(self.complexes, dtype=np.int64).T.reshape(self.n, self.m)

    def source_matrix(self) -> np.ndarray:
        """Reaction-by-species matrix of source complexes."""
        out = np.zeros((self.k, self.n), dtype=np.int64)
        for j, r in enumerate(self.reactions):
            out[j] = self.complexes[r.source]
        return out

    def reaction_vector(self, j: int) -> np.ndarray:
        r = self.reactions[j]
        return np.subtract(self.complexes[r.target], self.complexes[r.source])

    def complex_label(self, i: int) -> str:
        return format_complex(self.complexes[i], self.species_names)

    def reaction_label(self, j: int) -> str:
        r = self.reactions[j]
        return f"{self.complex_label(r.source)} -> {self.complex_label(r.target)}"

    def complex_index(self, label: str) -> int:
        """Index of a complex given in ``.crn`` notation, e.g. ``"2A"``."""
        vec = _parse_side(label, {s.name: s.index for s in self.species}, None, 0, 0)
        try:
            return self.complexes.index(tuple(vec))
        except ValueError:
            raise KeyError(f"no complex {label!r}") from None


@dataclass(frozen=True)
class MassActionSystem:
    network: ReactionNetwork
    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.rates) != self.network.k:
            raise ValueError("one rate constant per reaction required")
        for kappa in self.rates:
            if not (kappa > 0 and np.isfinite(kappa)):
                raise ValueError(f"rate constants must be positive, got {kappa}")

    @property
    def rate_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)


# ---------------------------------------------------------------------------
# construction helpers


def build_system(
    reactions: Iterable[tuple[Sequence[int], Sequence[int], float]],
    species: Sequence[str],
) -> MassActionSystem:
    """Build a system from ``(source_vector, target_vector, rate)`` triples.

    Species that end up in no complex are dropped; complexes are
    deduplicated in first-appearance order.
    """
    triples = [(tuple(int(v) for v in a), tuple(int(v) for v in b), float(k)) for a, b, k in reactions]
    n = len(species)
    used = np.zeros(n, dtype=bool)
    for a, b, _ in triples:
        used |= (np.asarray(a) > 0) | (np.asarray(b) > 0)
    if not triples:
        used[:] = True
    keep = np.flatnonzero(used)
    sp = tuple(Species(species[i], j) for j, i in enumerate(keep))
    complexes: list[tuple[int, ...]] = []
    index: dict[tuple[int, ...], int] = {}
    rxns: list[Reaction] = []
    rates: list[float] = []
    seen: dict[tuple[int, int], float] = {}

    def cidx(vec):
        vec = tuple(vec[i] for i in keep)
        if vec not in index:
            index[vec] = len(complexes)
            complexes.append(vec)
        return index[vec]

    for a, b, k in triples:
        s, t = cidx(a), cidx(b)
        if (s, t) in seen:
            if seen[(s, t)] != k:
                raise ValueError("duplicate reaction with conflicting rate")
            continue
        seen[(s, t)] = k
        rxns.append(Reaction(s, t))
        rates.append(k)
    net = ReactionNetwork(sp, tuple(complexes), tuple(rxns))
    return MassActionSystem(net, tuple(rates))


def subsystem(sys: MassActionSystem, reaction_subset: Iterable[int]) -> MassActionSystem:
    """Mass-action subsystem on a subset of reactions, orphans dropped."""
    net = sys.network
    idx = sorted(set(reaction_subset))
    names = net.species_names
    triples = [
        (net.complexes[net.reactions[j].source], net.complexes[net.reactions[j].target], sys.rates[j])
        for j in idx
    ]
    if not triples:
        return MassActionSystem(ReactionNetwork((), (), ()), ())
    return build_system(triples, names)


# ---------------------------------------------------------------------------
# parsing

_NAME = r"[A-Za-z_][A-Za-z0-9_']*"
_TERM_RE = re.compile(rf"^\s*(\d+)?\s*\*?\s*({_NAME})\s*$")
_NUM_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_ASSIGN_RE = re.compile(rf"^\s*({_NAME})\s*=\s*(\S+)\s*$")


def _parse_side(text, species_index, species_order, line, col):
    """Parse one complex; appends unseen species to ``species_order``."""
    text = text.strip()
    if text == "0":
        return [0] * len(species_index)
    coeffs: dict[str, int] = {}
    for term in text.split("+"):
        m = _TERM_RE.match(term)
        if not m:
            raise CRNParseError(f"cannot parse complex term {term.strip()!r}", line, col)
        coeff = int(m.group(1)) if m.group(1) else 1
        name = m.group(2)
        if name not in species_index:
            if species_order is None:
                raise CRNParseError(f"unknown species {name!r}", line, col)
            species_index[name] = len(species_index)
            species_order.append(name)
        coeffs[name] = coeffs.get(name, 0) + coeff
    vec = [0] * len(species_index)
    for name, c in coeffs.items():
        vec[species_index[name]] = c
    return vec


def _parse_rate(token, params, line, col):
    token = token.strip()
    if _NUM_RE.match(token):
        value = float(token)
    elif token in params:
        value = float(params[token])
    else:
        raise CRNParseError(f"unresolved rate constant {token!r}", line, col)
    if not value > 0:
        raise CRNParseError(f"rate constants must be positive, got {token}", line, col)
    return value


def parse_network(text: str, params: Mapping[str, float] | None = None) -> MassActionSystem:
    """Parse ``.crn`` text into a :class:`MassActionSystem`.

    Rates may be numeric literals or names bound either by ``name = value``
    lines in the file or through ``params`` (file assignments win).
    """
    params = dict(params or {})
    species_index: dict[str, int] = {}
    species_order: list[str] = []
    fixed_species = False
    raw: list[tuple[list[int], list[int], float, int]] = []
    pending = []

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("species ") or stripped == "species":
            if species_order:
                raise CRNParseError("species directive must precede reactions", lineno, col0)
            for name in stripped.split()[1:]:
                if not re.fullmatch(_NAME, name):
                    raise CRNParseError(f"bad species name {name!r}", lineno, col0)
                if name in species_index:
                    raise CRNParseError(f"duplicate species {name!r}", lineno, col0)
                species_index[name] = len(species_index)
                species_order.append(name)
            fixed_species = True
            continue
        m = _ASSIGN_RE.match(line)
        if m and "->" not in line:
            if not _NUM_RE.match(m.group(2)):
                raise CRNParseError(f"parameter value must be numeric, got {m.group(2)!r}", lineno, col0)
            params[m.group(1)] = float(m.group(2))
            continue
        pending.append((lineno, line, col0))

    for lineno, line, col0 in pending:
        if ":" not in line:
            raise CRNParseError("expected ':' followed by rate constant(s)", lineno, len(line.rstrip()) + 1)
        lhs_rhs, rates_txt = line.split(":", 1)
        rates_col = len(lhs_rhs) + 2
        if "<->" in lhs_rhs:
            arrow = "<->"
        elif "->" in lhs_rhs:
            arrow = "->"
        else:
            raise CRNParseError("expected '->' or '<->'", lineno, col0)
        if lhs_rhs.count("->") != 1:
            raise CRNParseError("exactly one arrow per line", lineno, col0)
        lhs, rhs = lhs_rhs.split(arrow)
        rhs_col = lhs_rhs.index(arrow) + len(arrow) + 1
        order = None if fixed_species else species_order
        a = _parse_side(lhs, species_index, order, lineno, col0)
        b = _parse_side(rhs, species_index, order, lineno, rhs_col)
        tokens = [t for t in rates_txt.split(",")]
        want = 2 if arrow == "<->" else 1
        if len(tokens) != want or any(not t.strip() for t in tokens):
            raise CRNParseError(f"expected {want} rate constant(s) after ':'", lineno, rates_col)
        rates = [_parse_rate(t, params, lineno, rates_col) for t in tokens]
        if a == b:
            raise CRNParseError("self-loop reaction (source equals target)", lineno, col0)
        raw.append((a, b, rates[0], lineno))
        if arrow == "<->":
            raw.append((b, a, rates[1], lineno))

    if not raw and not fixed_species:
        raise CRNParseError("no reactions and no species directive")
    n = len(species_order)
    triples = [([*a, *[0] * (n - len(a))], [*b, *[0] * (n - len(b))], k) for a, b, k, _ in raw]
    if fixed_species and raw:
        used = np.zeros(n, dtype=bool)
        for a, b, _ in triples:
            used |= (np.asarray(a) > 0) | (np.asarray(b) > 0)
        if not used.all():
            orphans = [species_order[i] for i in np.flatnonzero(~used)]
            raise CRNParseError(f"declared species not part of any complex: {orphans}")
    seen: dict[tuple, tuple[float, int]] = {}
    for (a, b, k), (*_, lineno) in zip(triples, raw):
        key = (tuple(a), tuple(b))
        if key in seen and seen[key][0] != k:
            raise CRNParseError(
                f"duplicate reaction with conflicting rate (first on line {seen[key][1]})", lineno, 1
            )
        seen.setdefault(key, (k, lineno))
    if not raw:
        net = ReactionNetwork(tuple(Species(s, i) for i, s in enumerate(species_order)), (), ())
        return MassActionSystem(net, ())
    return build_system(triples, species_order)


def load_network(path, params: Mapping[str, float] | None = None) -> MassActionSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read(), params)


# ---------------------------------------------------------------------------
# serialization


def format_complex(vec: Sequence[int], names: Sequence[str]) -> str:
    terms = [(f"{c}" if c > 1 else "") + names[i] for i, c in enumerate(vec) if c]
    return " + ".join(terms) if terms else "0"


def serialize_network(sys: MassActionSystem) -> str:
    """Write ``.crn`` text; parsing it back yields an identical system."""
    net = sys.network
    lines = ["species " + " ".join(net.species_names)]
    for j, r in enumerate(net.reactions):
        lhs = net.complex_label(r.source)
        rhs = net.complex_label(r.target)
        lines.append(f"{lhs} -> {rhs} : {sys.rates[j]!r}")
    return "\n".join(lines) + "\n"


def system_to_dict(sys: MassActionSystem) -> dict:
    net = sys.network
    return {
        "species": net.species_names,
        "complexes": [list(y) for y in net.complexes],
        "reactions": [
            {"source": r.source, "target": r.target, "rate": sys.rates[j]}
            for j, r in enumerate(net.reactions)
        ],
    }


def system_from_dict(data: Mapping) -> MassActionSystem:
    species = tuple(Species(name, i) for i, name in enumerate(data["species"]))
    complexes = tuple(tuple(int(v) for v in y) for y in data["complexes"])
    reactions = tuple(Reaction(int(r["source"]), int(r["target"])) for r in data["reactions"])
    rates = tuple(float(r["rate"]) for r in data["reactions"])
    return MassActionSystem(ReactionNetwork(species, complexes, reactions), rates)


def system_to_json(sys: MassActionSystem) -> str:
    return json.dumps(system_to_dict(sys), indent=2)


def system_from_json(text: str) -> MassActionSystem:
    return system_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# kinetics


def stoichiometric_matrix(net: ReactionNetwork) -> np.ndarray:
    """Integer ``n x k`` matrix; column ``j`` is target minus source of reaction ``j``."""
    out = np.zeros((net.n, net.k), dtype=np.int64)
    for j in range(net.k):
        out[:, j] = net.reaction_vector(j)
    return out


def falling_factorial(x: Sequence[int], y: Sequence[int]) -> int:
    """``x!/(x-y)!`` as an exact integer, 0 unless ``x >= y`` componentwise."""
    total = 1
    for xi, yi in zip(x, y):
        xi, yi = int(xi), int(yi)
        if xi < yi:
            return 0
        for v in range(xi - yi + 1, xi + 1):
            total *= v
    return total


def rate_function(sys: MassActionSystem, reaction: int, x: Sequence[int]) -> float:
    """Stochastic mass-action propensity of ``reaction`` at state ``x``."""
    y = sys.network.complexes[sys.network.reactions[reaction].source]
    ff = falling_factorial(x, y)
    return sys.rates[reaction] * ff if ff else 0.0


def propensities(sys: MassActionSystem, states: np.ndarray) -> np.ndarray:
    """Vectorized propensities: array of shape ``(len(states), k)``.

    Falling factorials are products of integers accumulated in float64: exact
    while they stay below 2**53 and correctly rounded beyond, where int64
    would silently wrap for high-order sources.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.int64))
    src = sys.network.source_matrix()
    out = np.ones((states.shape[0], sys.network.k))
    for j in range(sys.network.k):
        for i in np.flatnonzero(src[j]):
            for t in range(int(src[j, i])):
                out[:, j] *= np.maximum(states[:, i] - t, 0)
    return out * sys.rate_array


def deterministic_rates(sys: MassActionSystem, z: Sequence[float]) -> np.ndarray:
    """Mass-action fluxes ``kappa * z**y`` per reaction (``0**0 == 1``)."""
    z = np.asarray(z, dtype=float)
    src = sys.network.source_matrix()
    return sys.rate_array * np.prod(np.power(z[None, :], src), axis=1)
