"""Stationary distributions of mass-action CTMCs on irreducible components.

Product-form (Poisson-like) distributions are built in log space. The
direct oracle solves the global balance equations of the generator
restricted to a component.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import gammaln

from .balance import (
    HypothesisError,
    NumericalFailure,
    balance_report,
    solve_complex_balanced_equilibrium,
)
from .network import MassActionSystem, propensities, stoichiometric_matrix
from .statespace import (
    IrreducibleComponent,
    StateBox,
    State,
    active_reactions_on,
    certify_essential,
    irreducible_components,
    is_positive_component,
)
from .structure import deficiency, mapped_subsystem, terminal_network, terminal_reactions

DIRECT_RESIDUAL_TOL = 1e-12
GTH_MAX_STATES = 3000


@dataclass(frozen=True)
class FiniteDistribution:
    support: tuple[State, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probabilities):
            raise ValueError("support and probabilities differ in length")
        if self.support and abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to one")
        if any(p < 0 for p in self.probabilities):
            raise ValueError("probabilities must be non-negative")

    @classmethod
    def from_weights(cls, support: Sequence[State], log_weights: np.ndarray) -> "FiniteDistribution":
        lw = np.asarray(log_weights, dtype=float)
        w = np.exp(lw - lw.max())
        p = w / math.fsum(w)
        return cls(tuple(tuple(int(v) for v in s) for s in support), tuple(float(v) for v in p))

    def as_dict(self) -> dict[State, float]:
        return dict(zip(self.support, self.probabilities))

    def prob(self, x: Sequence[int]) -> float:
        return self.as_dict().get(tuple(int(v) for v in x), 0.0)

    def array(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)

    def states_array(self) -> np.ndarray:
        return np.array(self.support, dtype=np.int64).reshape(len(self.support), -1)

    def to_csv(self, species: Sequence[str]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*species, "probability"])
        for s, p in zip(self.support, self.probabilities):
            writer.writerow([*s, repr(float(p))])
        return buf.getvalue()

    def to_json(self, species: Sequence[str]) -> str:
        return json.dumps(
            {"species": list(species), "states": [list(s) for s in self.support], "probabilities": list(self.probabilities)}
        )

    @classmethod
    def from_csv(cls, text: str, renormalize: bool = True) -> tuple["FiniteDistribution", list[str]]:
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        species = header[:-1]
        support = [tuple(int(v) for v in r[:-1]) for r in body]
        probs = np.array([float(r[-1]) for r in body])
        if renormalize:
            probs = probs / math.fsum(probs)
        return cls(tuple(support), tuple(float(p) for p in probs)), species

    @classmethod
    def from_json(cls, text: str) -> tuple["FiniteDistribution", list[str]]:
        data = json.loads(text)
        support = tuple(tuple(int(v) for v in s) for s in data["states"])
        return cls(support, tuple(float(p) for p in data["probabilities"])), list(data["species"])


@dataclass(frozen=True)
class ProductFormDescriptor:
    """Positive vector ``c`` on a component; ``species`` restricts the product."""

    c: tuple[float, ...]
    component: IrreducibleComponent
    species: tuple[int, ...] | None = None

    def __post_init__(self):
        idx = range(len(self.c)) if self.species is None else self.species
        if any(not self.c[i] > 0 for i in idx):
            raise ValueError("c must be positive on the product species")


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    location: State | None
    per_state: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "location": list(self.location) if self.location is not None else None,
        }


# ---------------------------------------------------------------------------


def tv_distance(a, b) -> float:
    """Total variation distance between two distributions over states.

    Accepts :class:`FiniteDistribution` or ``{state: prob}`` mappings.
    """
    da = a.as_dict() if hasattr(a, "as_dict") else dict(a)
    db = b.as_dict() if hasattr(b, "as_dict") else dict(b)
    keys = set(da) | set(db)
    return 0.5 * math.fsum(abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in keys)


def product_form_log_weights(c: Sequence[float], states: np.ndarray, species: Sequence[int] | None = None) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    idx = np.arange(c.size) if species is None else np.asarray(species, dtype=int)
    if idx.size == 0:
        return np.zeros(states.shape[0])
    x = states[:, idx].astype(float)
    return x @ np.log(c[idx]) - gammaln(x + 1).sum(axis=1)


def product_form(desc: ProductFormDescriptor, allow_truncated: bool = False) -> FiniteDistribution:
    """Normalized ``prod_i c_i**x_i / x_i!`` on the component."""
    comp = desc.component
    if comp.truncated and not allow_truncated:
        raise ValueError("product form requires a finite, certified component")
    states = comp.as_array()
    return FiniteDistribution.from_weights(comp.states, product_form_log_weights(desc.c, states, desc.species))


def _neighbour_index(support: np.ndarray):
    lookup = {tuple(int(v) for v in s): i for i, s in enumerate(support)}

    def find(arr):
        return np.array([lookup.get(tuple(int(v) for v in s), -1) for s in arr], dtype=np.int64)

    return find


def master_equation_report(sys: MassActionSystem, dist: FiniteDistribution) -> ResidualReport:
    """Per-state global-balance residual; mass outside the support counts as zero."""
    support = dist.states_array()
    pi = dist.array()
    lam = propensities(sys, support)
    outflow = pi * lam.sum(axis=1)
    inflow = np.zeros_like(pi)
    find = _neighbour_index(support)
    xi = stoichiometric_matrix(sys.network).T
    for j in range(sys.network.k):
        idx = find(support + xi[j])
        ok = idx >= 0
        np.add.at(inflow, idx[ok], pi[ok] * lam[ok, j])
    res = inflow - outflow
    if res.size == 0:
        return ResidualReport(0.0, None, ())
    i = int(np.argmax(np.abs(res)))
    return ResidualReport(float(abs(res[i])), dist.support[i], tuple(float(v) for v in res))


def master_equation_residual(sys: MassActionSystem, dist: FiniteDistribution) -> float:
    return master_equation_report(sys, dist).max_residual


def generator_matrix(sys: MassActionSystem, states: np.ndarray) -> sparse.csr_matrix:
    """Generator restricted to ``states``; transitions leaving the set are dropped."""
    n_states = states.shape[0]
    lam = propensities(sys, states)
    find = _neighbour_index(states)
    xi = stoichiometric_matrix(sys.network).T
    rows, cols, vals = [], [], []
    diag = np.zeros(n_states)
    for j in range(sys.network.k):
        idx = find(states + xi[j])
        ok = (idx >= 0) & (lam[:, j] > 0)
        src = np.flatnonzero(ok)
        rows.append(src)
        cols.append(idx[ok])
        vals.append(lam[ok, j])
        diag[src] -= lam[ok, j]
    r = np.concatenate(rows + [np.arange(n_states)])
    c = np.concatenate(cols + [np.arange(n_states)])
    v = np.concatenate(vals + [diag])
    return sparse.csr_matrix((v, (r, c)), shape=(n_states, n_states))


def gth_solve(rates: np.ndarray) -> np.ndarray:
    """Stationary vector by Grassmann-Taksar-Heyman state reduction.

    ``rates`` holds the off-diagonal transition rates (diagonal ignored).
    Only additions of non-negative numbers occur, so small probabilities
    keep full relative accuracy.
    """
    p = np.array(rates, dtype=float)
    np.fill_diagonal(p, 0.0)
    size = p.shape[0]
    for k in range(size - 1, 0, -1):
        s = p[k, :k].sum()
        if s <= 0:
            raise NumericalFailure("chain is reducible on the given states")
        p[:k, k] /= s
        p[:k, :k] += np.outer(p[:k, k], p[k, :k])
    pi = np.zeros(size)
    pi[0] = 1.0
    for k in range(1, size):
        pi[k] = pi[:k] @ p[:k, k]
    return pi / math.fsum(pi)


def _lu_solve(q: sparse.csr_matrix) -> np.ndarray:
    size = q.shape[0]
    a = q.T.tolil()
    a[size - 1, :] = np.ones(size)
    b = np.zeros(size)
    b[-1] = 1.0
    pi = spsolve(a.tocsc(), b)
    return np.clip(pi, 0.0, None) / math.fsum(np.clip(pi, 0.0, None))


def direct_stationary_solve(
    sys: MassActionSystem, comp: IrreducibleComponent, allow_truncated: bool = False
) -> FiniteDistribution:
    """Solve ``pi Q = 0``, ``sum pi = 1`` on a finite component.

    For ``allow_truncated=True`` the generator is restricted to the given
    states, dropping transitions that leave them.
    """
    if not len(comp):
        raise ValueError("empty component")
    if comp.truncated and not allow_truncated:
        raise ValueError("component is truncated; pass allow_truncated=True to solve the restricted chain")
    states = comp.as_array()
    if len(comp) == 1:
        return FiniteDistribution(comp.states, (1.0,))
    q = generator_matrix(sys, states)
    if len(comp) <= GTH_MAX_STATES:
        pi = gth_solve(q.toarray())
    else:
        pi = _lu_solve(q)
    scale = float(np.max(np.abs(q.diagonal()))) or 1.0
    resid = np.max(np.abs(q.T @ pi)) / scale
    if resid > DIRECT_RESIDUAL_TOL:
        raise NumericalFailure(f"global balance residual {resid:.3e} above tolerance")
    return FiniteDistribution(comp.states, tuple(float(v) for v in pi))


# ---------------------------------------------------------------------------
# complex-balanced distributions


@dataclass(frozen=True)
class ComplexBalanceCheck:
    residuals: dict  # (complex index, state) -> inflow - outflow
    max_residual: float
    passed: bool


def complex_balanced_distribution_check(
    sys: MassActionSystem,
    comp: IrreducibleComponent,
    dist: FiniteDistribution,
    tol: float = 1e-10,
) -> ComplexBalanceCheck:
    """Per-(complex, state) probability-flow balance on the Gamma-network.

    For each complex ``y'`` of the Gamma-network and state ``x``: inflow
    through reactions ``y -> y'`` into ``x`` minus the outflow of ``x``
    through reactions ``y' -> y``. ``tol`` is relative to the largest
    single flow term.
    """
    net = sys.network
    active = set(active_reactions_on(sys, comp))
    complexes = sorted({net.reactions[j].source for j in active} | {net.reactions[j].target for j in active})
    pdict = dist.as_dict()
    states = comp.as_array()
    lam = propensities(sys, states)
    lam_at = {s: lam[i] for i, s in enumerate(comp.states)}
    residuals = {}
    biggest = 0.0
    for yp in complexes:
        ypv = np.asarray(net.complexes[yp])
        into = [j for j in active if net.reactions[j].target == yp]
        out = [j for j in active if net.reactions[j].source == yp]
        for s in comp.states:
            x = np.asarray(s)
            inflow = 0.0
            for j in into:
                prev = tuple(int(v) for v in x - ypv + np.asarray(net.complexes[net.reactions[j].source]))
                if prev in lam_at:
                    term = pdict.get(prev, 0.0) * lam_at[prev][j]
                    inflow += term
                    biggest = max(biggest, term)
            outflow = pdict.get(s, 0.0) * sum(lam_at[s][j] for j in out)
            biggest = max(biggest, outflow)
            residuals[(yp, s)] = inflow - outflow
    worst = max((abs(v) for v in residuals.values()), default=0.0)
    scale = biggest or 1.0
    return ComplexBalanceCheck(residuals, float(worst), bool(worst <= tol * scale))


@dataclass(frozen=True)
class StochasticBalanceResult:
    balanced: bool
    equilibrium: tuple[float, ...] | None
    witness: IrreducibleComponent | None
    witness_distribution: FiniteDistribution | None
    witness_check: bool | None
    consistent: bool


def stochastically_complex_balanced(sys: MassActionSystem, box: StateBox) -> StochasticBalanceResult:
    """Decide stochastic complex balance via the deterministic equilibrium.

    A positive component in the box, if any, serves as a witness: its
    directly solved stationary distribution is checked for per-complex
    balance and must agree with the deterministic answer.
    """
    c = solve_complex_balanced_equilibrium(sys)
    analysis = irreducible_components(sys, box)
    witness = None
    for comp in analysis.components:
        if not comp.truncated and len(comp) > 1 and is_positive_component(sys, comp):
            witness = comp
            break
    dist = check = None
    consistent = True
    if witness is not None:
        dist = direct_stationary_solve(sys, witness)
        check = bool(complex_balanced_distribution_check(sys, witness, dist).passed)
        consistent = check == (c is not None)
    return StochasticBalanceResult(
        balanced=c is not None,
        equilibrium=None if c is None else tuple(float(v) for v in c),
        witness=witness,
        witness_distribution=dist,
        witness_check=check,
        consistent=consistent,
    )


def terminal_equilibrium(sys: MassActionSystem) -> tuple[np.ndarray, tuple[int, ...]]:
    """Complex-balanced equilibrium of the terminal system, lifted to parent species.

    Returns the vector (ones off the terminal species) and the terminal
    species indices.
    """
    net = sys.network
    if deficiency(net) != 0:
        raise HypothesisError("terminal-system form requires deficiency zero")
    sub = terminal_network(net)
    subsys = mapped_subsystem(sys, sub)
    c_sub = solve_complex_balanced_equilibrium(subsys)
    if c_sub is None:
        raise NumericalFailure("terminal system of a deficiency-zero network not complex balanced (internal invariant)")
    c = np.ones(net.n)
    c[list(sub.species_map)] = c_sub
    return c, tuple(sub.species_map)


def terminal_form_distribution(sys: MassActionSystem, comp: IrreducibleComponent) -> FiniteDistribution:
    """Stationary distribution of a deficiency-zero system via its terminal system."""
    if comp.truncated:
        raise ValueError("terminal form requires a finite, certified component")
    c, species = terminal_equilibrium(sys)
    term = set(terminal_reactions(sys.network))
    stray = [j for j in active_reactions_on(sys, comp) if j not in term]
    if stray:
        raise NumericalFailure(f"non-terminal reactions {stray} active on a component of a deficiency-zero network")
    return product_form(ProductFormDescriptor(tuple(c), comp, species))


# ---------------------------------------------------------------------------
# converse detector


def relative_master_residuals(sys: MassActionSystem, c: Sequence[float], comp: IrreducibleComponent) -> np.ndarray:
    """Scale-free master-equation residuals of ``prod c**x/x!`` on ``comp``.

    Each state's residual is divided by its outflow (or inflow if larger).
    For truncated components only interior states, whose predecessors and
    successors all lie in the set, are evaluated.
    """
    states = comp.as_array()
    if len(comp) == 1:
        return np.zeros(1)
    lw = product_form_log_weights(c, states)
    w = np.exp(lw - lw.max())
    lam = propensities(sys, states)
    find = _neighbour_index(states)
    xi = stoichiometric_matrix(sys.network).T
    inflow = np.zeros(len(comp))
    interior = np.ones(len(comp), dtype=bool)
    src = sys.network.source_matrix()
    for j in range(sys.network.k):
        idx = find(states + xi[j])
        ok = idx >= 0
        np.add.at(inflow, idx[ok], w[ok] * lam[ok, j])
        interior &= ~((lam[:, j] > 0) & ~ok)
        pred = states - xi[j]
        pred_active = np.all(pred >= src[j], axis=1)
        interior &= ~(pred_active & (find(pred) < 0))
    outflow = w * lam.sum(axis=1)
    denom = np.maximum(np.maximum(inflow, outflow), np.finfo(float).tiny)
    rel = np.abs(inflow - outflow) / denom
    rel[(inflow == 0) & (outflow == 0)] = 0.0
    if comp.truncated:
        rel = rel[interior]
    return rel


@dataclass(frozen=True)
class DetectionReport:
    empirical: bool
    algebraic: bool
    agree: bool
    result: bool
    good_states: int
    components_checked: int
    failing_components: tuple[IrreducibleComponent, ...]
    cb_residual: float

    @property
    def discriminating_component(self) -> IrreducibleComponent | None:
        return self.failing_components[0] if self.failing_components else None

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical,
            "algebraic": self.algebraic,
            "agree": self.agree,
            "result": self.result,
            "good_states": self.good_states,
            "components_checked": self.components_checked,
            "failing_components": [[list(s) for s in c.states] for c in self.failing_components],
            "cb_residual": self.cb_residual,
        }


class InsufficientBox(ValueError):
    """The box contains no good state, so the two routes cannot be compared."""


def good_state_bound(sys: MassActionSystem, k_bound: int) -> int:
    net = sys.network
    biggest = max(
        (max(net.complexes[r.source], default=0) + max(net.complexes[r.target], default=0) for r in net.reactions),
        default=0,
    )
    return biggest + k_bound


def detect_complex_balance_from_distributions(
    sys: MassActionSystem,
    c: Sequence[float],
    box: StateBox,
    tol: float = 1e-9,
) -> DetectionReport:
    """Compare product-form stationarity on every component with complex balance of ``c``.

    Route (a): ``prod c**x/x!`` solves the master equation on every
    component in the box (interior states only for truncated ones).
    Route (b): ``c`` satisfies the deterministic complex-balance equations.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(c > 0):
        raise ValueError("c must be positive")
    cert = certify_essential(sys, box)
    if cert.classification == "neither":
        raise HypothesisError("network is not almost essential within the box")
    lower = good_state_bound(sys, cert.bound)
    analysis = irreducible_components(sys, box)
    good = 0
    failing = []
    checked = 0
    for comp in analysis.components:
        arr = comp.as_array()
        good += int(np.sum(np.all(arr > lower, axis=1)))
        rel = relative_master_residuals(sys, c, comp)
        if rel.size == 0:
            continue
        checked += 1
        if np.max(rel) > tol:
            failing.append(comp)
    if good == 0:
        raise InsufficientBox(f"no state with all counts above {lower} in a component of the box")
    report = balance_report(sys, c, tol)
    empirical = not failing
    algebraic = bool(report.is_complex_balanced)
    return DetectionReport(
        empirical=empirical,
        algebraic=algebraic,
        agree=empirical == algebraic,
        result=empirical and algebraic,
        good_states=good,
        components_checked=checked,
        failing_components=tuple(failing),
        cb_residual=report.cb_residual,
    )
