"""Deterministic mass-action semantics and complex-balanced equilibria."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from .network import MassActionSystem, deterministic_rates, stoichiometric_matrix
from .structure import (
    analyze_structure,
    deficiency,
    linkage_classes,
    mapped_subsystem,
    terminal_component_of,
    terminal_reactions,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
LOGLINEAR_TOL = 1e-8


class NumericalFailure(RuntimeError):
    """The solver could not reach tolerance although an equilibrium should exist."""


class HypothesisError(ValueError):
    """A theorem's precondition does not hold for the given input."""


@dataclass(frozen=True)
class BalanceReport:
    point: tuple[float, ...]
    ode_residual: float
    cb_residual: float
    is_equilibrium: bool
    is_complex_balanced: bool

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "ode_residual": self.ode_residual,
            "cb_residual": self.cb_residual,
            "is_equilibrium": self.is_equilibrium,
            "is_complex_balanced": self.is_complex_balanced,
        }


@dataclass(frozen=True)
class BoundaryReport:
    point: tuple[float, ...]
    charged_reactions: tuple[int, ...]
    all_terminal: bool
    # per touched terminal component: (reaction indices, max |cb residual| of the projection)
    components: tuple[tuple[tuple[int, ...], float], ...]
    passed: bool


def ode_rhs(sys: MassActionSystem, z: Sequence[float]) -> np.ndarray:
    return stoichiometric_matrix(sys.network) @ deterministic_rates(sys, z)


def jacobian(sys: MassActionSystem, z: Sequence[float]) -> np.ndarray:
    """Analytic Jacobian of :func:`ode_rhs`."""
    z = np.asarray(z, dtype=float)
    net = sys.network
    src = net.source_matrix()
    n = net.n
    dflux = np.zeros((net.k, n))
    for j in range(net.k):
        y = src[j]
        for i in np.flatnonzero(y):
            powers = y.copy()
            powers[i] -= 1
            dflux[j, i] = sys.rates[j] * y[i] * np.prod(np.power(z, powers))
    return stoichiometric_matrix(net) @ dflux


def complex_flows(sys: MassActionSystem, c: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Per-complex (inflow, outflow) at concentration ``c``."""
    net = sys.network
    flux = deterministic_rates(sys, c)
    inflow = np.zeros(net.m)
    outflow = np.zeros(net.m)
    for j, r in enumerate(net.reactions):
        outflow[r.source] += flux[j]
        inflow[r.target] += flux[j]
    return inflow, outflow


def complex_balance_residual(sys: MassActionSystem, c: Sequence[float]) -> np.ndarray:
    inflow, outflow = complex_flows(sys, c)
    return inflow - outflow


def _flow_scale(sys: MassActionSystem, c) -> float:
    flux = deterministic_rates(sys, c)
    return float(flux.max()) if flux.size and flux.max() > 0 else 1.0


def balance_report(sys: MassActionSystem, c: Sequence[float], tol: float = DEFAULT_TOL) -> BalanceReport:
    scale = _flow_scale(sys, c)
    ode = float(np.max(np.abs(ode_rhs(sys, c)), initial=0.0))
    cb = float(np.max(np.abs(complex_balance_residual(sys, c)), initial=0.0))
    return BalanceReport(
        point=tuple(float(v) for v in c),
        ode_residual=ode,
        cb_residual=cb,
        is_equilibrium=bool(ode <= tol * scale),
        is_complex_balanced=bool(cb <= tol * scale),
    )


def kinetic_laplacian(sys: MassActionSystem) -> np.ndarray:
    """``m x m`` matrix: entry (target, source) = rate, diagonal = -outflow."""
    net = sys.network
    lap = np.zeros((net.m, net.m))
    for j, r in enumerate(net.reactions):
        lap[r.target, r.source] += sys.rates[j]
        lap[r.source, r.source] -= sys.rates[j]
    return lap


def _exact_rates(sys: MassActionSystem):
    fr = [Fraction(k) for k in sys.rates]
    if all(f.denominator <= 1 << 20 for f in fr):
        return fr
    return None


def tree_constants(sys: MassActionSystem) -> np.ndarray:
    """Positive kernel vector of the kinetic Laplacian, one block per linkage class.

    Entry ``y`` is the principal minor of ``-L`` with row and column ``y``
    removed (restricted to the class of ``y``), i.e. the sum over spanning
    trees rooted at ``y`` of the product of their rate constants. Exact when
    every rate constant is a rational with a small denominator.
    """
    net = sys.network
    exact = _exact_rates(sys)
    rho = np.zeros(net.m)
    for lc in linkage_classes(net):
        members = list(lc)
        pos = {c: i for i, c in enumerate(members)}
        size = len(members)
        if exact is not None:
            lap = [[Fraction(0)] * size for _ in range(size)]
            for j, r in enumerate(net.reactions):
                if r.source in pos:
                    a, b = pos[r.source], pos[r.target]
                    lap[b][a] -= exact[j]
                    lap[a][a] += exact[j]
            for i, c in enumerate(members):
                minor = [[lap[p][q] for q in range(size) if q != i] for p in range(size) if p != i]
                rho[c] = float(linalg.det(minor)) if minor else 1.0
        else:
            lap = -kinetic_laplacian(sys)[np.ix_(members, members)]
            for i, c in enumerate(members):
                keep = [q for q in range(size) if q != i]
                minor = lap[np.ix_(keep, keep)]
                if minor.size and np.linalg.cond(minor) > 1e12:
                    warnings.warn("ill-conditioned Laplacian minor in tree-constant computation", RuntimeWarning)
                rho[c] = float(np.linalg.det(minor)) if minor.size else 1.0
    return rho


def _polish(sys: MassActionSystem, c: np.ndarray, iters: int = 8) -> np.ndarray:
    """Gauss-Newton in log coordinates on the relative complex-balance residual."""
    net = sys.network
    ymat = net.complex_matrix().T.astype(float)  # m x n
    lap = kinetic_laplacian(sys)
    u = np.log(c)
    best = u.copy()

    def resid(u):
        psi = np.exp(ymat @ u)
        scale = np.max(np.abs(lap) @ psi) or 1.0
        return lap @ psi / scale, psi, scale

    r, psi, scale = resid(u)
    best_norm = np.max(np.abs(r))
    for _ in range(iters):
        jac = (lap * psi[None, :]) @ ymat / scale
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        u = u + step
        r, psi, scale = resid(u)
        norm = np.max(np.abs(r))
        if norm < best_norm:
            best, best_norm = u.copy(), norm
        else:
            break
    return np.exp(best)


def solve_complex_balanced_equilibrium(sys: MassActionSystem, tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Positive complex-balanced equilibrium, or ``None`` if none exists.

    Raises :class:`NumericalFailure` when the log-linear system is
    consistent but the polished point misses the tolerance.
    """
    net = sys.network
    if net.k == 0:
        return np.ones(net.n)
    if len(terminal_reactions(net)) != net.k:
        return None
    rho = tree_constants(sys)
    if np.any(rho <= 0):
        raise NumericalFailure("non-positive tree constant for a weakly reversible network")
    lcs = linkage_classes(net)
    ymat = net.complex_matrix().T.astype(float)
    a = np.zeros((net.m, net.n + len(lcs)))
    a[:, : net.n] = ymat
    for li, lc in enumerate(lcs):
        a[list(lc), net.n + li] = -1.0
    b = np.log(rho)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ sol - b)) > LOGLINEAR_TOL * max(1.0, np.max(np.abs(b))):
        return None
    c = _polish(sys, np.exp(sol[: net.n]))
    if not balance_report(sys, c, tol).is_complex_balanced:
        raise NumericalFailure("complex-balance residual above tolerance after polishing")
    return c


def classify_boundary_equilibrium(
    sys: MassActionSystem, x: Sequence[float], tol: float = DEFAULT_TOL
) -> BoundaryReport:
    """Check the boundary-equilibrium structure of a deficiency-zero system at ``x``.

    Every reaction whose source support lies in ``supp x`` must be terminal,
    and the projection of ``x`` on each touched terminal component must be
    complex balanced for that component.
    """
    net = sys.network
    x = np.asarray(x, dtype=float)
    if deficiency(net) != 0:
        raise HypothesisError("boundary-equilibrium classification requires deficiency zero")
    scale = _flow_scale(sys, x)
    if np.max(np.abs(ode_rhs(sys, x)), initial=0.0) > tol * scale:
        raise HypothesisError("point is not an equilibrium")
    support = x > 0
    src = net.source_matrix()
    charged = tuple(j for j in range(net.k) if np.all(support[src[j] > 0]))
    term = set(terminal_reactions(net))
    all_terminal = all(j in term for j in charged)
    groups = []
    seen = set()
    for j in charged:
        if j not in term:
            continue
        sub = terminal_component_of(net, net.reactions[j].source)
        key = sub.reaction_subset
        if key in seen:
            continue
        seen.add(key)
        subsys = mapped_subsystem(sys, sub)
        proj = x[list(sub.species_map)]
        res = complex_balance_residual(subsys, proj)
        sub_scale = _flow_scale(subsys, proj)
        groups.append((key, float(np.max(np.abs(res)) / sub_scale)))
    passed = all_terminal and all(r <= tol for _, r in groups)
    return BoundaryReport(tuple(float(v) for v in x), charged, all_terminal, tuple(groups), passed)


def stoichiometric_basis(sys: MassActionSystem) -> np.ndarray:
    """Orthonormal basis (columns) of the stoichiometric subspace."""
    smat = stoichiometric_matrix(sys.network).astype(float)
    if smat.size == 0:
        return np.zeros((sys.network.n, 0))
    u, sv, _ = np.linalg.svd(smat, full_matrices=False)
    r = analyze_structure(sys.network).s
    return u[:, :r]


def restricted_eigenvalues(sys: MassActionSystem, c: Sequence[float]) -> np.ndarray:
    basis = stoichiometric_basis(sys)
    if basis.shape[1] == 0:
        return np.zeros(0)
    return np.linalg.eigvals(basis.T @ jacobian(sys, c) @ basis)


def local_stability_check(sys: MassActionSystem, c: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
    """True iff the Jacobian restricted to the stoichiometric subspace is Hurwitz."""
    ev = restricted_eigenvalues(sys, c)
    return bool(np.all(ev.real < -tol))


def newton_equilibrium(
    sys: MassActionSystem, z0: Sequence[float], tol: float = 1e-12, max_iter: int = 200
) -> np.ndarray:
    """Positive equilibrium in the compatibility class of ``z0`` by damped Newton.

    Unknowns are log-concentrations; the conservation laws pin the class.
    The rate equations are divided by the total flux so that the vanishing
    fluxes near a boundary face do not pass for convergence.
    """
    net = sys.network
    z0 = np.asarray(z0, dtype=float)
    laws = analyze_structure(net).conservation_laws
    w = np.array(laws, dtype=float).reshape(len(laws), net.n)
    totals = w @ z0
    tscale = max(1.0, np.max(np.abs(totals), initial=1.0))
    basis = stoichiometric_basis(sys)
    src = net.source_matrix().astype(float)

    def f_and_jac(u):
        z = np.exp(u)
        flux = deterministic_rates(sys, z)
        total = flux.sum() or 1.0
        g = basis.T @ ode_rhs(sys, z)
        jg = basis.T @ jacobian(sys, z) * z[None, :]
        grad_total = flux @ src  # d(total)/du
        r = g / total
        jr = (jg - np.outer(r, grad_total)) / total
        f = np.concatenate([r, (w @ z - totals) / tscale])
        jac = np.vstack([jr, w * z[None, :] / tscale])
        return f, jac

    u = np.log(z0)
    for _ in range(max_iter):
        r, jac = f_and_jac(u)
        base = np.linalg.norm(r)
        if np.max(np.abs(r), initial=0.0) < tol:
            break
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-8:
            if np.linalg.norm(f_and_jac(u + lam * step)[0]) < base:
                break
            lam /= 2
        u = u + lam * step
    return np.exp(u)
