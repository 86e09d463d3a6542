"""Exact stochastic simulation (direct method) and ergodic-average estimates."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import MassActionSystem, stoichiometric_matrix

RNG_ALGORITHM = "philox4x64-10"


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # jump times, times[0] == 0
    states: np.ndarray  # states[i] holds on [times[i], times[i+1])
    reactions: np.ndarray  # reaction fired to enter states[i]; -1 for the initial state
    seed: int
    t_end: float
    absorbed: bool
    rng: str = RNG_ALGORITHM
    step_limited: bool = False  # stopped by max_steps; t_end is then the last jump time

    def __len__(self):
        return len(self.times)

    def to_csv(self, species: Sequence[str]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", *species])
        for t, s in zip(self.times, self.states):
            writer.writerow([repr(float(t)), *(int(v) for v in s)])
        return buf.getvalue()


@dataclass(frozen=True)
class EmpiricalDistribution:
    support: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]  # normalized occupation fractions
    total_weight: float  # observed time span

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.weights))

    def to_csv(self, species: Sequence[str]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*species, "probability"])
        for s, w in zip(self.support, self.weights):
            writer.writerow([*s, repr(float(w))])
        return buf.getvalue()

    def to_json(self, species: Sequence[str]) -> str:
        return json.dumps(
            {
                "species": list(species),
                "states": [list(s) for s in self.support],
                "probabilities": list(self.weights),
                "total_weight": self.total_weight,
            }
        )


class AbsorbedBeforeBurnIn(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def simulate(
    sys: MassActionSystem, x0: Sequence[int], t_end: float, seed: int, max_steps: int | None = None
) -> Trajectory:
    """Gillespie direct method on ``[0, t_end]``.

    Stops early, flagging ``absorbed``, when the total propensity is zero.
    With ``max_steps`` the run also stops after that many jumps, which keeps
    explosive systems bounded; the horizon is then cut to the last jump.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if max_steps is not None and max_steps < 1:
        raise ValueError("max_steps must be positive")
    net = sys.network
    rng = make_rng(seed)
    src = net.source_matrix()
    xi = stoichiometric_matrix(net).T
    kappa = sys.rate_array
    x = np.array(x0, dtype=np.int64)
    t = 0.0
    times, states, fired = [0.0], [x.copy()], [-1]
    absorbed = limited = False
    # per-reaction (species, order) pairs for fast falling factorials
    terms = [[(int(i), int(src[j, i])) for i in np.flatnonzero(src[j])] for j in range(net.k)]
    props = np.empty(net.k)
    while True:
        if max_steps is not None and len(times) > max_steps:
            limited = True
            break
        for j in range(net.k):
            a = kappa[j]
            for i, order in terms[j]:
                xv = x[i]
                for q in range(order):
                    a *= xv - q
                if a <= 0:
                    a = 0.0
                    break
            props[j] = a
        total = props.sum()
        if total <= 0:
            absorbed = True
            break
        t += rng.exponential(1.0 / total)
        if t >= t_end:
            break
        j = int(np.searchsorted(np.cumsum(props), rng.random() * total, side="right"))
        j = min(j, net.k - 1)
        while props[j] == 0:  # guard against landing on a zero-width bin
            j -= 1
        x = x + xi[j]
        times.append(t)
        states.append(x.copy())
        fired.append(j)
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states, dtype=np.int64).reshape(len(states), net.n),
        reactions=np.asarray(fired, dtype=np.int64),
        seed=int(seed),
        t_end=float(times[-1] if limited else t_end),
        absorbed=absorbed,
        step_limited=limited,
    )


def empirical_distribution(traj: Trajectory, burn_in: float = 0.0) -> EmpiricalDistribution:
    """Time-weighted occupation of each state over ``[burn_in, t_end]``.

    An absorbed trajectory holds its last state until ``t_end``.
    """
    if not burn_in < traj.t_end:
        raise ValueError("burn_in must precede the final time")
    if traj.absorbed and traj.times[-1] < burn_in:
        raise AbsorbedBeforeBurnIn(f"trajectory absorbed at t={traj.times[-1]:.6g} before burn-in {burn_in}")
    starts = np.maximum(traj.times, burn_in)
    ends = np.append(traj.times[1:], traj.t_end)
    ends = np.maximum(np.minimum(ends, traj.t_end), burn_in)
    dwell = ends - starts
    occupancy: dict[tuple[int, ...], float] = {}
    for s, d in zip(traj.states, dwell):
        if d > 0:
            key = tuple(int(v) for v in s)
            occupancy[key] = occupancy.get(key, 0.0) + d
    total = math.fsum(occupancy.values())
    support = tuple(sorted(occupancy))
    return EmpiricalDistribution(support, tuple(occupancy[s] / total for s in support), total)


def pooled_empirical(dists: Sequence[EmpiricalDistribution]) -> EmpiricalDistribution:
    """Time-weighted pooling of several runs; independent of the input order."""
    acc: dict[tuple[int, ...], float] = {}
    for d in dists:
        for s, w in zip(d.support, d.weights):
            acc[s] = acc.get(s, 0.0) + w * d.total_weight
    total = math.fsum(acc.values())
    support = tuple(sorted(acc))
    return EmpiricalDistribution(support, tuple(acc[s] / total for s in support), total)
