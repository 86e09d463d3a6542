"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 truncation could not be certified,
4 a theorem's hypothesis (or a verification) failed, 5 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys as _sys

import click

from .balance import HypothesisError, NumericalFailure, solve_complex_balanced_equilibrium
from .network import CRNParseError, MassActionSystem, load_network
from .ssa import AbsorbedBeforeBurnIn, empirical_distribution, simulate
from .stationary import (
    FiniteDistribution,
    ProductFormDescriptor,
    complex_balanced_distribution_check,
    direct_stationary_solve,
    master_equation_report,
    product_form,
    terminal_form_distribution,
    tv_distance,
)
from .statespace import StateBox, gamma_system, irreducible_components, is_positive_component
from .structure import analyze_structure

EXIT_OK, EXIT_PARSE, EXIT_TRUNCATED, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4, 5


class Abort(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _vector(text: str, what: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise Abort(f"cannot parse {what} {text!r}; expected comma-separated integers", EXIT_PARSE)
    if any(v < 0 for v in vals):
        raise Abort(f"{what} entries must be non-negative", EXIT_PARSE)
    return vals


def _params(items) -> dict[str, float]:
    out = {}
    for item in items:
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise Abort(f"bad --param {item!r}; expected NAME=VALUE", EXIT_PARSE)
    return out


def _load(path: str, params) -> MassActionSystem:
    try:
        return load_network(path, _params(params))
    except CRNParseError as exc:
        raise Abort(f"{path}: {exc}", EXIT_PARSE)
    except (OSError, ValueError) as exc:
        raise Abort(f"{path}: {exc}", EXIT_PARSE)


def _box(sys: MassActionSystem, box: str | None, init: tuple[int, ...] | None) -> StateBox:
    n = sys.network.n
    if box is None:
        cap = max(10, 2 * max(init or (0,)))
        return StateBox.uniform(n, cap)
    caps = _vector(box, "box")
    if len(caps) == 1:
        caps = caps * n
    if len(caps) != n:
        raise Abort(f"box has {len(caps)} entries, network has {n} species", EXIT_PARSE)
    return StateBox(caps)


def _init(sys: MassActionSystem, init: str | None) -> tuple[int, ...] | None:
    if init is None:
        return None
    x = _vector(init, "initial state")
    if len(x) != sys.network.n:
        raise Abort(f"initial state has {len(x)} entries, network has {sys.network.n} species", EXIT_PARSE)
    return x


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("CRN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise Abort(f"CRN_SEED must be an integer, got {env!r}", EXIT_PARSE)


def _run(fn):
    try:
        code = fn()
    except Abort as exc:
        click.echo(f"error: {exc}", err=True)
        _sys.exit(exc.code)
    except HypothesisError as exc:
        click.echo(f"error: {exc}", err=True)
        _sys.exit(EXIT_HYPOTHESIS)
    except NumericalFailure as exc:
        click.echo(f"error: numerical failure: {exc}", err=True)
        _sys.exit(EXIT_NUMERIC)
    _sys.exit(code or EXIT_OK)


common_params = click.option("--param", "params", multiple=True, help="Bind a named rate constant, NAME=VALUE.")
out_option = click.option("--out", type=click.Path(dir_okay=False), help="Write output to PATH instead of stdout.")


@click.group()
def main():
    """Structural and stochastic analysis of mass-action reaction networks."""


@main.command()
@click.argument("file", type=click.Path())
@click.option("--text", "as_text", is_flag=True, help="Human-readable report.")
@common_params
@out_option
def analyze(file, as_text, params, out):
    """Structural report: deficiency, linkage classes, terminal SCCs."""

    def go():
        sys = _load(file, params)
        report = analyze_structure(sys.network)
        data = report.to_dict(sys.network)
        if as_text:
            net = sys.network
            lines = [
                f"species: {' '.join(net.species_names)}",
                f"m={report.m} ell={report.ell} s={report.s} delta={report.delta}",
                f"weakly reversible: {report.weakly_reversible}",
                "terminal SCCs: " + "; ".join("{" + ", ".join(net.complex_label(c) for c in scc) + "}" for scc in report.terminal_sccs),
                "conservation laws: " + "; ".join(str(list(w)) for w in report.conservation_laws),
            ]
            _emit("\n".join(lines) + "\n", out)
        else:
            _emit(json.dumps(data, indent=2) + "\n", out)

    _run(go)


def _component_dict(sys, comp):
    entry = {"states": [list(s) for s in comp.states], "truncated": comp.truncated}
    if comp.truncated:
        entry["active_reactions"] = None
        entry["positive"] = None
    else:
        gs = gamma_system(sys, comp)
        entry["active_reactions"] = list(gs.active_reactions)
        entry["positive"] = is_positive_component(sys, comp)
        entry["gamma_network"] = [sys.network.reaction_label(j) for j in gs.active_reactions]
    return entry


@main.command()
@click.argument("file", type=click.Path())
@click.option("--init", help="Initial state; the region is its compatibility class.")
@click.option("--box", help="Per-species caps, e.g. 6,6 (a single value applies to all).")
@click.option("--text", "as_text", is_flag=True, help="Human-readable listing.")
@common_params
@out_option
def components(file, init, box, as_text, params, out):
    """Irreducible components and transient states inside a box."""

    def go():
        sys = _load(file, params)
        x0 = _init(sys, init)
        sbox = _box(sys, box, x0)
        if x0 is not None and not sbox.contains(x0):
            raise Abort("initial state lies outside the box", EXIT_PARSE)
        analysis = irreducible_components(sys, sbox, through=x0)
        data = {
            "species": sys.network.species_names,
            "box": list(sbox.upper),
            "components": [_component_dict(sys, c) for c in analysis.components],
            "transient": [list(s) for s in analysis.transient],
            "truncated": analysis.truncated,
        }
        if as_text:
            lines = []
            for i, c in enumerate(data["components"]):
                flag = " (truncated)" if c["truncated"] else ""
                lines.append(f"component {i}{flag}: " + " ".join(str(tuple(s)) for s in c["states"]))
            lines.append("transient: " + " ".join(str(tuple(s)) for s in data["transient"]))
            _emit("\n".join(lines) + "\n", out)
        else:
            _emit(json.dumps(data, indent=2) + "\n", out)
        if any(c.truncated for c in analysis.components):
            click.echo("warning: some components leave the box; closedness not certified", err=True)
            return EXIT_TRUNCATED
        return EXIT_OK

    _run(go)


def _component_for(sys, x0, sbox):
    analysis = irreducible_components(sys, sbox, through=x0)
    comp = analysis.component_of(x0)
    if comp is None:
        raise Abort(f"initial state {x0} is transient; it lies in no irreducible component", EXIT_HYPOTHESIS)
    return comp


@main.command()
@click.argument("file", type=click.Path())
@click.option("--init", required=True, help="A state of the component to solve on.")
@click.option("--box", help="Per-species caps.")
@click.option("--method", type=click.Choice(["product", "terminal", "direct"]), default="direct", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True, help="Master-equation residual tolerance.")
@click.option(
    "--tv-tol", "tv_tol", type=float, default=1e-10, show_default=True,
    help="For product/terminal, maximum TV distance to the direct solve.",
)
@common_params
@out_option
def stationary(file, init, box, method, fmt, tol, tv_tol, params, out):
    """Stationary distribution on the component containing --init."""

    def go():
        sys = _load(file, params)
        x0 = _init(sys, init)
        sbox = _box(sys, box, x0)
        if not sbox.contains(x0):
            raise Abort("initial state lies outside the box", EXIT_PARSE)
        c = None
        if method == "product":
            c = solve_complex_balanced_equilibrium(sys)
            if c is None:
                raise HypothesisError(
                    "product-form theorem: system is not complex balanced (no positive complex balanced equilibrium)"
                )
        comp = _component_for(sys, x0, sbox)
        code = EXIT_OK
        if comp.truncated:
            if method != "direct":
                raise Abort("component leaves the box; enlarge --box", EXIT_TRUNCATED)
            click.echo("warning: component leaves the box; solving the truncated chain", err=True)
            code = EXIT_TRUNCATED
        if method == "product":
            dist = product_form(ProductFormDescriptor(tuple(c), comp))
        elif method == "terminal":
            dist = terminal_form_distribution(sys, comp)
        else:
            dist = direct_stationary_solve(sys, comp, allow_truncated=comp.truncated)
        report = master_equation_report(sys, dist)
        names = sys.network.species_names
        _emit(dist.to_csv(names) if fmt == "csv" else dist.to_json(names) + "\n", out)
        summary = {"method": method, "master_residual": float(report.max_residual)}
        tv = None
        if method != "direct":
            tv = tv_distance(dist, direct_stationary_solve(sys, comp))
            summary["tv_to_direct"] = tv
        click.echo(json.dumps(summary), err=True)
        if not comp.truncated and (report.max_residual > tol or (tv is not None and tv > tv_tol)):
            return EXIT_NUMERIC
        return code

    _run(go)


@main.command()
@click.argument("file", type=click.Path())
@click.option("--distribution", "dist_path", required=True, type=click.Path(), help="CSV or JSON distribution.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@common_params
@out_option
def verify(file, dist_path, tol, params, out):
    """Check a distribution against the master equation and complex balance."""

    def go():
        sys = _load(file, params)
        try:
            with open(dist_path, encoding="utf-8") as fh:
                text = fh.read()
            if text.lstrip().startswith("{"):
                dist, species = FiniteDistribution.from_json(text)
            else:
                dist, species = FiniteDistribution.from_csv(text)
        except (OSError, ValueError, KeyError, IndexError) as exc:
            raise Abort(f"{dist_path}: {exc}", EXIT_PARSE)
        if species != sys.network.species_names:
            raise Abort(f"distribution species {species} differ from network species", EXIT_PARSE)
        report = master_equation_report(sys, dist)
        from .statespace import IrreducibleComponent

        comp = IrreducibleComponent(dist.support)
        cb = complex_balanced_distribution_check(sys, comp, dist, tol)
        passed = report.max_residual <= tol
        data = {
            "master_residual": float(report.max_residual),
            "max_residual_state": list(report.location) if report.location is not None else None,
            "complex_balanced": bool(cb.passed),
            "complex_balance_residual": float(cb.max_residual),
            "tolerance": tol,
            "pass": bool(passed),
        }
        _emit(json.dumps(data, indent=2) + "\n", out)
        return EXIT_OK if passed else EXIT_HYPOTHESIS

    _run(go)


@main.command()
@click.argument("file", type=click.Path())
@click.option("--init", required=True)
@click.option("--t-end", "t_end", type=float, required=True)
@click.option("--seed", type=int, default=None, help="Falls back to $CRN_SEED, then 0.")
@click.option("--burn-in", "burn_in", type=float, default=None, help="Emit the empirical distribution after this time.")
@click.option("--max-steps", "max_steps", type=int, default=None, help="Stop after this many jumps.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@common_params
@out_option
def simulate_cmd(file, init, t_end, seed, burn_in, max_steps, fmt, params, out):
    """Exact SSA trajectory, or its empirical distribution with --burn-in."""

    def go():
        sys = _load(file, params)
        x0 = _init(sys, init)
        if not t_end > 0:
            raise Abort("--t-end must be positive", EXIT_PARSE)
        if max_steps is not None and max_steps < 1:
            raise Abort("--max-steps must be positive", EXIT_PARSE)
        traj = simulate(sys, x0, t_end, _seed(seed), max_steps=max_steps)
        if traj.step_limited:
            click.echo(f"warning: stopped after {max_steps} steps at t={traj.t_end!r}", err=True)
            if burn_in is not None and traj.t_end <= burn_in:
                raise Abort("step limit reached before the burn-in time", EXIT_NUMERIC)
        names = sys.network.species_names
        if burn_in is None:
            if fmt == "json":
                text = json.dumps(
                    {
                        "species": names,
                        "seed": traj.seed,
                        "rng": traj.rng,
                        "absorbed": traj.absorbed,
                        "step_limited": traj.step_limited,
                        "times": [float(t) for t in traj.times],
                        "states": traj.states.tolist(),
                    }
                ) + "\n"
            else:
                text = traj.to_csv(names)
        else:
            try:
                emp = empirical_distribution(traj, burn_in)
            except AbsorbedBeforeBurnIn as exc:
                raise Abort(str(exc), EXIT_NUMERIC)
            except ValueError as exc:
                raise Abort(str(exc), EXIT_PARSE)
            text = emp.to_csv(names) if fmt == "csv" else emp.to_json(names) + "\n"
        _emit(text, out)
        if traj.absorbed:
            click.echo(f"absorbed at t={traj.times[-1]!r}", err=True)

    _run(go)


simulate_cmd.name = "simulate"
main.add_command(simulate_cmd, "simulate")


if __name__ == "__main__":
    main()
