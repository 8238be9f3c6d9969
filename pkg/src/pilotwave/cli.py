"""Deterministic experiment runner.

Each subcommand resolves its parameters (command-line flags beat config-file
entries beat defaults), runs one module-level experiment, and writes CSV and
JSON artifacts plus a manifest recording the tool version, the resolved
configuration hash, the seed, and the numerical tolerances in effect.  The
same configuration and seed reproduce byte-identical CSVs; CSV output is
RFC 4180 (CRLF, header row) with floats as shortest round-trip decimals.

Exit codes: 2 for configuration errors, 3 for numerical failures surfaced
from the modules.
"""

import csv
import functools
import hashlib
import json
import math
import os
import sys

import click
import numpy as np
from click.core import ParameterSource
from scipy.stats import kstest

from . import __version__
from .driftfield import (DRIFT_SETTINGS, SIGN_EPS, build_drift_field, classify,
                         long_drift, radial_balance)
from .entropy import (ENTROPY_TOL, PERMUTATION_TOL, CoarseGrain,
                      coarse_grained_H, is_entropy_conserving,
                      is_permutation_matrix)
from .errors import PilotWaveError
from .fieldmodels import (DEFAULT_PHASES, DECAY_SETTINGS, MEASUREMENT_SETTINGS,
                          decay_ensemble, detection_probability,
                          measurement_ensemble, one_particle_cdf)
from .guidance import ATNODE_REL, integrate_ensemble
from .integrate import TWO_PI
from .relaxation import (born_density, evolve_backtrack, gaussian_density,
                         grid_axes, nine_mode_state, relaxation_run)
from .spectralline import LINE_SETTINGS, line_profile, modality
from .states import default_domain, load_state, random_state, sample_born
from .vorticity import census, find_nodes, total_vorticity


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _settings_dict(s):
    return {"rtol": s.rtol, "atol": s.atol, "max_step": s.max_step,
            "node_guard_radius": s.node_guard_radius,
            "max_halvings": s.max_halvings}


def _manifest(out, command, params, tolerances, outputs):
    canon = json.dumps(params, sort_keys=True)
    doc = {
        "tool": "pilotwave",
        "version": __version__,
        "command": command,
        "seed": params.get("seed"),
        "config": params,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "tolerances": tolerances,
        "outputs": {p: _sha256(p) for p in outputs},
    }
    return _write_json(f"{out}.manifest.json", doc)


def _resolve(ctx, skip=("config",)):
    """Effective parameters: command line > config file > declared defaults."""
    cfg = {}
    path = ctx.params.get("config")
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise click.UsageError(f"config file unusable: {e}")
        if not isinstance(cfg, dict):
            raise click.UsageError("config file must hold a JSON object")
    by_name = {p.name: p for p in ctx.command.params}
    out = {}
    for name, value in ctx.params.items():
        if name in skip:
            continue
        if (ctx.get_parameter_source(name) != ParameterSource.COMMANDLINE
                and name in cfg):
            param = by_name[name]
            value = param.type.convert(cfg[name], param, ctx)
        out[name] = value
    if out.get("seed") is None:
        raise click.UsageError("a seed is required (--seed or config entry)")
    unknown = set(cfg) - set(by_name)
    if unknown:
        raise click.UsageError(f"config keys not understood: {sorted(unknown)}")
    if out.get("out"):
        parent = os.path.dirname(out["out"])
        if parent:
            os.makedirs(parent, exist_ok=True)
    return out


def _numerical_errors(fn):
    @functools.wraps(fn)
    def wrapper(*a, **k):
        try:
            return fn(*a, **k)
        except PilotWaveError as e:
            click.echo(f"numerical failure: {type(e).__name__}: {e}", err=True)
            sys.exit(3)
    return wrapper


def _get_state(params, key="state"):
    """A state from --state (path or 'nine-mode') or --m plus the seed."""
    path = params.get(key)
    m = params.get("m")
    if path and m:
        raise click.UsageError("give either --state or --m, not both")
    if path == "nine-mode":
        return nine_mode_state(params["seed"])
    if path:
        try:
            return load_state(path)
        except (OSError, KeyError, ValueError) as e:
            raise click.UsageError(f"state file unusable: {e}")
    if m:
        return random_state(m, params["seed"])
    raise click.UsageError("a state is required (--state file or --m)")


def _write_frame(prefix, grid):
    """Row-major float64 dump plus a JSON sidecar with the geometry."""
    raw = f"{prefix}.f64"
    grid.rho.astype(">f8").tofile(raw)
    side = _write_json(f"{prefix}.json", {
        "bounds": [float(grid.xs[0] - grid.dx / 2), float(grid.xs[-1] + grid.dx / 2),
                   float(grid.ys[0] - grid.dy / 2), float(grid.ys[-1] + grid.dy / 2)],
        "nx": int(grid.rho.shape[0]), "ny": int(grid.rho.shape[1]),
        "T": grid.t / TWO_PI, "byte_order": "big", "layout": "row-major"})
    return [raw, side]


_seed_opt = click.option("--seed", type=int, default=None,
                         help="RNG seed (mandatory here or in the config)")
_config_opt = click.option("--config", type=click.Path(), default=None,
                           help="JSON file with default parameter values")
_out_opt = lambda d: click.option("--out", type=str, default=d,
                                  help="output path prefix")


@click.group()
@click.version_option(__version__, prog_name="pilotwave")
def main():
    """Pilot-wave numerical laboratory: deterministic, seeded experiments."""


# ---------------------------------------------------------------------------
# vorticity
# ---------------------------------------------------------------------------

@main.command("vorticity-census")
@click.option("--m", type=int, default=2, help="energy cutoff")
@click.option("--n", type=int, default=10000, help="number of random states")
@click.option("--workers", type=int, default=1, help="process pool size")
@_seed_opt
@_config_opt
@_out_opt("census")
@click.pass_context
@_numerical_errors
def cmd_census(ctx, **_kw):
    """Total-vorticity histogram over random states at cutoff m."""
    p = _resolve(ctx)
    rows = census(p["m"], p["n"], p["seed"], workers=p["workers"])
    out_csv = _write_csv(f"{p['out']}.csv", ["m", "seed", "winding", "category"],
                         [(p["m"], k, "" if w is None else w, cat)
                          for k, w, cat in rows])
    windings = [w for _, w, _ in rows if w is not None]
    counts = {str(w): windings.count(w) for w in sorted(set(windings))}
    cats = [c for _, _, c in rows]
    summary = {
        "m": p["m"], "n": p["n"],
        "winding_counts": counts,
        "winding_fractions": {k: v / p["n"] for k, v in counts.items()},
        "category_fractions": {c: cats.count(c) / p["n"] for c in sorted(set(cats))},
    }
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "vorticity-census", p,
              {"circle_tol": 1e-9}, [out_csv, out_json])
    click.echo(f"{p['n']} states at m={p['m']}: " + json.dumps(
        summary["winding_fractions"], sort_keys=True))


@main.command("find-nodes")
@click.option("--state", type=str, default=None,
              help="state JSON file, or 'nine-mode'")
@click.option("--m", type=int, default=None, help="random state at this cutoff")
@click.option("--t", type=float, default=0.0, help="time of the snapshot")
@click.option("--box", type=float, default=None,
              help="half-width of the search box (default: state domain)")
@click.option("--grid-n", type=int, default=256, help="seeding grid resolution")
@_seed_opt
@_config_opt
@_out_opt("nodes")
@click.pass_context
@_numerical_errors
def cmd_find_nodes(ctx, **_kw):
    """Locate wave-function nodes and their individual vorticities."""
    p = _resolve(ctx)
    state = _get_state(p)
    box = p["box"] or default_domain(state.m)
    ns = find_nodes(state, p["t"], search_box=(-box, box, -box, box),
                    grid_n=p["grid_n"])
    out_csv = _write_csv(f"{p['out']}.csv", ["qx", "qy", "winding"],
                         [(n.qx, n.qy, round(n.vorticity / TWO_PI))
                          for n in ns.nodes])
    vc = total_vorticity(state)
    summary = {"count": len(ns.nodes),
               "winding_sum": int(round(sum(n.vorticity for n in ns.nodes)
                                        / TWO_PI)),
               "state_winding": vc.winding, "t": p["t"]}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "find-nodes", p,
              {"dedup": 1e-6, "winding_radius": 1e-3}, [out_csv, out_json])
    click.echo(f"{summary['count']} nodes, winding sum {summary['winding_sum']}")


# ---------------------------------------------------------------------------
# drift fields
# ---------------------------------------------------------------------------

def _field_artifacts(field, cls, out):
    E, F = np.meshgrid(field.eta, field.phi, indexing="ij")
    ang = _write_csv(f"{out}.angular.csv", ["eta", "phi", "d_phi"],
                     zip(E.ravel(), F.ravel(), field.d_phi.ravel()))
    rad = _write_csv(f"{out}.radial.csv", ["eta", "phi", "d_eta"],
                     zip(E.ravel(), F.ravel(), field.d_eta.ravel()))
    inward, outward = radial_balance(field)
    doc = {"label": cls.label,
           "axes": [{"phi": a, "kind": k} for a, k in cls.axes],
           "masked_fraction": float(np.mean(field.masked)),
           "inward_fraction": inward, "outward_fraction": outward}
    return [ang, rad, _write_json(f"{out}.classification.json", doc)], doc


@main.command("drift-field")
@click.option("--state", type=str, default=None,
              help="state JSON file, or 'nine-mode'")
@click.option("--m", type=int, default=None, help="random state at this cutoff")
@click.option("--eta-min", type=float, default=4.0)
@click.option("--eta-max", type=float, default=20.0)
@click.option("--grid", type=int, default=100, help="points per polar axis")
@_seed_opt
@_config_opt
@_out_opt("drift")
@click.pass_context
@_numerical_errors
def cmd_drift_field(ctx, **_kw):
    """One-period displacement field on a polar grid, with classification."""
    p = _resolve(ctx)
    state = _get_state(p)
    eta = np.linspace(p["eta_min"], p["eta_max"], p["grid"])
    phi = np.linspace(0.0, TWO_PI, p["grid"], endpoint=False)
    field = build_drift_field(state, eta=eta, phi=phi)
    cls = classify(field)
    outputs, doc = _field_artifacts(field, cls, p["out"])
    _manifest(p["out"], "drift-field", p,
              {"sign_eps": SIGN_EPS, "integrator": _settings_dict(DRIFT_SETTINGS)},
              outputs)
    click.echo(f"{doc['label']}  axes={doc['axes']}")


@main.command("classify")
@click.option("--state", type=str, default=None,
              help="state JSON file, or 'nine-mode'")
@click.option("--m", type=int, default=None, help="random state at this cutoff")
@click.option("--grid", type=int, default=48, help="points per polar axis")
@_seed_opt
@_config_opt
@_out_opt("classify")
@click.pass_context
@_numerical_errors
def cmd_classify(ctx, **_kw):
    """Drift-field type label only (coarser default grid than drift-field)."""
    p = _resolve(ctx)
    state = _get_state(p)
    eta = np.linspace(4.0, 20.0, p["grid"])
    phi = np.linspace(0.0, TWO_PI, p["grid"], endpoint=False)
    field = build_drift_field(state, eta=eta, phi=phi)
    cls = classify(field)
    doc = {"label": cls.label,
           "axes": [{"phi": a, "kind": k} for a, k in cls.axes],
           "winding": total_vorticity(state).winding}
    out_json = _write_json(f"{p['out']}.json", doc)
    _manifest(p["out"], "classify", p, {"sign_eps": SIGN_EPS}, [out_json])
    click.echo(f"{doc['label']} (winding {doc['winding']})")


@main.command("long-drift")
@click.option("--state", type=str, default=None,
              help="state JSON file, or 'nine-mode'")
@click.option("--m", type=int, default=None, help="random state at this cutoff")
@click.option("--n", type=int, default=200, help="trajectories")
@click.option("--periods", type=int, default=1000)
@click.option("--eta-min", type=float, default=10.0)
@click.option("--eta-max", type=float, default=20.0)
@_seed_opt
@_config_opt
@_out_opt("longdrift")
@click.pass_context
@_numerical_errors
def cmd_long_drift(ctx, **_kw):
    """Radial displacement statistics over many wave-function periods."""
    p = _resolve(ctx)
    state = _get_state(p)
    ld = long_drift(state, p["n"], eta_range=(p["eta_min"], p["eta_max"]),
                    periods=p["periods"], seed=p["seed"])
    out_csv = _write_csv(f"{p['out']}.csv", ["eta0", "eta1", "failed"],
                         zip(ld.eta0, ld.eta1, ld.failed))
    summary = {"median_shift": ld.median_shift, "periods": p["periods"],
               "failed_fraction": float(np.mean(ld.failed))}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "long-drift", p,
              {"integrator": _settings_dict(DRIFT_SETTINGS)},
              [out_csv, out_json])
    click.echo(f"median shift {ld.median_shift:+.3f} over {p['periods']} periods")


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

@main.command("relax-density")
@click.option("--state", type=str, default="nine-mode",
              help="state JSON file, or 'nine-mode'")
@click.option("--w", type=float, default=1.0,
              help="initial Gaussian width relative to sigma = 1")
@click.option("--periods", type=int, default=19)
@click.option("--grid", type=int, default=256)
@click.option("--method", type=click.Choice(["fv", "backtrack"]), default="fv")
@click.option("--dt", type=float, default=None,
              help="fixed advection step; default picks one from the flow speed")
@click.option("--cfl", type=float, default=0.5)
@click.option("--frames/--no-frames", default=False,
              help="dump a density frame per period (fv only)")
@_seed_opt
@_config_opt
@_out_opt("relax")
@click.pass_context
@_numerical_errors
def cmd_relax_density(ctx, **_kw):
    """Coarse-grained H of a Gaussian ensemble against the state's own flow."""
    p = _resolve(ctx)
    state = _get_state(p)
    sigma = (p["w"], p["w"])
    outputs = []
    if p["method"] == "fv":
        res = relaxation_run(state, sigma=sigma, periods=p["periods"],
                             grid_n=p["grid"], dt=p["dt"], cfl=p["cfl"],
                             keep_frames=p["frames"])
        rows = zip(res.times / TWO_PI, res.hbar,
                   res.hbar_control if len(res.hbar_control) else
                   [""] * len(res.hbar))
        outputs.append(_write_csv(f"{p['out']}.hbar.csv",
                                  ["period", "hbar", "hbar_control"], rows))
        outputs += _write_frame(f"{p['out']}.final", res.final)
        for i, fr in enumerate(res.frames):
            outputs += _write_frame(f"{p['out']}.frame{i:03d}", fr)
        summary = {"hbar0": float(res.hbar[0]), "hbar_final": float(res.hbar[-1]),
                   "ratio": float(res.hbar[-1] / res.hbar[0]),
                   "control_max": float(np.max(res.hbar_control))
                   if len(res.hbar_control) else None,
                   "fv": {"dt": res.stats.dt, "steps": res.stats.steps,
                          "cap": res.stats.cap, "cap_hits": res.stats.cap_hits,
                          "outflux": res.stats.outflux,
                          "mass_residual_max": res.stats.mass_residual_max}}
    else:
        L = default_domain(state.m)
        xs = grid_axes(L, p["grid"])
        t1 = p["periods"] * TWO_PI
        rho0 = gaussian_density(xs, xs, sigma=sigma)
        born0 = born_density(state, xs, xs, 0.0)
        keep = born0.rho > 1e-300

        def f0(x, y):
            ix = np.clip(((x - xs[0]) / rho0.dx).astype(int), 0, len(xs) - 1)
            iy = np.clip(((y - xs[0]) / rho0.dy).astype(int), 0, len(xs) - 1)
            with np.errstate(all="ignore"):
                ratio = np.where(keep, rho0.rho / np.where(keep, born0.rho, 1.0),
                                 0.0)
            return ratio[ix, iy]

        grid_t, failed = evolve_backtrack(f0, state, t1, rho0)
        born_t = born_density(state, xs, xs, t1)
        hbar = coarse_grained_H(grid_t.rho, born_t.rho, CoarseGrain(32, 32),
                                grid_t.cell_area)
        outputs.append(_write_csv(f"{p['out']}.hbar.csv",
                                  ["period", "hbar", "hbar_control"],
                                  [(p["periods"], hbar, "")]))
        outputs += _write_frame(f"{p['out']}.final", grid_t)
        summary = {"hbar_final": float(hbar), "failed_fraction": failed}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "relax-density", p,
              {"coarse_grain": [32, 32], "velocity_cap": "dx/dt/10"},
              outputs + [out_json])
    click.echo(json.dumps({k: summary[k] for k in summary
                           if not isinstance(summary[k], dict)}, sort_keys=True))


@main.command("trajectories")
@click.option("--state", type=str, default=None,
              help="state JSON file, or 'nine-mode'")
@click.option("--m", type=int, default=None, help="random state at this cutoff")
@click.option("--n", type=int, default=20, help="trajectories")
@click.option("--periods", type=float, default=1.0)
@click.option("--samples", type=int, default=64, help="output times per period")
@_seed_opt
@_config_opt
@_out_opt("traj")
@click.pass_context
@_numerical_errors
def cmd_trajectories(ctx, **_kw):
    """Sampled trajectories from Born-distributed starts."""
    p = _resolve(ctx)
    state = _get_state(p)
    rng = np.random.default_rng(p["seed"])
    pts = sample_born(state, p["n"], rng)
    n_seg = max(1, int(round(p["samples"] * p["periods"])))
    t_knots = np.linspace(0.0, p["periods"] * TWO_PI, n_seg + 1)
    alive = np.arange(p["n"])
    rows = [(i, 0.0, pts[i, 0], pts[i, 1]) for i in range(p["n"])]
    cur = pts.copy()
    for k in range(n_seg):
        res = integrate_ensemble(state, cur, t_knots[k], t_knots[k + 1])
        ok = ~res.failed
        alive = alive[ok]
        cur = res.y[ok]
        rows += [(int(i), t_knots[k + 1] / TWO_PI, x, y)
                 for i, (x, y) in zip(alive, cur)]
        if len(alive) == 0:
            break
    rows.sort(key=lambda r: (r[0], r[1]))
    out_csv = _write_csv(f"{p['out']}.csv", ["trajectory", "period", "x", "y"],
                         rows)
    summary = {"n": p["n"], "survivors": int(len(alive)),
               "failed_fraction": 1.0 - len(alive) / p["n"]}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "trajectories", p,
              {"atnode_rel": ATNODE_REL}, [out_csv, out_json])
    click.echo(f"{len(alive)}/{p['n']} trajectories completed")


# ---------------------------------------------------------------------------
# field models
# ---------------------------------------------------------------------------

def _hist_csv(path, values, bins):
    hist, edges = np.histogram(values, bins=bins, density=True)
    return _write_csv(path, ["lo", "hi", "density"],
                      zip(edges[:-1], edges[1:], hist))


@main.command("decay")
@click.option("--n", type=int, default=10000)
@click.option("--t", type=float, default=math.pi, help="end time")
@click.option("--w1", type=float, default=1.0, help="widening of the q1 start")
@click.option("--w2", type=float, default=1.0, help="widening of the q2 start")
@click.option("--bins", type=int, default=60)
@_seed_opt
@_config_opt
@_out_opt("decay")
@click.pass_context
@_numerical_errors
def cmd_decay(ctx, **_kw):
    """Two-mode decay ensemble: joint samples and marginals at time t."""
    p = _resolve(ctx)
    ens = decay_ensemble(p["n"], t_end=p["t"], w=(p["w1"], p["w2"]),
                         seed=p["seed"])
    ok = ~ens.failed
    q1, q2 = ens.samples[ok, 0], ens.samples[ok, 1]
    out_csv = _write_csv(f"{p['out']}.samples.csv", ["q1", "q2"], zip(q1, q2))
    m1 = _hist_csv(f"{p['out']}.q1.csv", q1, p["bins"])
    m2 = _hist_csv(f"{p['out']}.q2.csv", q2, p["bins"])
    ks2 = kstest(q2, lambda q: one_particle_cdf(q, scale=1.0)).statistic
    ks1 = kstest(q1 * math.sqrt(2.0), "norm").statistic
    summary = {"n": p["n"], "t": p["t"],
               "failed_fraction": float(np.mean(ens.failed)),
               "ks_q2_vs_one_particle": float(ks2),
               "ks_q1_vs_vacuum": float(ks1),
               "corr_q1_q2": float(np.corrcoef(q1, q2)[0, 1])}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "decay", p,
              {"integrator": _settings_dict(DECAY_SETTINGS)},
              [out_csv, m1, m2, out_json])
    click.echo(json.dumps(summary, sort_keys=True))


@main.command("energy-measure")
@click.option("--case",
              type=click.Choice(["vacuum", "one-particle", "superposition"]),
              default="superposition")
@click.option("--theta", type=float, default=None,
              help="superposition phase; omit to sweep ten equispaced phases")
@click.option("--w", type=float, default=1.0)
@click.option("--t-end", type=float, default=4.5)
@click.option("--n", type=int, default=10000)
@click.option("--threshold", type=float, default=9.0,
              help="pointer reading that counts as a particle detection")
@_seed_opt
@_config_opt
@_out_opt("measure")
@click.pass_context
@_numerical_errors
def cmd_energy_measure(ctx, **_kw):
    """Pointer-coupled energy measurement of a field mode."""
    p = _resolve(ctx)
    name = p["case"].replace("-", "_")
    outputs = []
    if name == "superposition" and p["theta"] is None:
        mean, per = detection_probability(p["w"], T_end=p["t_end"], n=p["n"],
                                          seed=p["seed"],
                                          threshold=p["threshold"])
        rows = [(th, pr) for th, pr in zip(DEFAULT_PHASES, per)]
        outputs.append(_write_csv(f"{p['out']}.per_theta.csv",
                                  ["theta", "p_detect"], rows))
        summary = {"case": p["case"], "w": p["w"], "T_end": p["t_end"],
                   "p_detect_mean": mean,
                   "p_detect_per_theta": [float(x) for x in per]}
    else:
        case = ("superposition", p["theta"]) if name == "superposition" else name
        y0, y1, failed = measurement_ensemble(case, n=p["n"], w=p["w"],
                                              T_end=p["t_end"], seed=p["seed"])
        ok = ~failed
        Q, Y = y1[ok, 0], y1[ok, 1]
        outputs.append(_write_csv(f"{p['out']}.samples.csv", ["Q", "Y"],
                                  zip(Q, Y)))
        summary = {"case": p["case"], "theta": p["theta"], "w": p["w"],
                   "T_end": p["t_end"],
                   "failed_fraction": float(np.mean(failed)),
                   "p_detect": float(np.mean(Y > p["threshold"])),
                   "mean_Y": float(np.mean(Y)), "std_Y": float(np.std(Y))}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "energy-measure", p,
              {"integrator": _settings_dict(MEASUREMENT_SETTINGS),
               "threshold": p["threshold"]}, outputs + [out_json])
    click.echo(json.dumps({k: v for k, v in summary.items()
                           if not isinstance(v, list)}, sort_keys=True))


@main.command("spectral-line")
@click.option("--w", type=float, default=1.0, help="Q-widening of the source")
@click.option("--t", "--T", "t_obs", type=float, default=5.0,
              help="inverse fractional resolution (rescaled time)")
@click.option("--n", type=int, default=10000)
@click.option("--bins", type=int, default=80)
@_seed_opt
@_config_opt
@_out_opt("line")
@click.pass_context
@_numerical_errors
def cmd_spectral_line(ctx, **_kw):
    """Model line profile in the reading deviation devE."""
    p = _resolve(ctx)
    if not 1.0 <= p["t_obs"] <= 1000.0:
        raise click.UsageError(f"--t must lie in [1, 1000], got {p['t_obs']}")
    prof = line_profile(p["w"], p["t_obs"], n=p["n"], seed=p["seed"],
                        bins=p["bins"])
    out_csv = _write_csv(f"{p['out']}.csv", ["lo", "hi", "density"],
                         zip(prof.edges[:-1], prof.edges[1:], prof.hist))
    summary = {"w": p["w"], "T": p["t_obs"], "n": p["n"],
               "mean": prof.mean, "std": prof.std,
               "modality": modality(prof.ensemble.devE, bandwidth=0.2),
               "failed_fraction": prof.failed_fraction}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "spectral-line", p,
              {"integrator": _settings_dict(LINE_SETTINGS),
               "kde_bandwidth": 0.2}, [out_csv, out_json])
    click.echo(json.dumps(summary, sort_keys=True))


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

@main.command("entropy-check")
@click.option("--trials", type=int, default=1000)
@click.option("--sizes", type=str, default="3,5,8",
              help="comma-separated matrix sizes")
@_seed_opt
@_config_opt
@_out_opt("entropy")
@click.pass_context
@_numerical_errors
def cmd_entropy_check(ctx, **_kw):
    """Entropy conservation iff permutation, over random transition matrices.

    Every tenth trial uses an exact permutation matrix so both sides of the
    equivalence are exercised.
    """
    p = _resolve(ctx)
    try:
        sizes = [int(s) for s in p["sizes"].split(",") if s.strip()]
    except ValueError:
        raise click.UsageError(f"bad --sizes value {p['sizes']!r}")
    rng = np.random.default_rng(p["seed"])
    rows = []
    mismatches = 0
    for k in range(p["trials"]):
        n = sizes[k % len(sizes)]
        if k % 10 == 9:
            T = np.eye(n)[rng.permutation(n)]
        else:
            T = rng.uniform(size=(n, n))
            T /= T.sum(axis=0, keepdims=True)
        perm = is_permutation_matrix(T)
        cons = is_entropy_conserving(T, seed=p["seed"] + k)
        mismatches += int(perm != cons)
        rows.append((k, n, perm, cons))
    out_csv = _write_csv(f"{p['out']}.csv",
                         ["trial", "size", "permutation", "conserving"], rows)
    summary = {"trials": p["trials"], "sizes": sizes,
               "mismatches": mismatches, "equivalence_holds": mismatches == 0}
    out_json = _write_json(f"{p['out']}.json", summary)
    _manifest(p["out"], "entropy-check", p,
              {"entropy_tol": ENTROPY_TOL, "permutation_tol": PERMUTATION_TOL},
              [out_csv, out_json])
    click.echo(json.dumps(summary, sort_keys=True))


if __name__ == "__main__":
    main()
