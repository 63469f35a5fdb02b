"""Command-line front end: ``dool <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import oracles, spectral
from .dlam import energy_series, exact_damped_wave, solution_grid, train_dlam, write_solution, TrigSeries
from .errors import (ConfigurationError, DomainError, InvalidCoefficientsError, NumericalFailure, PositivityError,
                     SamplingInfeasibleError)
from .inverse import InversionProblem, invert, write_report
from .models import ModelSpec, analytic_flux
from .operator import NetFluxMap, OperatorNet, save_operator
from .stepper import Trajectory, error_series, evolve, read_trajectory, relative_l2_error, write_trajectory
from .trainer import (SupervisedConfig, SpaceTimeOperator, train_dool, train_supervised)

EXACT_NAMES = {"heat": "heat", "heat_source": "heat_source", "fokker_planck": "fokker_planck"}


def version():
    try:
        return metadata.version("dool")
    except metadata.PackageNotFoundError:
        return "unknown"


def _out_dir(path, force):
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigurationError(f"output directory {out} is not empty; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out, doc, command, extra=None):
    meta = {"schema_version": 1, "command": command, "code_version": version(),
            "seed": None if doc is None else doc.get("seed"), "config": doc, **(extra or {})}
    (Path(out) / "meta.json").write_text(json.dumps(cfgmod.to_jsonable(meta), indent=2, default=str))


def _overrides(args, section="training"):
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        over[section] = {"epochs": args.epochs}
    return over


def _load(args, section="training"):
    doc = cfgmod.load(args.config, paper_scale=args.paper_scale, overrides=_overrides(args, section))
    if getattr(args, "out", None):
        doc["output"]["dir"] = args.out
    return doc


# --------------------------------------------------------------------------
# checkpoints

def save_checkpoint(net: OperatorNet, model: ModelSpec, doc, path):
    save_operator(net, path, {"model": model.to_dict(), "experiment": cfgmod.to_jsonable(doc)})


def load_checkpoint(path):
    p = Path(path)
    if p.is_dir():
        p = p / "checkpoint.json"
    if not p.exists():
        raise ConfigurationError(f"checkpoint {p} not found")
    doc = json.loads(p.read_text())
    if doc.get("kind") != "operator-net" or "model" not in doc:
        raise ConfigurationError(f"{p} is not a training checkpoint")
    return OperatorNet.from_dict(doc), ModelSpec.from_dict(doc["model"]), doc.get("experiment", {})


# --------------------------------------------------------------------------
# train

def run_train(doc, out):
    tc = cfgmod.train_config_of(doc)
    report = train_dool(tc)
    report.write(out)
    save_checkpoint(report.final_params, report.model, doc, out / "checkpoint.json")
    _write_meta(out, doc, "train", {"wall_time": report.wall_time, "final_loss": report.final_loss,
                                    "loss_floor": report.floor})
    return report


def cmd_train(args):
    doc = _load(args)
    if "model" not in doc:
        raise ConfigurationError("this config has no model section (use `dool dlam` for least-action configs)")
    out = _out_dir(doc["output"]["dir"], args.force)
    rep = run_train(doc, out)
    print(f"trained {doc['name']}: final loss {rep.final_loss:.6g} (floor {rep.floor:.6g}) "
          f"in {rep.wall_time:.1f}s -> {out}")
    return 0


# --------------------------------------------------------------------------
# solve

def initial_state(ic, model: ModelSpec):
    basis = model.basis
    if "preset" in ic:
        return oracles.initial_condition(ic["preset"], basis)
    path = Path(ic["coefficients"])
    if not path.exists():
        raise ConfigurationError(f"coefficient file {path} not found")
    try:
        cbasis, coeffs = spectral.coeffs_from_json(json.loads(path.read_text()))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: malformed coefficient file ({exc})") from exc
    if cbasis.family != basis.family or cbasis.dim != basis.dim or cbasis.half_width != basis.half_width:
        raise ConfigurationError(f"{path}: coefficients belong to a different basis")
    target = spectral.BasisSpec(basis.family, basis.dim, basis.half_width, cbasis.K, basis.grid_size,
                                basis.resolution)
    return spectral.synthesize(target, coeffs[0]).values


def run_solve(net, model, doc, out, ic=None, dt=None, T=None, gamma1=None, grid=None, record_every=None,
              extra_meta=None):
    st = doc.get("stepping", {})
    if grid is not None:
        model = model.on_grid(*grid)
    ic = ic or st.get("initial_condition", {"preset": model.name})
    dt = dt or st.get("dt", 1e-3)
    T = st.get("T", 1.0) if T is None else T
    record_every = record_every or st.get("record_every", 1)
    band = cfgmod.band_limit_of(doc, model.basis)
    extra = []
    if len(net.branches) == 2:
        gamma1 = gamma1 if gamma1 is not None else st.get("gamma1")
        if gamma1 is None:
            raise ConfigurationError("a two-branch checkpoint needs --gamma1 (or stepping.gamma1)")
        model = model.with_params(gamma1=gamma1)
        extra = [[gamma1]]
    u0 = initial_state(ic, model)
    traj = evolve(u0, NetFluxMap(net, model.basis, extra), model, dt, T, record_every, band)
    meta = {"initial_condition": ic, "band_limit": band, "gamma1": gamma1, "model_spec": model.to_dict(),
            **(extra_meta or {})}
    traj.meta.update(meta)
    write_trajectory(traj, out, {"code_version": version(), "seed": doc.get("seed"), "config": doc})
    return traj


def cmd_solve(args):
    net, model, doc = load_checkpoint(args.checkpoint)
    if args.config:
        doc = cfgmod.load(args.config)
        cfg_model = cfgmod.model_of(doc)
        if cfg_model.name != model.name:
            raise ConfigurationError(f"checkpoint was trained for {model.name}, config asks for {cfg_model.name}")
    ic = None
    if args.ic:
        ic = {"coefficients": args.ic} if args.ic.endswith(".json") else {"preset": args.ic}
    out = _out_dir(args.out or Path(doc.get("output", {}).get("dir", "runs/solve")) / "solve", args.force)
    grid = None if args.grid is None else tuple(args.grid)
    traj = run_solve(net, model, doc, out, ic, args.dt, args.T, args.gamma1, grid, args.record_every)
    print(f"solved {model.name} to T={traj.times[-1]:g} ({traj.meta['n_steps']} steps) -> {out}")
    for w in traj.meta["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# references and evaluation

def reference_trajectory(model: ModelSpec, doc, u0_coarse, times, ic=None, gamma1=None):
    """Reference states at ``times`` on ``model``'s grid (exact formula or fine solver run)."""
    ref = doc.get("reference", {})
    kind = ref.get("kind", "exact" if model.name in EXACT_NAMES else "solver")
    if gamma1 is not None:
        model = model.with_params(gamma1=gamma1)
    if kind == "exact":
        if model.name not in EXACT_NAMES:
            raise ConfigurationError(f"no closed-form solution for {model.name}")
        p = model.params
        kw = {"beta": p["beta"], "potential_a": p["potential_a"]} if model.name == "fokker_planck" else {}
        return oracles.exact_trajectory(EXACT_NAMES[model.name], model.basis, times, **kw)
    fine = model.on_grid(*ref.get("grid_size", [1024] * model.basis.dim))
    dt_ref = ref.get("dt_ref", 1e-4)
    if ic is not None and "preset" in ic:
        u0 = oracles.initial_condition(ic["preset"], fine.basis)
    else:
        u0 = spectral.resample(model.basis, u0_coarse, fine.basis)
    T = float(times[-1])
    every = _ratio(times, dt_ref)
    traj = oracles.reference_solve(fine, u0, dt_ref, T, record_every=every)
    return oracles.restrict(traj, model.basis, times)


def _ratio(times, dt_ref):
    if len(times) < 2:
        return 1
    step = float(np.min(np.diff(times)))
    return max(1, int(round(step / dt_ref)))


def evaluate(traj: Trajectory, ref: Trajectory, model: ModelSpec | None = None):
    metrics = {"schema_version": 1, "rel_l2_u": relative_l2_error(traj, ref)}
    if model is not None and traj.fluxes is not None and model.name in EXACT_NAMES and model.basis == traj.basis:
        try:
            jref = np.stack([analytic_flux(model, u) for u in ref.states])
            metrics["rel_l2_j"] = float(np.linalg.norm(traj.fluxes - jref) / np.linalg.norm(jref))
        except PositivityError:
            pass
    metrics["error_series"] = [[float(t), float(e)] for t, e in zip(traj.times, error_series(traj, ref))]
    return metrics


def cmd_evaluate(args):
    traj = read_trajectory(args.trajectory)
    meta = traj.meta
    model = ModelSpec.from_dict(meta["model_spec"]) if "model_spec" in meta else None
    if args.reference_dir:
        ref = read_trajectory(args.reference_dir)
        if ref.basis.grid_size != traj.basis.grid_size:
            raise ConfigurationError(f"grids differ: {traj.basis.grid_size} vs {ref.basis.grid_size}")
    else:
        if model is None:
            raise ConfigurationError("trajectory metadata lacks the model; pass --reference-dir")
        doc = meta.get("config") or {}
        if args.reference:
            doc = {**doc, "reference": {**doc.get("reference", {}), "kind": args.reference}}
        ref = reference_trajectory(model, doc, traj.states[0], traj.times, meta.get("initial_condition"))
    metrics = evaluate(traj, ref, model)
    out = Path(args.out) if args.out else Path(args.trajectory) / "metrics.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics, indent=2))
    with open(out.with_name("error_series.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rel_l2"])
        w.writerows(metrics["error_series"])
    print(f"relative L2 error in u: {metrics['rel_l2_u']:.4e}"
          + (f", in j: {metrics['rel_l2_j']:.4e}" if "rel_l2_j" in metrics else ""))
    return 0


def cmd_reference(args):
    doc = _load(args)
    model = cfgmod.model_of(doc)
    st = doc.get("stepping", {})
    dt = st.get("dt", 1e-3)
    every = args.every or doc.get("inversion", {}).get("obs_every", 1)
    T = args.T if args.T is not None else st.get("T", 1.0)
    n = int(round(T / (dt * every)))
    times = np.arange(n + 1) * dt * every
    ic = st.get("initial_condition", {"preset": model.name})
    u0 = initial_state(ic, model)
    ref = reference_trajectory(model, doc, u0, times, ic, args.gamma1)
    out = _out_dir(doc["output"]["dir"], args.force)
    ref.meta.update({"model_spec": model.with_params(**({"gamma1": args.gamma1} if args.gamma1 else {})).to_dict(),
                     "initial_condition": ic})
    write_trajectory(ref, out, {"code_version": version(), "seed": doc["seed"], "config": doc})
    print(f"reference for {model.name} written to {out}")
    return 0


# --------------------------------------------------------------------------
# inversion

def read_observations(path, basis: spectral.BasisSpec):
    """Parse a (t, x[, y], u, ...) CSV into (times, states); errors name the offending line."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"observation file {path} not found")
    coords = ["x", "y"][: basis.dim]
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file") from None
        need = ["t"] + coords + ["u"]
        if any(c not in header for c in need):
            raise ConfigurationError(f"{path}: line 1: header must contain columns {need}, got {header}")
        idx = [header.index(c) for c in need]
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                vals = [float(rec[i]) for i in idx]
            except (ValueError, IndexError) as exc:
                raise ConfigurationError(f"{path}: line {lineno}: cannot parse {rec!r} ({exc})") from None
            rows.setdefault(vals[0], []).append(vals[1:])
    if not rows:
        raise ConfigurationError(f"{path}: no observation rows")
    times = np.array(sorted(rows))
    pts = basis.points()
    states = []
    for t in times:
        block = np.asarray(rows[t])
        if block.shape[0] != len(pts) or not np.allclose(block[:, :-1], pts, atol=1e-9):
            raise ConfigurationError(f"{path}: slice t={t} is not on the model grid {basis.grid_size}")
        states.append(block[:, -1].reshape(basis.shape))
    return times, np.asarray(states)


def cmd_invert(args):
    doc = _load(args)
    inv = doc.get("inversion", {})
    net, model, _ = load_checkpoint(args.checkpoint)
    times, states = read_observations(args.observations, model.basis)
    t0 = inv.get("t0", 0.0)
    if not np.any(np.abs(times - t0) < 1e-9):
        raise ConfigurationError(f"observations have no slice at t0={t0}; the forward run starts there")
    keep = times >= t0 - 1e-9
    problem = InversionProblem(states[keep], times[keep], net, model, doc.get("stepping", {}).get("dt", 1e-3),
                               tuple(inv.get("interval", (0.0, 0.1))), inv.get("tol", 1e-4),
                               cfgmod.band_limit_of(doc, model.basis))
    report = invert(problem, inv.get("sweep", 0))
    out = _out_dir(args.out or Path(doc["output"]["dir"]) / "invert", args.force)
    write_report(report, out / "inversion_report.json")
    _write_meta(out, doc, "invert", {"observations": str(args.observations)})
    print(f"recovered gamma1 = {report['gamma1']:.6g} with {report['n_evals']} misfit evaluations -> {out}")
    return 0


# --------------------------------------------------------------------------
# comparison with the supervised baseline

def run_compare(doc, out):
    cmp = doc.get("compare")
    if cmp is None:
        raise ConfigurationError("config has no compare section")
    model = cfgmod.model_of(doc)
    basis = model.basis
    epochs = cmp.get("epochs", 10000)
    st = doc.get("stepping", {})
    dt = st.get("dt", 1e-3)
    band = cfgmod.band_limit_of(doc, basis)
    horizons = sorted(cmp.get("horizons", [0.5, 1.0]))
    T_max = horizons[-1]

    tc = cfgmod.train_config_of({**doc, "training": {**doc.get("training", {}), "epochs": epochs}})
    dool = train_dool(tc)
    dool.write(out / "dool")

    sampling = cfgmod.sampling_of(doc, basis)
    test = spectral.sample_coefficients(basis, sampling, cmp.get("n_test", 5), cmp.get("test_seed", 1000))
    train_c = spectral.sample_coefficients(basis, sampling, cmp.get("n_train_functions", 50), doc["seed"] + 7919)
    spectral.coeffs_to_json(basis, test, out / "test_initial_conditions.json")

    train_T, train_nt = cmp.get("train_T", 0.2), cmp.get("train_nt", 20)
    label_times = np.linspace(0.0, train_T, train_nt + 1)
    parts, enc = [], []
    for i, c in enumerate(train_c):
        u0 = spectral.synthesize(basis, c).values
        ref = reference_trajectory(model, doc, u0, label_times)
        parts.append(oracles.generate_labels(ref, basis, label_times, sample_id=i))
        enc.append(spectral.encode(basis, c))
    labels = oracles.LabeledDataset.concat(parts)
    net_doc = doc.get("net", {})
    sc = SupervisedConfig(net_doc.get("depth", 3), net_doc.get("width", 50), net_doc.get("p", 120),
                          net_doc.get("activation", "tanh"), epochs, doc.get("training", {}).get("lr", 5e-4),
                          doc["seed"], doc.get("training", {}).get("log_every", 100))
    sup = train_supervised(sc, labels, [np.asarray(enc)])
    sup.write(out / "deeponet")
    baseline = SpaceTimeOperator(sup.final_params, basis)

    rows = []
    flux = NetFluxMap(dool.final_params, basis)
    n_steps = int(round(T_max / dt))
    every = max(1, n_steps // 100)
    for i, c in enumerate(test):
        u0 = spectral.synthesize(basis, c).values
        traj = evolve(u0, flux, model, dt, T_max, every, band, record_fluxes=False)
        ref = reference_trajectory(model, doc, u0, traj.times)
        pred = baseline.predict([spectral.encode(basis, c)[None, :]], traj.times)
        for h in horizons:
            rows.append({"initial_condition": i + 1, "horizon": h,
                         "dool_rel_l2": relative_l2_error(traj.window(h), ref.window(h)),
                         "deeponet_rel_l2": relative_l2_error(pred.window(h), ref.window(h))})
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    _write_meta(out, doc, "compare", {"dool_wall_time": dool.wall_time, "deeponet_wall_time": sup.wall_time})
    return rows


def cmd_compare(args):
    doc = cfgmod.load(args.config, paper_scale=args.paper_scale,
                      overrides=_overrides(args, "compare"))
    if args.out:
        doc["output"]["dir"] = args.out
    out = _out_dir(Path(doc["output"]["dir"]) / "compare" if not args.out else args.out, args.force)
    rows = run_compare(doc, out)
    for r in rows:
        print(f"ic {r['initial_condition']} [0, {r['horizon']:g}]: DOOL {r['dool_rel_l2']:.3e}  "
              f"DeepONet {r['deeponet_rel_l2']:.3e}")
    return 0


# --------------------------------------------------------------------------
# least action

def run_dlam(doc, out):
    dc = cfgmod.dlam_config_of(doc)
    rep = train_dlam(dc)
    params = rep.final_params
    n = doc["dlam"].get("test_grid", 128)
    x, t, u = solution_grid(params, n, n)
    metrics = {"schema_version": 1, "final_action": rep.final_loss, "wall_time": rep.wall_time,
               "initial_constraint_residual": float(np.max(np.abs(u[0] - params.f(x)))),
               "terminal_constraint_residual": float(np.max(np.abs(u[-1] - params.g(x))))}
    te, e = energy_series(params, n, n)
    metrics["energy_max_relative_increase"] = float(np.max(np.diff(e) / np.abs(e[:-1])))
    closed_form = (dc.f == TrigSeries(cos=((1.0, 1.0),)) and dc.g == TrigSeries() and dc.damping == 1.0)
    if closed_form:
        ex = exact_damped_wave(x[None, :], t[:, None], dc.T)
        metrics["rel_l2_u"] = float(np.linalg.norm(u - ex) / np.linalg.norm(ex))
    write_solution(params, out, n, n)
    rep.write(out)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    _write_meta(out, doc, "dlam")
    return metrics


def cmd_dlam(args):
    doc = _load(args, section="dlam")
    out = _out_dir(doc["output"]["dir"], args.force)
    metrics = run_dlam(doc, out)
    msg = f"action {metrics['final_action']:.6g}"
    if "rel_l2_u" in metrics:
        msg += f", relative L2 error {metrics['rel_l2_u']:.3e}"
    print(msg + f" -> {out}")
    return 0


# --------------------------------------------------------------------------

def cmd_presets_list(args):
    for name in cfgmod.preset_names():
        doc = cfgmod.load(name)
        print(f"{name:14s} {doc.get('description', '')}")
    return 0


def cmd_presets_show(args):
    sys.stdout.write(cfgmod.preset_text(args.name))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dool", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, epochs=True):
        sp.add_argument("config", help="config file (YAML or JSON) or preset name")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
        sp.add_argument("--paper-scale", action="store_true", help="apply the config's paper_scale overrides")
        if seed:
            sp.add_argument("--seed", type=int)
        if epochs:
            sp.add_argument("--epochs", type=int)

    sp = sub.add_parser("train", help="train an operator net by Rayleighian minimization")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("solve", help="time-step with a trained operator net")
    sp.add_argument("checkpoint", help="checkpoint.json or the training output directory")
    sp.add_argument("--config", help="config whose stepping section to use (default: the training config)")
    sp.add_argument("--ic", help="initial condition: preset name or coefficient JSON file")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--gamma1", type=float, help="parameter value for two-branch nets")
    sp.add_argument("--grid", type=int, nargs="+", help="evaluation grid size per axis")
    sp.add_argument("--record-every", type=int)
    sp.add_argument("--out")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("evaluate", help="relative L2 error of a trajectory against a reference")
    sp.add_argument("trajectory", help="directory written by `solve`")
    sp.add_argument("--reference", choices=["exact", "solver"], help="reference kind (default from config)")
    sp.add_argument("--reference-dir", help="compare against another trajectory directory instead")
    sp.add_argument("--out", help="metrics JSON path (default: <trajectory>/metrics.json)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("reference", help="write a reference trajectory (e.g. observations for `invert`)")
    common(sp, epochs=False)
    sp.add_argument("--gamma1", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--every", type=int, help="record every n-th step of size stepping.dt")
    sp.set_defaults(func=cmd_reference)

    sp = sub.add_parser("invert", help="recover gamma1 from observations by golden-section search")
    common(sp, epochs=False)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--observations", required=True, help="CSV with columns t, x[, y], u")
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("compare", help="DOOL vs supervised DeepONet on held-out initial conditions")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("dlam", help="least-action training for the damped wave equation")
    common(sp)
    sp.set_defaults(func=cmd_dlam)

    sp = sub.add_parser("presets-list", help="list shipped experiment presets")
    sp.set_defaults(func=cmd_presets_list)
    sp = sub.add_parser("presets-show", help="print a preset's YAML")
    sp.add_argument("name")
    sp.set_defaults(func=cmd_presets_show)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InvalidCoefficientsError, SamplingInfeasibleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, PositivityError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
