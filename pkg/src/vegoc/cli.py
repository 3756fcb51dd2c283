"""Scenario-driven command line front end.

Subcommands: run, css, branch, spectrum, path, skiba, private, plotdata.
Exit codes: 0 ok, 2 config error, 3 solver nonconvergence, 4 defective
target, 5 path nonexistence.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .continuation import ContinuationOptions, SpecialPoint, continue_branch, \
    switch_and_continue
from .cpath import connect, truncation_check
from .errors import (DefectiveTargetError, InvalidArgumentError, NewtonError,
                     PathNonexistenceError, ScenarioError, StepUnderflowError,
                     VegocError)
from .fem import load_mesh, save_mesh
from .model import CanonicalSystem, PrivateSystem
from .newton import solve_flat_css, solve_flat_private, solve_steady, make_css
from .params import params_from_text
from .private import continue_private_branch, simulate
from .scenario import Scenario, load_scenario, scenario_from_dict
from .skiba import SkibaNotFoundError, find_skiba
from .spectral import spectrum

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONV = 3
EXIT_DEFECTIVE = 4
EXIT_NOPATH = 5


def _parse_floats(text, count=None):
    vals = [float(v) for v in str(text).replace(",", " ").split()]
    if count is not None and len(vals) != count:
        raise ScenarioError(f"expected {count} numbers, got {len(vals)}")
    return vals


def _mesh_spec_to_dict(spec: str) -> dict:
    kind, _, rest = spec.partition(":")
    out = {"kind": kind.strip()}
    for item in filter(None, rest.split(",")):
        if "=" not in item:
            raise ScenarioError(f"bad mesh spec item {item!r}")
        k, _, v = item.partition("=")
        out[k.strip()] = float(v) if k.strip() == "L" else int(float(v))
    return out


def _system_for(scn: Scenario, params, ops):
    if scn.model == "private":
        return PrivateSystem(params, ops)
    return CanonicalSystem(params, ops)


def _out_prefix(scn: Scenario, stem: str) -> str:
    os.makedirs(scn.out, exist_ok=True)
    return os.path.join(scn.out, stem)


def _seed_state(scn: Scenario, system, key="seed"):
    """Seed resolution: a saved steady-state prefix or literal values."""
    opts = scn.options
    if opts.get(key):
        point = io.load_css(str(opts[key]))
        return point.u
    if opts.get("guess"):
        vals = _parse_floats(opts["guess"])
        if len(vals) == system.ncomp:
            return np.repeat(np.asarray(vals), system.n)
        if len(vals) == system.dim:
            return np.asarray(vals)
        raise ScenarioError(
            f"guess needs {system.ncomp} or {system.dim} numbers")
    raise ScenarioError(f"task {scn.task!r} needs a '{key}' or 'guess' option")


def run_scenario(scn: Scenario) -> list:
    """Execute one scenario; returns the list of files written."""
    scn.validate()
    if not scn.task:
        raise ScenarioError("scenario without a task")
    params = scn.parameter_set()
    ops = scn.build_operators()
    tol = float(scn.options.get("tol", 1e-8))
    outputs = []
    stem = scn.options.get("name", scn.task.replace("-", "_"))
    prefix = _out_prefix(scn, stem)

    if scn.task == "flat-css":
        if scn.model == "private":
            guess = _parse_floats(scn.options.get("guess", "80, 60"), 2)
            pt = solve_flat_private(params, ops, guess,
                                    label=scn.options.get("label", ""))
            rec = {"kind": "flat-private", "v": pt.averages["v"],
                   "w": pt.averages["w"], "pi": pt.pi, "stable": pt.stable,
                   "residual_norm": pt.residual_norm,
                   "params": params.as_dict()}
            io._dump_json(rec, f"{prefix}.json")
            outputs.append(f"{prefix}.json")
        else:
            guess = _parse_floats(scn.options.get("guess", "400, 10, 0.5, 1"), 4)
            point = solve_flat_css(params, ops, guess,
                                   label=scn.options.get("label", ""))
            outputs += io.save_css(point, prefix)
            system = CanonicalSystem(params, ops)
            outputs += io.save_spectrum(spectrum(system, point.u),
                                        f"{prefix}.spectrum.csv")
    elif scn.task == "branch":
        system = _system_for(scn, params, ops)
        o = scn.options
        copts = ContinuationOptions(
            ds=float(o.get("ds", 0.5)),
            ds_max=float(o.get("ds_max", 2.0)),
            max_steps=int(o.get("max_steps", 400)),
            pmin=float(o.get("pmin", -np.inf)),
            pmax=float(o.get("pmax", np.inf)),
            tol=tol,
            with_defect=bool(int(o.get("defect", system.dim <= 1600))),
            detect_branch_points=bool(int(o.get("detect_bp", 1))),
        )
        pname = str(o.get("param", "R"))
        direction = int(o.get("direction", -1))
        if o.get("switch_branch"):
            rec = io.load_branch(str(o["switch_branch"]))
            bps = rec["branch_points"]
            idx = int(o.get("switch_bp", 0))
            if idx >= len(bps) or "z" not in bps[idx]:
                raise ScenarioError(f"branch point {idx} not stored in "
                                    f"{o['switch_branch']}")
            bp = SpecialPoint(kind="bp", index=bps[idx]["index"],
                              param=bps[idx]["param"], z=bps[idx]["z"])
            branch = switch_and_continue(
                system, pname, bp,
                amplitude=float(o.get("switch_amplitude", 0.02)),
                direction=int(o.get("switch_direction", 1)),
                opts=copts)
        else:
            u0 = _seed_state(scn, system)
            if scn.model == "private":
                branch = continue_private_branch(system, pname, u0,
                                                 direction=direction, opts=copts)
            else:
                branch = continue_branch(system, pname, u0,
                                         direction=direction, opts=copts)
        outputs += io.save_branch(branch, prefix,
                                  sidecar_every=int(o.get("sidecar_every", 10)))
    elif scn.task == "spectrum":
        system = _system_for(scn, params, ops)
        U = _seed_state(scn, system)
        k = scn.options.get("k", "all")
        spec = spectrum(system, U, k="all" if k == "all" else int(k))
        outputs += io.save_spectrum(spec, f"{prefix}.csv")
    elif scn.task == "path":
        system = CanonicalSystem(params, ops)
        o = scn.options
        if not o.get("target"):
            raise ScenarioError("path task needs a 'target' steady state")
        target = io.load_css(str(o["target"]))
        if o.get("init"):
            init = io.load_css(str(o["init"])).u[:2 * ops.n]
        elif o.get("init_values"):
            init = io._read_array_txt(str(o["init_values"])).ravel()[:2 * ops.n]
        else:
            raise ScenarioError("path task needs 'init' or 'init_values'")
        path = connect(system, init, target,
                       T=float(o["T"]) if "T" in o else None,
                       m=int(o.get("m", 80)),
                       grading=str(o.get("grading", "geometric")),
                       tol=tol, strict=bool(int(o.get("strict", 0))))
        outputs += io.save_path(path, prefix)
        if int(o.get("truncation_check", 0)):
            rep = truncation_check(path, resolve=bool(int(o.get("resolve", 0))))
            io._dump_json(rep, f"{prefix}.truncation.json")
            outputs.append(f"{prefix}.truncation.json")
    elif scn.task == "skiba":
        system = CanonicalSystem(params, ops)
        o = scn.options
        if not (o.get("target_a") and o.get("target_b")):
            raise ScenarioError("skiba task needs 'target_a' and 'target_b'")
        css_a = io.load_css(str(o["target_a"]))
        css_b = io.load_css(str(o["target_b"]))
        rng = _parse_floats(o.get("range", "0, 1"), 2)
        result = find_skiba(system, css_a, css_b, alpha_range=tuple(rng),
                            tol=float(o.get("skiba_tol", 0.1)),
                            T=float(o["T"]) if "T" in o else None,
                            m=int(o.get("m", 80)), path_tol=tol)
        with open(f"{prefix}.samples.csv", "w") as fh:
            fh.write("alpha,J_A,J_B\n")
            for a, ja, jb in result.samples:
                fh.write(f"{io.fmt(a)},{io.fmt(ja)},{io.fmt(jb)}\n")
        io._dump_json({"kind": "skiba", "alpha": result.alpha,
                       "J_A": result.J_A, "J_B": result.J_B,
                       "gap": result.gap, "notes": result.notes},
                      f"{prefix}.json")
        outputs += [f"{prefix}.samples.csv", f"{prefix}.json"]
        outputs += io.save_path(result.path_A, f"{prefix}.path_a")
        outputs += io.save_path(result.path_B, f"{prefix}.path_b")
    elif scn.task == "simulate":
        if scn.model != "private":
            raise ScenarioError("simulate is a private-model task")
        system = PrivateSystem(params, ops)
        o = scn.options
        vw = _seed_state(scn, system)
        amp = float(o.get("perturb_amp", 0.0))
        if amp:
            mode = int(o.get("perturb_mode", 1))
            mesh = ops.mesh
            if mesh.dimension == 1:
                L = float(mesh.nodes[-1])
                pert = np.cos(mode * np.pi * (mesh.nodes + L) / (2 * L))
            else:
                rng = np.random.default_rng(int(o.get("perturb_seed", 0)))
                pert = rng.standard_normal(ops.n)
            vw = vw.copy()
            vw[:ops.n] += amp * pert
        traj = simulate(system, vw, dt=float(o.get("dt", 0.5)),
                        nsteps=int(o.get("nsteps", 400)),
                        record_every=int(o.get("record_every", 10)))
        outputs += io.save_trajectory(traj, prefix)
    else:
        raise ScenarioError(f"unhandled task {scn.task!r}")

    save_mesh(ops.mesh, f"{prefix}.mesh.txt")
    outputs.append(f"{prefix}.mesh.txt")
    manifest = os.path.join(scn.out, f"{stem}.manifest.json")
    io.write_manifest(manifest, scn.resolved(), outputs)
    outputs.append(manifest)
    return outputs


def _scenario_from_args(args, task: str) -> Scenario:
    scn = Scenario(task=task)
    scn.model = getattr(args, "model", "canonical") or "canonical"
    if args.out:
        scn.out = args.out
    if args.params:
        with open(args.params) as fh:
            text = fh.read()
        base = params_from_text(text)
        scn.params = base.as_dict()
    if args.mesh:
        scn.mesh = _mesh_spec_to_dict(args.mesh)
    if args.tol:
        scn.options["tol"] = float(args.tol)
    for key, val in (getattr(args, "opt", None) or []):
        scn.options[key] = val
    if getattr(args, "seed_file", None):
        scn.options.setdefault("seed", args.seed_file)
    return scn


class _OptAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        items = getattr(namespace, self.dest, None) or []
        for v in values:
            if "=" not in v:
                raise argparse.ArgumentError(self, f"expected key=value, got {v!r}")
            k, _, val = v.partition("=")
            items.append((k.strip(), val.strip()))
        setattr(namespace, self.dest, items)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vegoc",
        description="Optimal-harvesting solver: canonical steady states, "
                    "continuation, canonical paths")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--params", help="parameter file (key = value lines)")
        p.add_argument("--mesh", help="mesh spec, e.g. interval:L=5,n_el=64 "
                                      "or rect:L=5,nx=40,ny=34")
        p.add_argument("--out", help="output directory")
        p.add_argument("--tol", type=float, help="solver tolerance")
        p.add_argument("--seed-file", help="seed artifact (steady-state prefix)")
        p.add_argument("--model", choices=("canonical", "private"),
                       default="canonical")
        p.add_argument("-o", "--opt", nargs="+", action=_OptAction,
                       metavar="KEY=VALUE", help="task options")

    prun = sub.add_parser("run", help="run a scenario file (text or JSON/manifest)")
    prun.add_argument("scenario")
    prun.add_argument("--out", help="override the output directory")

    for name, help_ in (("css", "solve a flat canonical steady state"),
                        ("branch", "continue a steady branch"),
                        ("spectrum", "eigenvalues at a steady state"),
                        ("path", "canonical path to a saddle target"),
                        ("skiba", "indifference point between two targets"),
                        ("private", "simulate the private model forward")):
        p = sub.add_parser(name, help=help_)
        common(p)

    pplot = sub.add_parser("plotdata", help="emit plot-ready column files")
    pplot.add_argument("--kind", required=True,
                       choices=("bifurcation", "path-heatmap", "snapshot"))
    pplot.add_argument("--artifact", required=True,
                       help="saved branch/path/css prefix")
    pplot.add_argument("--mesh-file", help="mesh file for spatial kinds")
    pplot.add_argument("--field", default="E")
    pplot.add_argument("--out", required=True, help="output prefix")
    return ap


_TASK_OF_COMMAND = {"css": "flat-css", "branch": "branch",
                    "spectrum": "spectrum", "path": "path", "skiba": "skiba",
                    "private": "simulate"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            scn = load_scenario(args.scenario)
            if args.out:
                scn.out = args.out
            outputs = run_scenario(scn)
        elif args.command == "plotdata":
            kind = args.kind
            kwargs = {}
            if kind == "bifurcation":
                kwargs["branch_record"] = io.load_branch(args.artifact)
            elif kind == "path-heatmap":
                kwargs["path_record"] = io.load_path(args.artifact)
                kwargs["mesh"] = load_mesh(args.mesh_file)
            else:
                kwargs["css"] = io.load_css(args.artifact)
                kwargs["mesh"] = load_mesh(args.mesh_file)
            outputs = io.emit_plotdata(kind, args.out, field=args.field,
                                       **kwargs)
        else:
            task = _TASK_OF_COMMAND[args.command]
            if args.command == "private":
                args.model = "private"
            scn = _scenario_from_args(args, task)
            outputs = run_scenario(scn)
        for f in outputs:
            print(f)
        return EXIT_OK
    except (ScenarioError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DefectiveTargetError as exc:
        print(f"defective target: {exc}", file=sys.stderr)
        return EXIT_DEFECTIVE
    except (PathNonexistenceError, SkibaNotFoundError) as exc:
        print(f"path nonexistence: {exc}", file=sys.stderr)
        return EXIT_NOPATH
    except (NewtonError, StepUnderflowError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except VegocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
