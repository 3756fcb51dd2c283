"""Artifact persistence and plot-ready data emission.

Machine files carry 17 significant digits so that float64 values survive a
save/load/save round trip bit-identically.  No artifact embeds timestamps;
re-running a scenario reproduces files byte for byte.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import InvalidArgumentError
from .fem import Mesh
from .newton import CSSPoint
from .params import ParameterSet

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def _write_array_txt(arr: np.ndarray, path) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    with open(path, "w") as fh:
        for row in arr:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def _read_array_txt(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split()])
    a = np.array(rows, dtype=float)
    return a[:, 0] if a.shape[1] == 1 else a


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- CSS points

def save_css(point: CSSPoint, prefix) -> list:
    """Write <prefix>.json (diagnostics) and <prefix>.values.txt (nodal u)."""
    meta = {
        "kind": "css",
        "label": point.label,
        "params": point.params.as_dict(),
        "averages": point.averages,
        "jca": point.jca,
        "defect": point.defect,
        "residual_norm": point.residual_norm,
        "size": int(point.u.size),
        "values_file": os.path.basename(str(prefix)) + ".values.txt",
    }
    _dump_json(meta, f"{prefix}.json")
    _write_array_txt(point.u[None, :], f"{prefix}.values.txt")
    return [f"{prefix}.json", f"{prefix}.values.txt"]


def load_css(prefix) -> CSSPoint:
    meta = _load_json(f"{prefix}.json")
    if meta.get("kind") != "css":
        raise InvalidArgumentError(f"{prefix}.json is not a steady-state record")
    u = np.atleast_2d(_read_array_txt(f"{prefix}.values.txt")).ravel()
    if u.size != meta["size"]:
        raise InvalidArgumentError(
            f"values file has {u.size} entries, expected {meta['size']}")
    return CSSPoint(u=u, params=ParameterSet(**meta["params"]),
                    averages=meta["averages"], jca=meta["jca"],
                    defect=meta["defect"],
                    residual_norm=meta["residual_norm"],
                    label=meta.get("label", ""))


# ------------------------------------------------------------------ branches

BRANCH_COLUMNS = ("param", "arclength", "v", "w", "lam", "mu", "jca",
                  "defect", "fold", "bp", "stable")


def _branch_rows(branch):
    from .continuation import branch_table
    return branch_table(branch)


def save_branch(branch, prefix, sidecar_every: int = 10) -> list:
    """Branch CSV plus nodal sidecars for every k-th and all special points."""
    rows = _branch_rows(branch)
    files = [f"{prefix}.csv"]
    with open(f"{prefix}.csv", "w") as fh:
        fh.write(",".join(BRANCH_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in BRANCH_COLUMNS:
                val = row.get(col)
                if val is None:
                    cells.append("")
                elif col in ("defect", "fold", "bp", "stable"):
                    cells.append(str(int(val)) if val == val else "")
                else:
                    cells.append(fmt(val))
            fh.write(",".join(cells) + "\n")
    selected = sorted({i for i in range(0, len(branch.zs), max(1, sidecar_every))}
                      | {f.index for f in branch.folds}
                      | {b.index for b in branch.branch_points}
                      | {len(branch.zs) - 1})
    index = {"kind": "branch", "pname": branch.pname,
             "provenance": branch.provenance,
             "termination": branch.termination,
             "params": branch.system.params.as_dict(),
             "columns": list(BRANCH_COLUMNS),
             "points": {}, "branch_points": [], "folds": []}
    for i in selected:
        fname = f"{os.path.basename(str(prefix))}.pt{i:04d}.txt"
        _write_array_txt(branch.zs[i][None, :], f"{os.path.dirname(str(prefix)) or '.'}/{fname}")
        index["points"][str(i)] = {"param": float(branch.zs[i][-1]),
                                   "file": fname}
        files.append(f"{os.path.dirname(str(prefix)) or '.'}/{fname}")
    for kind, lst in (("folds", branch.folds),
                      ("branch_points", branch.branch_points)):
        for j, spt in enumerate(lst):
            rec = {"index": spt.index, "param": spt.param}
            if spt.z is not None:
                fname = f"{os.path.basename(str(prefix))}.{kind[:-1]}{j:02d}.txt"
                _write_array_txt(spt.z[None, :],
                                 f"{os.path.dirname(str(prefix)) or '.'}/{fname}")
                rec["file"] = fname
                files.append(f"{os.path.dirname(str(prefix)) or '.'}/{fname}")
            index[kind].append(rec)
    _dump_json(index, f"{prefix}.points.json")
    files.append(f"{prefix}.points.json")
    return files


def load_branch(prefix) -> dict:
    """Reload a persisted branch as a plain record (rows + stored states)."""
    meta = _load_json(f"{prefix}.points.json")
    if meta.get("kind") != "branch":
        raise InvalidArgumentError(f"{prefix} is not a branch record")
    rows = []
    with open(f"{prefix}.csv") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            row = {}
            for c, v in zip(header, cells):
                if v == "":
                    row[c] = None
                elif c in ("defect", "fold", "bp", "stable"):
                    row[c] = int(v)
                else:
                    row[c] = float(v)
            rows.append(row)
    base = os.path.dirname(str(prefix)) or "."
    points = {int(i): {"param": rec["param"],
                       "z": np.atleast_2d(_read_array_txt(f"{base}/{rec['file']}")).ravel()}
              for i, rec in meta["points"].items()}
    specials = {}
    for kind in ("branch_points", "folds"):
        specials[kind] = []
        for rec in meta[kind]:
            item = dict(rec)
            if "file" in rec:
                item["z"] = np.atleast_2d(
                    _read_array_txt(f"{base}/{rec['file']}")).ravel()
            specials[kind].append(item)
    return {"meta": meta, "rows": rows, "points": points, **specials}


# --------------------------------------------------------------------- paths

def save_path(path_obj, prefix) -> list:
    """Per-time-node CSV (t, nodal v, w, lam, mu, E) and a JSON manifest."""
    n = path_obj.n
    m1 = path_obj.U.shape[0]
    with open(f"{prefix}.csv", "w") as fh:
        fh.write(f"# columns: t then v,w,lam,mu (n={n} each) then E (n={n})\n")
        fh.write("t," + ",".join(
            [f"{c}{i}" for c in ("v", "w", "lam", "mu") for i in range(n)]
            + [f"E{i}" for i in range(n)]) + "\n")
        for k in range(m1):
            row = [fmt(path_obj.tmesh.t[k])]
            row += [fmt(v) for v in path_obj.U[k]]
            row += [fmt(v) for v in path_obj.E_t[k]]
            fh.write(",".join(row) + "\n")
    meta = {
        "kind": "path",
        "T": path_obj.tmesh.T,
        "m": path_obj.tmesh.m,
        "grading": path_obj.tmesh.descriptor,
        "target_label": path_obj.target.label,
        "target_jca": path_obj.target.jca,
        "J": path_obj.value.J,
        "transient": path_obj.value.transient,
        "tail": path_obj.value.tail,
        "mismatch": path_obj.mismatch,
        "mismatch_rel": path_obj.mismatch_rel,
        "residual_inf": path_obj.residual_inf,
        "sigma_history": path_obj.sigma_history,
        "warnings": path_obj.warnings,
        "params": path_obj.params.as_dict(),
        "n": n,
    }
    _dump_json(meta, f"{prefix}.json")
    return [f"{prefix}.csv", f"{prefix}.json"]


def load_path(prefix) -> dict:
    meta = _load_json(f"{prefix}.json")
    if meta.get("kind") != "path":
        raise InvalidArgumentError(f"{prefix} is not a path record")
    n = meta["n"]
    data = []
    with open(f"{prefix}.csv") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("t,"):
                continue
            data.append([float(v) for v in line.strip().split(",")])
    data = np.array(data)
    return {"meta": meta, "t": data[:, 0], "U": data[:, 1:1 + 4 * n],
            "E": data[:, 1 + 4 * n:]}


# ------------------------------------------------------------------- spectra

def save_spectrum(spec, path, eps: float = 1e-8) -> list:
    with open(path, "w") as fh:
        fh.write("re,im,class\n")
        for ev in np.sort_complex(np.asarray(spec.eigenvalues)):
            cls = ("marginal" if abs(ev.real) <= eps
                   else ("stable" if ev.real < 0 else "unstable"))
            fh.write(f"{fmt(ev.real)},{fmt(ev.imag)},{cls}\n")
    return [str(path)]


# ------------------------------------------------------------ trajectories

def save_trajectory(traj, prefix) -> list:
    with open(f"{prefix}.csv", "w") as fh:
        n2 = traj.vw.shape[1]
        fh.write("t," + ",".join(f"u{i}" for i in range(n2)) + ",pi_avg\n")
        for k in range(len(traj.t)):
            fh.write(",".join([fmt(traj.t[k])]
                              + [fmt(v) for v in traj.vw[k]]
                              + [fmt(traj.pi_avg[k])]) + "\n")
    return [f"{prefix}.csv"]


# ------------------------------------------------------------------ manifest

def write_manifest(path, scenario_resolved: dict, outputs: list) -> None:
    import scipy

    from . import __version__
    manifest = {
        "package": "vegoc",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scenario": scenario_resolved,
        "outputs": [os.path.basename(str(o)) for o in outputs],
    }
    _dump_json(manifest, path)


# ------------------------------------------------------------------ plotdata

_PLOT_STUB = """\
#!/usr/bin/env python3
# Minimal plotting stub for the emitted whitespace-column data files.
import sys
import numpy as np
import matplotlib.pyplot as plt

data = np.loadtxt(sys.argv[1])
if data.shape[1] == 2:
    plt.plot(data[:, 0], data[:, 1], "-")
else:
    from matplotlib.tri import Triangulation
    plt.tricontourf(data[:, 0], data[:, 1], data[:, 2], levels=30)
    plt.colorbar()
plt.savefig(sys.argv[1] + ".png", dpi=150)
"""


def emit_plotdata(kind: str, out_prefix, branch_record=None, path_record=None,
                  css=None, mesh: Mesh | None = None, field: str = "E") -> list:
    """Emit whitespace-column data files for external plotting.

    kinds: "bifurcation" (param vs <v> and param vs jca from a branch),
    "path-heatmap" ((t, x, value) triples from a 1D path), and
    "snapshot" ((x, value) or (x, y, value) from a steady state).
    """
    files = []
    if kind == "bifurcation":
        if branch_record is None:
            raise InvalidArgumentError("bifurcation plotdata needs a branch record")
        rows = branch_record["rows"]
        for colfile, col in ((f"{out_prefix}.v.dat", "v"),
                             (f"{out_prefix}.jca.dat", "jca")):
            with open(colfile, "w") as fh:
                for row in rows:
                    if row.get(col) is None:
                        continue
                    fh.write(f"{fmt(row['param'])} {fmt(row[col])}\n")
            files.append(colfile)
    elif kind == "path-heatmap":
        if path_record is None or mesh is None:
            raise InvalidArgumentError("path-heatmap needs a path record and mesh")
        if mesh.dimension != 1:
            raise InvalidArgumentError("path heatmaps are for 1D meshes; "
                                       "use snapshots in 2D")
        n = mesh.n
        t = path_record["t"]
        comp = {"v": 0, "w": 1, "lam": 2, "mu": 3}.get(field)
        vals = (path_record["E"] if field == "E"
                else path_record["U"][:, comp * n:(comp + 1) * n])
        fname = f"{out_prefix}.{field}.dat"
        with open(fname, "w") as fh:
            for k in range(len(t)):
                for i in range(n):
                    fh.write(f"{fmt(t[k])} {fmt(mesh.nodes[i])} "
                             f"{fmt(vals[k, i])}\n")
        files.append(fname)
    elif kind == "snapshot":
        if css is None or mesh is None:
            raise InvalidArgumentError("snapshot needs a steady state and mesh")
        n = mesh.n
        comp = {"v": 0, "w": 1, "lam": 2, "mu": 3}.get(field, 0)
        vals = css.u[comp * n:(comp + 1) * n]
        fname = f"{out_prefix}.{field}.dat"
        with open(fname, "w") as fh:
            for i in range(n):
                coords = (mesh.nodes[i],) if mesh.dimension == 1 else tuple(mesh.nodes[i])
                fh.write(" ".join(fmt(c) for c in coords)
                         + f" {fmt(vals[i])}\n")
        files.append(fname)
    else:
        raise InvalidArgumentError(f"unknown plotdata kind {kind!r}")
    stub = f"{out_prefix}.plot.py"
    with open(stub, "w") as fh:
        fh.write(_PLOT_STUB)
    files.append(stub)
    return files
