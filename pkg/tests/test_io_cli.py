import json
import os

import numpy as np
import pytest

from vegoc import (ContinuationOptions, ParameterSet, connect,
                   continue_private_branch, params_from_text, solve_flat_css,
                   solve_flat_private)
from vegoc import io as vio
from vegoc.cli import main
from vegoc.errors import ScenarioError
from vegoc.model import CanonicalSystem, PrivateSystem
from vegoc.scenario import load_scenario, parse_scenario_text


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_params_text_roundtrip():
    p = ParameterSet(R=27.5, rho=0.011)
    q = params_from_text(p.to_text())
    assert p == q


def test_params_unknown_key_line_number():
    with pytest.raises(ScenarioError) as err:
        params_from_text("R = 10\nbogus = 1\n")
    assert err.value.line == 2


def test_css_roundtrip_bitwise(tmp_path, ops64):
    pt = solve_flat_css(ParameterSet(R=26.0), ops64, label="t")
    pre = tmp_path / "css"
    vio.save_css(pt, pre)
    back = vio.load_css(pre)
    assert np.array_equal(back.u, pt.u)
    assert back.params == pt.params
    pre2 = tmp_path / "css2"
    vio.save_css(back, pre2)
    assert read_bytes(f"{pre}.values.txt") == read_bytes(f"{pre2}.values.txt")
    j1 = json.loads(read_bytes(f"{pre}.json"))
    j2 = json.loads(read_bytes(f"{pre2}.json"))
    j1.pop("values_file"); j2.pop("values_file")
    assert j1 == j2


def test_branch_roundtrip(tmp_path, ops64):
    params = ParameterSet(R=130.0)
    system = PrivateSystem(params, ops64)
    start = solve_flat_private(params, ops64, guess=(1500.0, 20.0))
    opts = ContinuationOptions(ds=1.0, max_steps=12, pmin=120.0, pmax=131.0)
    br = continue_private_branch(system, "R", start.vw, direction=-1, opts=opts)
    pre = tmp_path / "branch"
    files = vio.save_branch(br, pre, sidecar_every=5)
    rec = vio.load_branch(pre)
    assert len(rec["rows"]) == len(br)
    for i, info in rec["points"].items():
        assert np.array_equal(info["z"], br.zs[i])
    # re-serializing the loaded record reproduces the CSV bytes
    assert read_bytes(f"{pre}.csv") == read_bytes(files[0])


def test_path_roundtrip(tmp_path, ops64):
    params = ParameterSet(R=28.0)
    system = CanonicalSystem(params, ops64)
    pt = solve_flat_css(params, ops64)
    path = connect(system, pt.u[:2 * ops64.n] * 1.02, pt, T=60.0, m=12)
    pre = tmp_path / "path"
    vio.save_path(path, pre)
    rec = vio.load_path(pre)
    assert np.array_equal(rec["t"], path.tmesh.t)
    assert np.array_equal(rec["U"], path.U)
    assert np.array_equal(rec["E"], path.E_t)
    assert rec["meta"]["J"] == path.J


SCN = """
[scenario]
model = canonical
task = flat-css
out = {out}

[params]
R = 28

[mesh]
kind = interval
L = 5
n_el = 48

[task]
guess = 400, 10, 0.5, 1
label = fcss
name = fcss28
"""


def test_scenario_parse_and_errors():
    scn = parse_scenario_text(SCN.format(out="x"))
    assert scn.task == "flat-css"
    assert scn.params["R"] == "28"
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text("[scenario]\ntask == oops\n")
    with pytest.raises(ScenarioError) as err2:
        parse_scenario_text("[scenario]\ntask = dance\n")
    with pytest.raises(ScenarioError) as err3:
        parse_scenario_text("stray = 1\n")
    assert err3.value.line == 1


def test_empty_task_scenario_is_config_error(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("[scenario]\nmodel = canonical\n")
    rc = main(["run", str(f)])
    assert rc == 2
    assert not (tmp_path / "out").exists()


def test_cli_flat_css_end_to_end(tmp_path, capsys):
    f = tmp_path / "s.cfg"
    out = tmp_path / "runA"
    f.write_text(SCN.format(out=out))
    rc = main(["run", str(f)])
    assert rc == 0
    outs = capsys.readouterr().out.strip().splitlines()
    assert any(o.endswith("fcss28.json") for o in outs)
    assert (out / "fcss28.manifest.json").exists()
    # deterministic re-run from the manifest alone into a fresh directory
    out2 = tmp_path / "runB"
    rc = main(["run", str(out / "fcss28.manifest.json"), "--out", str(out2)])
    assert rc == 0
    a = read_bytes(out / "fcss28.values.txt")
    b = read_bytes(out2 / "fcss28.values.txt")
    assert a == b


def test_cli_path_defective_target_exit_code(tmp_path, ops64):
    params = ParameterSet(R=20.0)
    pt = solve_flat_css(params, ops64, guess=(250, 10, 0.6, 1), label="d2")
    vio.save_css(pt, tmp_path / "target")
    vio.save_css(pt, tmp_path / "init")
    with open(tmp_path / "p.txt", "w") as fh:
        fh.write("R = 20\n")
    rc = main(["path", "--out", str(tmp_path / "o"),
               "--mesh", "interval:L=5,n_el=64",
               "--params", str(tmp_path / "p.txt"),
               "-o", "target=" + str(tmp_path / "target"),
               "init=" + str(tmp_path / "init"), "T=40", "m=10"])
    assert rc == 4


def test_cli_spectrum_and_plotdata(tmp_path, ops64):
    params = ParameterSet(R=28.0)
    pt = solve_flat_css(params, ops64, label="s")
    vio.save_css(pt, tmp_path / "css")
    with open(tmp_path / "p.txt", "w") as fh:
        fh.write(params.to_text())
    rc = main(["spectrum", "--out", str(tmp_path / "o"),
               "--mesh", "interval:L=5,n_el=64",
               "--params", str(tmp_path / "p.txt"),
               "--seed-file", str(tmp_path / "css")])
    assert rc == 0
    spec_csv = tmp_path / "o" / "spectrum.csv"
    assert spec_csv.exists()
    lines = spec_csv.read_text().splitlines()
    assert lines[0] == "re,im,class"
    assert len(lines) == 1 + 4 * ops64.n
    # snapshot plotdata from the stored css
    rc = main(["plotdata", "--kind", "snapshot",
               "--artifact", str(tmp_path / "css"),
               "--mesh-file", str(tmp_path / "o" / "spectrum.mesh.txt"),
               "--field", "v", "--out", str(tmp_path / "snap")])
    assert rc == 0
    data = np.loadtxt(tmp_path / "snap.v.dat")
    assert data.shape == (ops64.n, 2)
    assert np.allclose(data[:, 1], pt.averages["v"], rtol=1e-6)


def test_unknown_scenario_section_line():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text("[scenario]\ntask = branch\n[bogus]\nx = 1\n")
    assert err.value.line == 3
