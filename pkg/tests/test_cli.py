import csv
import json
import math
import os

import pytest
from hypothesis import given, settings, strategies as st

from fxts import __version__, cli
from fxts.cli import RunConfig, build_parser, main
from fxts.errors import QuadratureError
from fxts.reports import json_text, report_document

SCHEMA = {"tool_version", "command_echo", "params", "results", "warnings"}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_theorem1(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "theorem1", "--a", "1", "--b", "1",
                       "--p", "0.5", "--q", "2")
    doc = json.loads(out)
    assert code == 0 and set(doc) == SCHEMA
    assert doc["results"]["value"] == 3.0
    assert doc["results"]["kind"] == "closed_form" and doc["results"]["formula_id"] == "theorem1"
    assert doc["tool_version"] == __version__


def test_bound_phi_infinite_and_divergent(capsys):
    code, out, _ = run(capsys, "bound", "--phi", "polyakov:a=2,b=2,p=0.75,q=2", "--v0", "inf")
    r = json.loads(out)["results"]
    assert code == 0 and r["value"] == pytest.approx(0.4 * math.pi / math.sin(math.pi / 5), rel=1e-10)
    assert r["admissibility"] == "fixed_time"
    code, out, _ = run(capsys, "bound", "--phi", "power:a=1,p=0.5", "--v0", "inf")
    assert code == 0 and json.loads(out)["results"]["value"] == "inf"


def test_sweep_example(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, stdout, _ = run(capsys, "sweep", "--system", "linear_contraction", "--scale", "eq5:p=0.5,q=-2",
                          "--radii", "1,1e2,1e4,1e6", "--eps", "1e-6", "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["radius", "direction_index", "t_settle", "bound", "margin"]
    assert len(rows) == 4 and all(float(r["t_settle"]) < 2.5 for r in rows)
    assert all(float(r["bound"]) == 2.5 for r in rows)
    doc = json.loads(stdout)
    assert doc["results"]["classification"] == "FxTS-evidence"
    assert doc["params"]["scale"] == {"kind": "eq5", "p": 0.5, "q": -2.0}


def test_verify_example(capsys):
    code, out, _ = run(capsys, "verify", "--system", "quadratic_gradient:q=1,4", "--condition", "i",
                       "--convention", "theorem5", "--samples", "1000", "--seed", "7")
    r = json.loads(out)["results"]
    assert code == 0
    assert abs(r["lambda0_estimate"] - 1.0) < 1e-9 and r["verdict"] == "condition_i_holds"
    assert {"condition", "lambda0_estimate", "worst_point", "margins", "verdict", "params_echo"} <= set(r)


def test_verify_phi_defaults(capsys):
    code, out, _ = run(capsys, "verify", "--system", "linear_contraction", "--scale", "eq5:p=0.5,q=-2",
                       "--condition", "phi1", "--domain", "annulus:0.01,100")
    r = json.loads(out)["results"]
    assert code == 0 and r["verdict"] == "holds"
    assert r["params_echo"]["phi"] == "polyakov:a=2.0,b=2.0,p=0.75,q=2.0"
    code, out, _ = run(capsys, "verify", "--system", "quadratic_gradient", "--scale", "eq6:alpha=0.5,beta=-2",
                       "--condition", "phi2", "--domain", "annulus:0.01,10",
                       "--phi", "theorem5:alpha=0.5,beta=-2,lambda0=1,switch=gain")
    assert code == 0 and json.loads(out)["results"]["verdict"] == "holds"
    code, _, err = run(capsys, "verify", "--system", "rotation_contraction", "--condition", "phi1")
    assert code == 2 and json.loads(err)["error"]["code"] == "cli_harness.parameter"


def test_simulate_artifacts(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    rep = tmp_path / "traj.json"
    code, stdout, _ = run(capsys, "simulate", "--system", "quadratic_gradient", "--scale",
                          "eq6:alpha=0.5,beta=-2", "--x0", "3,-1", "--eps", "1e-6", "--v", "potential",
                          "--out", str(out), "--report", str(rep), "--figures")
    assert code == 0 and stdout == ""
    header = out.read_text().splitlines()[0]
    assert header == "t,x1,x2,V,normf"
    doc = json.loads(rep.read_text())
    assert doc["results"]["termination"] == "settled"
    assert doc["results"]["v_non_increasing"] is True
    assert doc["params"]["scale"]["c"] == pytest.approx(3.2446098, rel=1e-7)
    assert (tmp_path / "traj.png").read_bytes()[:4] == b"\x89PNG"
    long = (tmp_path / "traj_plot.csv").read_text().splitlines()
    assert long[0] == "series,t,value"
    # 17 significant digits in the CSV
    first = out.read_text().splitlines()[2].split(",")
    assert any(len(v.replace("-", "").replace(".", "").split("e")[0]) >= 15 for v in first)


def test_compare_linear_contraction(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    code, stdout, _ = run(capsys, "compare", "--system", "linear_contraction", "--eps", "1e-6",
                          "--radii", "1,10,100,1e3,1e4", "--out", str(out), "--figures")
    assert code == 0
    v = json.loads(stdout)["results"]["variants"]
    assert v["unscaled"]["classification"] == "AS-evidence"
    assert v["eq5"]["classification"] == "FxTS-evidence"
    assert v["eq6"]["classification"] == "FxTS-evidence"
    rows = list(csv.DictReader(out.open()))
    assert {r["variant"] for r in rows} == {"unscaled", "eq5", "eq6"} and len(rows) == 15
    assert (tmp_path / "cmp.png").exists() and (tmp_path / "cmp_plot.csv").exists()


def test_error_exit_codes(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--system", "no_such_system", "--x0", "1")
    assert code == 2 and json.loads(err)["error"]["code"] == "field_core.lookup"
    code, _, err = run(capsys, "simulate", "--system", "linear_contraction", "--scale", "eq5:p=2,q=-1",
                       "--x0", "1,1")
    assert code == 2 and json.loads(err)["error"]["code"] == "scaling.parameter"
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2
    code, _, err = run(capsys, "bound", "--formula", "theorem4", "--lambda0", "2")
    assert code == 2 and "--p" in json.loads(err)["error"]["message"]
    code, _, _ = run(capsys, "simulate", "--system", "linear_contraction", "--x0", "1,1", "--figures")
    assert code == 2


def test_numeric_failure_exit_code(monkeypatch, capsys):
    def broken(o, writer):
        raise QuadratureError("did not converge", module="settling_bounds")

    monkeypatch.setitem(cli.COMMANDS, "bound", broken)
    code, _, err = run(capsys, "bound", "--formula", "theorem1")
    assert code == 3 and json.loads(err)["error"]["code"] == "settling_bounds.quadrature"

    def overflow(o, writer):
        raise FloatingPointError("overflow")

    monkeypatch.setitem(cli.COMMANDS, "bound", overflow)
    code, _, err = run(capsys, "bound", "--formula", "theorem1")
    assert code == 3 and json.loads(err)["error"]["code"] == "cli_harness.numeric"


def test_unwritable_path_leaves_nothing(tmp_path, capsys):
    good = tmp_path / "ok.csv"
    bad = tmp_path / "missing" / "r.json"
    code, _, err = run(capsys, "simulate", "--system", "linear_contraction", "--x0", "1,1",
                       "--out", str(good), "--report", str(bad))
    assert code == 4 and json.loads(err)["error"]["code"] == "cli_harness.io"
    assert not good.exists()
    assert os.listdir(tmp_path) == []


def test_empty_results_document():
    doc = report_document("fxts x", {}, [], [])
    assert doc["results"] == [] and doc["warnings"] == ["no results"]
    assert json.loads(json_text(doc)) == doc


def test_byte_identical_reruns(tmp_path, capsys, monkeypatch):
    outputs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        monkeypatch.chdir(d)
        code, _, _ = run(capsys, "sweep", "--system", "rotation_contraction", "--scale", "eq5:p=0.5,q=-2",
                         "--radii", "1,10,100", "--n-directions", "3", "--seed", "4", "--eps", "1e-6",
                         "--out", "s.csv", "--report", "s.json", "--figures")
        assert code == 0
        outputs.append({p: (d / p).read_bytes() for p in sorted(os.listdir(d))})
    assert outputs[0] == outputs[1]
    assert sorted(outputs[0]) == ["s.csv", "s.json", "s.png", "s_plot.csv"]


def test_help_documents_grammar(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["sweep", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--system", "--scale", "--radii", "--eps", "--dt-min", "--seed", "--figures"):
        assert flag in text


# echo round trip over the grammar ------------------------------------------------

finite = st.floats(1e-6, 1e6, allow_nan=False)
scales = st.sampled_from([None, "eq5:p=0.5,q=-2", "eq6:alpha=0.3,beta=-1.5"])
systems = st.sampled_from(["linear_contraction", "quadratic_gradient:q=1,4", "rotation_contraction:w=2"])


def opt(flag, strategy, fmt=repr):
    return st.one_of(st.just([]), strategy.map(lambda v: [flag, fmt(v)]))


sim_flags = st.tuples(
    opt("--method", st.sampled_from(["rk4", "rk45"]), str),
    opt("--dt", finite), opt("--rtol", finite), opt("--eps", finite), opt("--t-max", finite),
    opt("--dwell", finite), opt("--stride", st.integers(1, 9), str),
    opt("--seed", st.integers(0, 2 ** 31), str),
    opt("--out", st.sampled_from(["a.csv", "dir with space/b.csv"]), str),
    st.sampled_from([[], ["--figures"]]),
)
float_lists = st.lists(finite, min_size=1, max_size=4).map(lambda xs: ",".join(map(repr, xs)))


@st.composite
def argvs(draw):
    cmd = draw(st.sampled_from(["simulate", "verify", "bound", "sweep", "compare"]))
    argv = [cmd]
    if cmd != "bound":
        argv += ["--system", draw(systems)]
    if cmd in ("simulate", "verify", "sweep"):
        s = draw(scales)
        if s:
            argv += ["--scale", s]
    if cmd in ("simulate", "sweep", "compare"):
        for part in draw(sim_flags):
            argv += part
    if cmd == "simulate":
        argv += ["--x0", draw(float_lists)]
    elif cmd == "verify":
        argv += ["--condition", draw(st.sampled_from(["i", "ii", "phi1", "phi2"]))]
        argv += draw(opt("--samples", st.integers(1, 5000), str))
        argv += draw(opt("--domain", st.tuples(finite, finite).map(lambda t: (min(t), max(t) * 2)),
                         lambda t: f"annulus:{t[0]!r},{t[1]!r}"))
        argv += draw(opt("--phi", st.just("power:a=1,p=0.5"), str))
    elif cmd == "bound":
        argv += ["--formula", draw(st.sampled_from(["lemma3", "theorem1", "theorem4", "theorem5"]))]
        for name in ("a", "b", "p", "q", "v0"):
            argv += draw(opt("--" + name, finite))
    else:
        argv += ["--radii", draw(float_lists)]
        argv += draw(opt("--directions", st.just("1,0;0,1"), str))
    return argv


@settings(max_examples=150)
@given(argvs())
def test_config_echo_round_trip(argv):
    cfg = RunConfig.parse(argv)
    again = RunConfig.parse(cfg.echo())
    assert again == cfg
    assert RunConfig.parse(again.echo()) == cfg
    assert again.echo() == cfg.echo()


def test_echo_includes_infinite_values():
    cfg = RunConfig.parse(["bound", "--phi", "power:a=1,p=0.5", "--v0", "inf"])
    assert "--v0 inf" in cfg.echo()
    assert RunConfig.parse(cfg.echo()) == cfg
