import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmgrid.benchfns import make_function
from swarmgrid.core import EvalBudget
from swarmgrid.errors import ConfigError, MissingConfig, UnknownFunction
from swarmgrid.harness import cli
from swarmgrid.harness.config import DuplicateKey, ParseError, RunConfig, parse_config, read_config
from swarmgrid.harness.runner import (
    COMPARE_METHODS,
    Hybrid,
    UnknownMethod,
    build_optimizer,
    compare,
    load_presets,
    run_once,
    speedup_rows,
)
from swarmgrid.stats import compare_pair

# -- config files ------------------------------------------------------------


def test_parse_examples():
    p = parse_config("# comment\n\nde.w,real,0.5\nde.pop,int,40\nflag,bool,true\nname,str,a,b\nv,vec,1;2.5;-3\n")
    assert p["de.w"] == 0.5 and p["de.pop"] == 40 and p["flag"] is True
    assert p["name"] == "a,b"
    assert p["v"] == (1.0, 2.5, -3.0)


@pytest.mark.parametrize(
    "text,line",
    [
        ("de.pop,real,abc", 1),
        ("a,int,1\n\nb,int", 3),
        ("# x\nb,float,1", 2),
        ("ok,bool,maybe", 1),
        ("v,vec,", 1),
        (",int,3", 1),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == line


def test_duplicate_key():
    with pytest.raises(DuplicateKey) as info:
        parse_config("a,int,1\na,int,2")
    assert info.value.line == 2


@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9._]{0,10}", fullmatch=True), st.integers(-10**9, 10**9), max_size=8))
def test_int_round_trip(d):
    text = "\n".join(f"{k},int,{v}" for k, v in d.items())
    assert dict(parse_config(text)) == d


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_real_round_trip(x):
    assert parse_config(f"x,real,{x!r}")["x"] == x


def test_run_config_defaults(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("function,str,sphere\ndim,int,7\noptimizer,str,mc\n")
    cfg = RunConfig.from_params(read_config(path))
    assert (cfg.budget, cfg.seed, cfg.reps) == (7000, 0, 1)


def test_run_config_missing_key():
    with pytest.raises(MissingConfig, match="dim"):
        RunConfig.from_params(parse_config("function,str,sphere\noptimizer,str,mc"))


@pytest.mark.parametrize("kw", [{"budget": 0}, {"reps": 0}, {"dim": 0}])
def test_run_config_invalid(kw):
    args = dict(function="sphere", dim=2, optimizer="mc")
    args.update(kw)
    with pytest.raises(ConfigError):
        RunConfig(**args)


# -- presets and hybrids -----------------------------------------------------


def test_presets_cover_comparison_methods():
    presets = load_presets()
    assert set(COMPARE_METHODS) <= set(presets)
    assert len(COMPARE_METHODS) == 15
    assert "de_desk" in presets


def test_unknown_method():
    with pytest.raises(UnknownMethod):
        build_optimizer("tabu")


def test_user_params_override_preset():
    opt = build_optimizer("de", {"de.pop": 7})
    assert opt.params.get_int("de.pop") == 7


@pytest.mark.parametrize("method", ["gafcg", "eafcg", "psfcg", "defcg", "safcg"])
@pytest.mark.parametrize("budget", [2001, 3000])
def test_hybrid_budget_split(method, budget):
    opt = build_optimizer(method, {"seed": 1, "budget": budget})
    assert isinstance(opt, Hybrid)
    res = opt.minimize(make_function("rastrigin", 5))
    used1, used2 = opt.split
    assert used1 + used2 == res.evals_used == budget
    assert max(used1, used2) <= math.ceil(budget / 2)


def test_hybrid_never_worse_than_its_first_half():
    f = make_function("rosenbrock", 4)
    hyb = build_optimizer("gafcg", {"seed": 3, "budget": 4000})
    res = hyb.minimize(f)
    meta = build_optimizer("ga", {"seed": 3}).minimize(f, EvalBudget(2000))
    assert hyb.split[0] == meta.evals_used
    assert res.value <= meta.value


# -- single runs -------------------------------------------------------------


def test_result_line_format():
    rec = run_once("mc", "sphere", 2, seed=5, budget=10)
    fields = rec.result_line().split(",")
    assert fields[:5] == ["RESULT", "mc", "sphere", "2", "5"]
    assert float(fields[5]) == rec.value and fields[6] == "10"
    assert rec.arg_line().startswith("ARG,mc,sphere,")


def test_arg_line_truncates():
    rec = run_once("mc", "sphere", 12, seed=0, budget=5)
    assert rec.arg_line().endswith(";...(+4)")


def test_runs_are_reproducible():
    a = run_once("ga", "ackley", 6, seed=4, budget=3000)
    b = run_once("ga", "ackley", 6, seed=4, budget=3000)
    assert a.result_line().rsplit(",", 1)[0] == b.result_line().rsplit(",", 1)[0]


# -- speedup rows ------------------------------------------------------------


def test_speedup_examples():
    r = speedup_rows([1, 2], [790.4, 404.9])
    assert r[0].speedup == 1.0 and r[0].efficiency == 1.0
    assert round(r[1].speedup, 2) == 1.95
    assert r[1].efficiency == pytest.approx(0.976, abs=1e-3)  # printed as 0.97 when truncated
    r8 = speedup_rows([1, 8], [790.4, 123.1])[1]
    assert (round(r8.speedup, 2), round(r8.efficiency, 2)) == (6.42, 0.80)
    assert r8.line() == "SPEEDUP,8,123.100,6.42,0.80"


@given(st.floats(0.01, 1e4), st.integers(1, 64))
def test_equal_times_give_unit_speedup(t, n):
    rows = speedup_rows([1, n], [t, t])
    assert rows[0].speedup == rows[1].speedup == 1.0
    assert rows[1].efficiency == pytest.approx(1.0 / n)


def test_speedup_rows_start_at_one():
    with pytest.raises(ValueError):
        speedup_rows([2, 4], [1.0, 0.5])


# -- comparisons -------------------------------------------------------------


def test_self_comparison_ties():
    cmp = compare(["mc", "mc"], ["sphere", "ackley", "griewank"], dim=3, reps=2, budget=200)
    assert cmp.cells[("mc", "mc")].winner == "tie"
    assert cmp.matrix_lines() == ["MATRIX,mc,mc,tie,"]


def test_matrix_follows_method_order():
    fns = ["sphere", "rastrigin", "ackley", "griewank"]
    cmp = compare(["mc", "ga", "de"], fns, dim=4, reps=2, budget=2000)
    assert [tuple(l.split(",")[1:3]) for l in cmp.matrix_lines()] == [("mc", "ga"), ("mc", "de"), ("ga", "de")]
    for (a, b), cell in cmp.cells.items():
        ra = next(r for r in cmp.results if r.name == a)
        rb = next(r for r in cmp.results if r.name == b)
        assert cell == compare_pair(ra, rb)
    lines = cmp.table().splitlines()
    assert lines[0].split() == ["ga", "de"]
    assert [l.split()[0] for l in lines[1:]] == ["mc", "ga"]


def test_compare_threads_match_serial():
    fns = ["sphere", "ackley"]
    a = compare(["mc", "ga"], fns, dim=3, reps=2, budget=500)
    b = compare(["mc", "ga"], fns, dim=3, reps=2, budget=500, threads=3)
    assert a.results == b.results


def test_compare_errors():
    with pytest.raises(UnknownMethod):
        compare(["mc", "nope"], ["sphere"], dim=2, reps=1, budget=10)
    with pytest.raises(UnknownFunction):
        compare(["mc", "ga"], ["nofn"], dim=2, reps=1, budget=10)
    with pytest.raises(ConfigError):
        compare(["mc"], ["sphere"], dim=2, reps=1, budget=10)


# -- command line ------------------------------------------------------------


def write(tmp_path, text, name="x.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_mc_budget(tmp_path, capsys):
    path = write(tmp_path, "function,str,sphere\ndim,int,2\noptimizer,str,mc\nbudget,int,10\n")
    assert cli.main(["run", "--config", path]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split(",")[6] == "10"
    assert out[1].startswith("ARG,mc,sphere,")


def test_cli_run_is_byte_identical(tmp_path, capsys):
    path = write(tmp_path, "function,str,rastrigin\ndim,int,5\noptimizer,str,de\nbudget,int,3000\nde.numthreads,int,2\n")
    cli.main(["run", "--config", path, "--seed", "3"])
    first = [l.rsplit(",", 1)[0] if l.startswith("RESULT") else l for l in capsys.readouterr().out.splitlines()]
    cli.main(["run", "--config", path, "--seed", "3"])
    second = [l.rsplit(",", 1)[0] if l.startswith("RESULT") else l for l in capsys.readouterr().out.splitlines()]
    assert first == second


def test_cli_missing_key_exit_2(tmp_path, capsys):
    path = write(tmp_path, "function,str,sphere\noptimizer,str,mc\n")
    assert cli.main(["run", "--config", path]) == 2
    assert "dim" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    ["function,str,sphere\ndim,int,x\noptimizer,str,mc\n", "function,str,nofn\ndim,int,2\noptimizer,str,mc\n",
     "function,str,sphere\ndim,int,2\noptimizer,str,nope\n"],
)
def test_cli_config_errors(tmp_path, text):
    assert cli.main(["run", "--config", write(tmp_path, text)]) == 2


def test_cli_missing_file():
    assert cli.main(["run", "--config", "/nonexistent/x.cfg"]) == 2


def test_cli_runtime_error_exit_3(tmp_path, capsys):
    path = write(tmp_path, "function,str,sphere\ndim,int,2\noptimizer,str,de\nde.variant,str,bogus\n")
    assert cli.main(["run", "--config", path]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_cli_compare_csv(tmp_path, capsys):
    csv = tmp_path / "m.csv"
    rc = cli.main(["compare", "--suite", "sphere,ackley", "--methods", "mc,ga", "--reps", "1", "--dim", "3",
                   "--budget", "300", "--csv", str(csv)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("MEAN,") == 2
    assert csv.read_text().startswith("MATRIX,mc,ga,")


def test_cli_speedup(tmp_path, capsys):
    path = write(tmp_path, "function,str,sphere\ndim,int,4\noptimizer,str,de\nde.pop,int,8\nde.gens,int,20\nbudget,int,10000\n")
    assert cli.main(["speedup", "--config", path, "--threads", "1,2"]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if l.startswith("SPEEDUP,")]
    assert [r.split(",")[1] for r in rows] == ["1", "2"]
    assert rows[0].split(",")[3] == "1.00"


def test_cli_dist_matches_local(tmp_path):
    path = write(tmp_path, "function,str,griewank\ndim,int,4\noptimizer,str,ga\nga.pop,int,20\nbudget,int,400\nseed,int,2\n")
    env = {**os.environ, "PYTHONUNBUFFERED": "1"}
    srv = subprocess.Popen(
        [sys.executable, "-m", "swarmgrid", "server", "--client-port", "0", "--worker-port", "0", "--timeout", "10"],
        stdout=subprocess.PIPE, text=True, env=env,
    )
    workers = []
    try:
        _, sid, cport, wport = srv.stdout.readline().strip().split(",")
        for _ in range(2):
            workers.append(subprocess.Popen(
                [sys.executable, "-m", "swarmgrid", "worker", "--server", f"127.0.0.1:{wport}", "--threads", "2"], env=env
            ))
        time.sleep(1.0)
        dist = subprocess.run(
            [sys.executable, "-m", "swarmgrid", "run", "--config", path, "--dist", f"127.0.0.1:{cport}"],
            capture_output=True, text=True, env=env, timeout=120,
        )
        local = subprocess.run(
            [sys.executable, "-m", "swarmgrid", "run", "--config", path], capture_output=True, text=True, env=env, timeout=120
        )
        assert dist.returncode == 0, dist.stderr
        strip = lambda out: [l.rsplit(",", 1)[0] if l.startswith("RESULT") else l for l in out.splitlines()]
        assert strip(dist.stdout) == strip(local.stdout)
    finally:
        for p in workers + [srv]:
            p.kill()
            p.wait()
