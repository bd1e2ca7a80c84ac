import csv

import numpy as np
import pytest

from rdlab.checks import containment_source
from rdlab.cli import build_parser, main
from rdlab.regions.boundary import read_region_csv
from rdlab.source import SideInfoSource

BOHO_CFG = """\
kind = boho
seed = 5
trials = 2
n = 8
m = 20000
source = boho:p=0.3,eps=0.001
"""

CORRECTION_CFG = """\
kind = correction
seed = 2
trials = 2
n = 6
source = boho:p=0.3,eps=0.001
f1 = 0 1
f2 = 0 0 1 1
p_w = 0.8 0.2 0.2 0.8
tau = 0.7
"""


@pytest.fixture
def block3(tmp_path):
    path = tmp_path / "block3.src"
    path.write_text(containment_source().to_text())
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_region_cc_writes_csv_prov_and_manifest(tmp_path, block3, capsys):
    sweep = tmp_path / "cc.sweep"
    sweep.write_text("n_specs = 30\nseed = 4\n")
    out = tmp_path / "cc.csv"
    assert main(["region", "cc", block3, str(sweep), "--d1", "0.7", "--d2", "0.7",
                 "--out", str(out)]) == 0
    rows = read_region_csv(out)
    assert rows and all(r["scheme"] == "cc" for r in rows)
    assert all(float(r["d1"]) <= 0.7 + 1e-12 and float(r["d2"]) <= 0.7 + 1e-12 for r in rows)
    prov = (tmp_path / "cc.csv.prov").read_text()
    assert prov.startswith("manifest = cc.csv.manifest\n")
    man = (tmp_path / "cc.csv.manifest").read_text()
    assert "input.block3.src.sha256 = " in man and "config.sweep.n_specs = 30" in man
    assert f"{len(rows)} boundary points" in capsys.readouterr().out


def test_region_is_byte_reproducible(tmp_path, block3):
    outs = []
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        out = tmp_path / d / "r.csv"
        assert main(["region", "bt", block3, "--d1", "0.8", "--d2", "0.8", "--out", str(out),
                     "--threads", "1" if d == "a" else "3"]) == 0
        outs.append((out.read_bytes(), (tmp_path / d / "r.csv.prov").read_bytes()))
    assert outs[0] == outs[1]


def test_region_bt_matches_cc_when_common_part_trivial(tmp_path):
    # independent sources have a constant Gacs-Korner part; with W pinned trivial
    # the cc sweep draws exactly the bt specs
    src = tmp_path / "ind.src"
    src.write_text("x1_size = 2\nx2_size = 2\npmf = 0.21 0.09 0.49 0.21\n"
                   "d1 = 0 1 1 0\nd2 = 0 1 1 0\n")
    sweep = tmp_path / "w1.sweep"
    sweep.write_text("w_size = 1\nn_specs = 60\n")
    texts = []
    for scheme in ("cc", "bt"):
        out = tmp_path / f"{scheme}.csv"
        assert main(["region", scheme, str(src), str(sweep), "--d1", "0.25", "--d2", "0.25",
                     "--out", str(out)]) == 0
        texts.append(out.read_text().replace(f",{scheme},", ",X,"))
    assert texts[0] == texts[1]


def test_region_btsi(tmp_path):
    rng = np.random.default_rng(0)
    pmf = rng.dirichlet(np.ones(16)).reshape(2, 2, 2, 2)
    d = 1 - np.eye(2)
    path = tmp_path / "si.src"
    path.write_text(SideInfoSource(pmf, d, d).to_text())
    out = tmp_path / "si.csv"
    assert main(["region", "btsi", str(path), "--d1", "0.4", "--d2", "0.4",
                 "--out", str(out)]) == 0
    assert read_region_csv(out)


def test_region_flmc_eps_above_third_is_infeasible(tmp_path, capsys):
    rc = main(["region", "flmc", "boho:p=0.3,eps=0.4", "--d1", "0", "--d2", "0.15",
               "--out", str(tmp_path / "f.csv")])
    assert rc == 3
    assert "B(eps) empty" in capsys.readouterr().err


def test_region_flmc_names_binding_constraint(tmp_path, capsys):
    rc = main(["region", "flmc", "boho:p=0.3,eps=0.001", "--d1", "0", "--d2", "0.3",
               "--out", str(tmp_path / "f.csv")])
    assert rc == 3
    assert "log(2 eps)/log(1-eps)" in capsys.readouterr().err


def test_usage_and_parse_errors(tmp_path, block3, capsys):
    out = str(tmp_path / "x.csv")
    with pytest.raises(SystemExit) as exc:
        main(["region", "cc", block3, "--d1", "1", "--d2", "1", "--out", out, "--bogus"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.sweep"
    bad.write_text("n_specs = 3\nnspecs = 4\n")
    assert main(["region", "cc", block3, str(bad), "--d1", "1", "--d2", "1", "--out", out]) == 2
    assert "bad.sweep:2:" in capsys.readouterr().err
    assert main(["region", "cc", str(tmp_path / "missing"), "--d1", "1", "--d2", "1",
                 "--out", out]) == 2
    broken = tmp_path / "broken.src"
    broken.write_text("x1_size = 2\nx2_size = 2\npmf = 0.5 oops 0.25 0.25\n")
    assert main(["region", "cc", str(broken), "--d1", "1", "--d2", "1", "--out", out]) == 2
    assert "broken.src:3:" in capsys.readouterr().err


def test_help_lists_every_flag(capsys):
    for cmd, flags in {"region": ["--d1", "--d2", "--out", "--swap-symmetrize", "--threads"],
                       "boho": ["--p", "--eps", "--d2max", "--n-count", "--delta1-count",
                                "--out"],
                       "sim": ["--seed", "--out", "--threads"],
                       "check": ["--suite", "--out", "--threads"]}.items():
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        text = capsys.readouterr().out
        assert all(f in text for f in flags), cmd
    assert {a.dest for a in build_parser()._actions} >= {"command"}


def test_boho_multi_curve_and_warning(tmp_path, capsys):
    out = tmp_path / "fig.csv"
    rc = main(["boho", "--p", "0.3", "--eps", "1e-5", "--eps", "0", "--eps", "0.4",
               "--d2max", "0.15", "--delta-count", "24", "--delta1-count", "24",
               "--out", str(out)])
    assert rc == 0
    assert "eps=0.4" in capsys.readouterr().err
    rows = read_region_csv(out)
    assert {r["epsilon"] for r in rows} == {"1e-05", "0.0"}
    assert len({r["provenance_id"] for r in rows}) == len(rows)
    assert all(float(r["d2"]) <= 0.15 + 1e-12 for r in rows)


def test_boho_only_empty_curves_is_infeasible(tmp_path):
    assert main(["boho", "--p", "0.3", "--eps", "0.4", "--d2max", "0.15",
                 "--out", str(tmp_path / "e.csv")]) == 3
    assert main(["boho", "--p", "0.7", "--d2max", "0.15", "--out", str(tmp_path / "e.csv")]) == 3


def _load_boundary(path, fixed):
    from rdlab.regions.boundary import Corner, assemble_region
    from rdlab.regions.schemes import RDTuple

    return assemble_region([Corner(RDTuple(*(float(r[k]) for k in ("r1_bits", "r2_bits", "d1",
                                                                      "d2"))))
                            for r in read_region_csv(path)], fixed)


def test_boho_eps_zero_contains_numeric_cc_region(tmp_path):
    # the closed-form eps = 0 curve dominates a random-spec cc sweep on the same source;
    # the slack covers the delta grid stopping short of r1 = 0
    from rdlab.regions.boundary import region_contains

    closed, numeric = tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["boho", "--p", "0.3", "--eps", "0", "--d2max", "0.15", "--out", str(closed)]) == 0
    sweep = tmp_path / "s.sweep"
    sweep.write_text("n_specs = 300\n")
    assert main(["region", "cc", "boho:p=0.3,eps=0", str(sweep), "--d1", "0", "--d2", "0.15",
                 "--out", str(numeric)]) == 0
    rows = read_region_csv(closed)
    assert {r["scheme"] for r in rows} == {"boho-cc"}
    ok, worst = region_contains(_load_boundary(closed, (0.0, 0.15)),
                                _load_boundary(numeric, (0.0, 0.15)), 1e-3)
    assert ok, worst


def _sim(tmp_path, sub, cfg_text, kind, threads, extra=()):
    d = tmp_path / sub
    d.mkdir()
    cfg = d / "run.cfg"
    cfg.write_text(cfg_text)
    out = d / "report.txt"
    rc = main(["sim", kind, str(cfg), "--out", str(out), "--threads", str(threads), *extra])
    return rc, out


@pytest.mark.parametrize("kind,text", [("boho", BOHO_CFG), ("correction", CORRECTION_CFG)])
def test_sim_bytes_independent_of_threads(tmp_path, kind, text):
    rc1, a = _sim(tmp_path, "t1", text, kind, 1)
    rc8, b = _sim(tmp_path, "t8", text, kind, 8)
    assert rc1 == rc8 == 0
    assert a.read_bytes() == b.read_bytes()
    assert (a.parent / "report.txt.trials.csv").read_bytes() == \
        (b.parent / "report.txt.trials.csv").read_bytes()
    assert "manifest = report.txt.manifest" in a.read_text()


def test_sim_seed_override_and_kind_mismatch(tmp_path):
    rc, a = _sim(tmp_path, "s", BOHO_CFG, "boho", 1, ["--seed", "99"])
    assert rc == 0 and "config.seed = 99" in a.read_text()
    assert "seed = 99" in (a.parent / "report.txt.manifest").read_text()
    rc, _ = _sim(tmp_path, "k", BOHO_CFG, "quantizer", 1)
    assert rc == 2


def test_sim_gate_failure_exits_one(tmp_path, monkeypatch, capsys):
    import rdlab.sim.runner as runner

    real = runner.run_sim

    def failing(cfg, threads=None):
        rep = real(cfg, threads)
        rep.gate("forced", False, -1.0)
        return rep

    monkeypatch.setattr(runner, "run_sim", failing)
    rc, out = _sim(tmp_path, "g", BOHO_CFG, "boho", 1)
    assert rc == 1
    assert "passed = false" in out.read_text()
    assert "forced" in capsys.readouterr().err


def test_check_table(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["check", "--suite", "typicality", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "check,cases,violations,min_margin,status"
    assert out.read_text() == text
    assert all(line.endswith(",pass") for line in text.splitlines()[1:])


def test_threads_env_fallback_and_bad_value(tmp_path, monkeypatch):
    monkeypatch.setenv("RDLAB_THREADS", "2")
    rc, _ = _sim(tmp_path, "e", BOHO_CFG, "boho", 1)
    assert rc == 0
    with pytest.raises(SystemExit) as exc:
        main(["sim", "boho", "x", "--out", "y", "--threads", "0"])
    assert exc.value.code == 2
