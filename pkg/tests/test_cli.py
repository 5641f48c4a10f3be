import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deqcd.cli import CSV_HEADER, main
from deqcd.config import ConfigError, ExperimentConfig, loads

BASE = {
    "family": {"type": "gaussian_finite", "thetas": [0.4, 0.6, 0.8, 1.0], "theta_star": 0.4},
    "theta_true": 0.6,
    "detectors": [{"type": "gcusum"}, {"type": "gdecusum", "mu": 0.08, "h": "inf"},
                  {"type": "fractional", "skip_pattern": "period2"}],
    "thresholds": [3.0, 3.5],
    "trials": 200,
    "cadd_trials": 200,
    "gamma_grid": [1, 5],
    "seed": 4,
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(p)


def variant(**kw):
    cfg = json.loads(json.dumps(BASE))
    for k, v in kw.items():
        if v is None:
            cfg.pop(k, None)
        else:
            cfg[k] = v
    return cfg


# ---------------------------------------------------------------- config


def test_round_trip_and_inf():
    cfg = ExperimentConfig.from_dict(BASE)
    assert cfg.detectors[1].h == math.inf
    assert cfg.to_dict()["detectors"][1]["h"] == "inf"
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert loads(cfg.dumps()) == cfg


detector_dicts = st.one_of(
    st.builds(lambda: {"type": "gcusum"}),
    st.builds(lambda t: {"type": "cusum", "theta": t}, st.sampled_from([0.4, 0.6, 0.8, 1.0])),
    st.builds(lambda mu, h: {"type": "gdecusum", "mu": mu, "h": h},
              st.floats(0.01, 5), st.one_of(st.just("inf"), st.floats(0, 50))),
    st.builds(lambda p: {"type": "fractional", "skip_pattern": "bernoulli", "keep_prob": p}, st.floats(0, 1)),
)


@given(st.lists(detector_dicts, min_size=1, max_size=4),
       st.lists(st.floats(0.1, 20), min_size=1, max_size=5, unique=True),
       st.integers(0, 2**64 - 1), st.booleans())
def test_round_trip_property(dets, thr, seed, expfam):
    d = variant(detectors=dets, thresholds=sorted(thr), seed=seed)
    if expfam:
        d["family"] = {"type": "gaussian_expfam", "theta_l": 0.4, "theta_u": 1.0, "theta_star": 0.4,
                       "epsilon": 0.1, "control_density": {"type": "gaussian", "mean": 0.5}}
    cfg = ExperimentConfig.from_dict(d)
    assert loads(cfg.dumps()) == cfg


@pytest.mark.parametrize("bad,msg", [
    (variant(thresholds=[3.0, 3.0]), "strictly increasing"),
    (variant(detectors=[]), "detectors"),
    (variant(theta_true=0.7), "theta_true"),
    (variant(detectors=[{"type": "cusum", "theta": 0.5}]), "detectors[0].theta"),
    (variant(detectors=[{"type": "gdecusum"}]), "detectors[0].mu"),
    (variant(detectors=[{"type": "sprt"}]), "detectors[0].type"),
    (variant(family={"type": "gaussian_finite", "thetas": [0.4]}), "theta_star"),
    (variant(trials="many"), "trials"),
])
def test_validation_names_the_field(bad, msg):
    with pytest.raises(ConfigError, match=msg.replace("[", r"\[").replace("]", r"\]")):
        ExperimentConfig.from_dict(bad)


def test_json_error_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        loads('{"family":\n  oops}')


# ---------------------------------------------------------------- commands


def test_check_family_exit_codes(tmp_path, capsys):
    assert main(["check-family", "--config", write(tmp_path, BASE)]) == 0
    out = capsys.readouterr().out
    assert "assumption holds" in out
    flipped = variant(family={"type": "gaussian_finite", "thetas": [0.4, 0.6, 0.8, 1.0], "theta_star": 1.0})
    assert main(["check-family", "--config", write(tmp_path, flipped)]) == 2
    assert "-0.1" in capsys.readouterr().out
    no_star = variant(family={"type": "gaussian_finite", "thetas": [0.4, 0.6]})
    assert main(["check-family", "--config", write(tmp_path, no_star)]) == 1
    assert "theta_star" in capsys.readouterr().err
    assert main(["check-family", "--config", write(tmp_path, "{\n,")]) == 1
    assert main(["check-family", "--config", str(tmp_path / "missing.json")]) == 1


def test_curve_csv(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--config", write(tmp_path, BASE), "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "[curve]" in captured.err
    raw = out.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 1 + 3 * 2
    assert [ln.split(",")[0] for ln in lines[1:]] == ["gcusum"] * 2 + ["gdecusum"] * 2 + ["fractional"] * 2
    for ln in lines[1:]:
        for cell in ln.split(",")[1:10]:
            if cell not in ("exact", "renewal-reward"):
                assert len(cell.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 6

    again = tmp_path / "again.csv"
    main(["curve", "--config", write(tmp_path, BASE), "--out", str(again)])
    assert again.read_bytes() == raw


def test_curve_single_row_and_stdout(tmp_path, capsys):
    cfg = variant(detectors=[{"type": "cusum"}], thresholds=[3.0])
    assert main(["curve", "--config", write(tmp_path, cfg), "--stdout"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("cusum,0.6,3,")


def test_seed_override_changes_output(tmp_path, capsys):
    cfg = variant(detectors=[{"type": "cusum"}], thresholds=[3.0])
    path = write(tmp_path, cfg)
    main(["curve", "--config", path, "--stdout"])
    a = capsys.readouterr().out
    main(["curve", "--config", path, "--stdout", "--seed", "99"])
    b = capsys.readouterr().out
    assert a != b and b.splitlines()[1].endswith(",99")


def test_curve_estimator_failure_leaves_no_file(tmp_path, capsys):
    cfg = variant(horizon=3, gamma_grid=[50])
    out = tmp_path / "fail.csv"
    assert main(["curve", "--config", write(tmp_path, cfg), "--out", str(out)]) == 3
    assert "estimation failed" in capsys.readouterr().err
    assert list(tmp_path.glob("*.csv*")) == [] and list(tmp_path.glob(".fail.csv*")) == []


def test_pdc_command(tmp_path, capsys):
    cfg = variant(detectors=[{"type": "gdecusum", "mu": 0.08, "h": "inf"}])
    assert main(["pdc", "--config", write(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out
    assert "h=inf bound:    0.500000" in out
    assert "renewal-reward" in out and "long-run" in out

    cus = variant(detectors=[{"type": "cusum"}])
    assert main(["pdc", "--config", write(tmp_path, cus)]) == 2
    assert "PDC is identically 1" in capsys.readouterr().out


def test_pdc_finite_h_prints_both_numbers(tmp_path, capsys):
    cfg = variant(family={"type": "gaussian_finite", "thetas": [0.6], "theta_star": 0.6},
                  detectors=[{"type": "decusum", "mu": 0.18, "h": 10}])
    assert main(["pdc", "--config", write(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out
    assert "renewal-reward:" in out and "0.500000" in out


def test_simulate_json(tmp_path, capsys):
    cfg = variant(detectors=[{"type": "gdecusum", "mu": 0.08, "h": 12.5}], thresholds=[3.0],
                  skip_probes=[5])
    assert main(["simulate", "--config", write(tmp_path, cfg)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert len(rep) == 1
    r = rep[0]
    assert r["detector"] == "gdecusum" and r["wadd_gap_bound"] > 0
    assert any(g["gamma"] == "skip@5" for g in r["cadd"]["per_gamma"])


def test_bad_arguments_exit_1(tmp_path):
    assert main(["curve"]) == 1
    assert main(["curve", "--config", write(tmp_path, BASE), "--threads", "0"]) == 1
