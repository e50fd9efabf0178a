"""Parameter files, checkpoints, series, manifests, and the CLI."""

import json

import numpy as np
import pytest

from oaqg.params import PhysicalParams, ShortwaveConfig, ParamError
from oaqg.model import Model
from oaqg.basis import ResolutionSpec
from oaqg.stepping import SchemeConfig, integrate
from oaqg.config import (read_config, parse_config, config_hash,
                         default_config_text)
from oaqg import persist as ps
from oaqg.cli import cli

RES = ResolutionSpec.parse("4x4/4x4")
F0 = 1.032e-4   # 1/s, matches the packaged default


@pytest.fixture(scope="module")
def model():
    return Model(PhysicalParams(), ShortwaveConfig(), RES)


# -- config ------------------------------------------------------------------


def test_packaged_defaults_load():
    cfg = read_config(None)
    assert cfg.origin == "<defaults>"
    assert cfg.params == PhysicalParams()
    assert cfg.shortwave == ShortwaveConfig()
    assert str(cfg.res) == "8x8/8x8"
    assert cfg.numerics.dt == 193.8
    assert cfg.numerics.t_end == 0.0
    assert cfg.seed == 0
    assert cfg.extras == {}
    assert cfg.text == default_config_text()


def test_overrides_applied():
    text = ("[physical]\n"
            "f0 = 1.1e-4\n"
            "lambda_heat = 25 # W m^-2 K^-1\n"
            "[shortwave]\n"
            "mode = constant\n"
            "R1_a = 150\n"
            "[numerics]\n"
            "dt = 100.0\n"
            "t_end = 1000.0\n"
            "resolution = 4x4/6x6\n"
            "seed = 9\n")
    cfg = parse_config(text, "inline")
    assert cfg.params.f0 == 1.1e-4
    assert cfg.params.lambda_heat == 25.0
    assert cfg.params.beta == PhysicalParams().beta
    assert cfg.shortwave.mode == "constant"
    assert cfg.shortwave.R1_a == 150.0
    assert cfg.numerics.dt == 100.0
    assert cfg.numerics.n_steps == 10
    assert str(cfg.res) == "4x4/6x6"
    assert cfg.seed == 9
    assert cfg.origin == "inline"


def test_unknown_key_names_line():
    with pytest.raises(ParamError, match=r"inline line 2: unknown key "
                                         r"'not_a_param'"):
        parse_config("[physical]\nnot_a_param = 1\n", "inline")


def test_unknown_section():
    with pytest.raises(ParamError, match=r"unknown section \[oceanic\]"):
        parse_config("[oceanic]\n", "inline")


def test_duplicate_key():
    with pytest.raises(ParamError, match="duplicate key 'f0'"):
        parse_config("[physical]\nf0 = 1e-4\nf0 = 2e-4\n", "inline")


def test_key_outside_section():
    with pytest.raises(ParamError, match="line 1: key outside"):
        parse_config("f0 = 1e-4\n", "inline")


def test_bad_value_names_key():
    with pytest.raises(ParamError, match=r"\[physical\] f0: expected "
                                         "float"):
        parse_config("[physical]\nf0 = fast\n", "inline")


def test_bool_words():
    for word, expect in (("true", True), ("off", False), ("Yes", True)):
        cfg = parse_config(f"[sync]\nobserve_temperature = {word}\n",
                           "inline")
        assert cfg.extras["sync"]["observe_temperature"] is expect
    with pytest.raises(ParamError, match="expected a boolean"):
        parse_config("[sync]\nobserve_temperature = maybe\n", "inline")


def test_experiment_section_types():
    text = ("[tlm]\n"
            "n_vectors = 6\n"
            "dt = 200.0\n"
            "metric = euclidean\n")
    extras = parse_config(text, "inline").extras
    assert extras == {"tlm": {"n_vectors": 6, "dt": 200.0,
                              "metric": "euclidean"}}


def test_config_hash_tracks_text():
    a = default_config_text()
    assert config_hash(a) == config_hash(a)
    assert config_hash(a) != config_hash(a + "\n# trailing comment\n")


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ParamError, match="no-such-file.cfg"):
        read_config(tmp_path / "no-such-file.cfg")


# -- checkpoints --------------------------------------------------------------


def test_checkpoint_roundtrip_bitwise(model, tmp_path):
    cfg = SchemeConfig(dt=0.02 / F0, t_end=3.0 / F0, output_every=10 ** 9)
    run = integrate(model, model.random_state(seed=5), cfg)
    path = tmp_path / "ck.txt"
    ps.write_checkpoint(path, run.state, str(RES), "cafe" * 16,
                        history=run.history)
    ck = ps.read_checkpoint(path)
    assert ck.resolution == str(RES)
    assert ck.param_hash == "cafe" * 16
    assert ck.t == run.state.t
    back = ps.state_from_checkpoint(ck)
    for a, b in zip(back.blocks(), run.state.blocks()):
        assert np.array_equal(a, b)
    hist = ps.history_from_checkpoint(ck)
    for a, b in zip(hist.blocks(), run.history.blocks()):
        assert np.array_equal(a, b)


def test_restart_matches_unbroken_run(model, tmp_path):
    s0 = model.random_state(seed=8)
    leg = SchemeConfig(dt=0.02 / F0, t_end=2.0 / F0, output_every=10 ** 9)
    whole = SchemeConfig(dt=0.02 / F0, t_end=4.0 / F0,
                         output_every=10 ** 9)
    full = integrate(model, s0, whole).state

    first = integrate(model, s0, leg)
    path = tmp_path / "mid.txt"
    ps.write_checkpoint(path, first.state, str(RES), "00" * 32,
                        history=first.history)
    ck = ps.read_checkpoint(path)
    second = integrate(model, ps.state_from_checkpoint(ck), leg,
                       history=ps.history_from_checkpoint(ck))
    assert second.state.t == full.t
    for a, b in zip(second.state.blocks(), full.blocks()):
        assert np.array_equal(a, b)


def test_checkpoint_truncation_names_section(model, tmp_path):
    path = tmp_path / "ck.txt"
    ps.write_checkpoint(path, model.zero_state(), str(RES), "00" * 32)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ps.PersistError,
                       match=r"section \[theta_o\] truncated"):
        ps.read_checkpoint(path)


def test_checkpoint_version_mismatch_names_both(model, tmp_path):
    path = tmp_path / "ck.txt"
    ps.write_checkpoint(path, model.zero_state(), str(RES), "00" * 32)
    body = path.read_text().replace("oaqg-checkpoint 1",
                                    "oaqg-checkpoint 99", 1)
    path.write_text(body)
    with pytest.raises(ps.PersistError, match=r"99.*expects 1"):
        ps.read_checkpoint(path)


def test_checkpoint_missing_section(model, tmp_path):
    path = tmp_path / "ck.txt"
    ps.write_checkpoint(path, model.zero_state(), str(RES), "00" * 32)
    body = path.read_text().replace("[psi_o]", "[psi_x]", 1)
    path.write_text(body)
    with pytest.raises(ps.PersistError, match=r"missing section \[psi_o\]"):
        ps.read_checkpoint(path)


# -- series and manifests ------------------------------------------------------


def test_series_ndjson_appends(tmp_path):
    path = tmp_path / "series.ndjson"
    ps.write_series(path, [{"time": 0.0, "w_norm": 1.0}], "ndjson")
    ps.write_series(path, [{"time": 1.0, "w_norm": 2.0}], "ndjson")
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert records == [{"time": 0.0, "w_norm": 1.0},
                       {"time": 1.0, "w_norm": 2.0}]


def test_series_csv_single_header(tmp_path):
    path = tmp_path / "series.csv"
    ps.write_series(path, [{"time": 0.0, "w_norm": 1.0}], "csv")
    ps.write_series(path, [{"time": 1.0, "w_norm": 2.0}], "csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "time,w_norm"
    assert len(lines) == 3
    assert "time" not in lines[2]


def test_series_rejects_unknown_format(tmp_path):
    with pytest.raises(ParamError, match="emit"):
        ps.write_series(tmp_path / "x", [{"a": 1}], "parquet")


def test_manifest_roundtrip(tmp_path):
    man = ps.RunManifest(config_hash="ab" * 32, seed=4, revision="deadbee",
                         started=10.0, finished=20.0, exit_status=0,
                         artifacts=["series.ndjson"])
    path = tmp_path / "manifest.json"
    ps.write_manifest(path, man)
    back = ps.read_manifest(path)
    assert back == man
    assert back.format_versions["checkpoint"] == ps.CHECKPOINT_VERSION


def test_manifest_version_check(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"config_hash": "", "seed": 0,
                                "revision": "", "started": 0.0,
                                "finished": 0.0, "exit_status": 0,
                                "artifacts": [],
                                "format_versions": {"manifest": 9}}))
    with pytest.raises(ps.PersistError, match="version 9"):
        ps.read_manifest(path)


# -- command line ---------------------------------------------------------------


def run_cli(args, capsys):
    rc = cli(args)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_simulate_t_end_zero_writes_initial_state(tmp_path, capsys, model):
    out = tmp_path / "run"
    rc, _, _ = run_cli(["simulate", "--t-end", "0", "--seed", "3",
                        "--resolution", "4x4/4x4", "--out", str(out)],
                       capsys)
    assert rc == 0
    ck = ps.read_checkpoint(out / "checkpoint.txt")
    expect = model.random_state(seed=3)
    got = ps.state_from_checkpoint(ck)
    for a, b in zip(got.blocks(), expect.blocks()):
        assert np.array_equal(a, b)
    man = ps.read_manifest(out / "manifest.json")
    assert man.exit_status == 0
    assert man.seed == 3
    assert man.config_hash == config_hash((out / "config.cfg").read_text())


def test_cli_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[physical]\nhum = 3\n")
    rc, _, err = run_cli(["constants", "--params", str(bad)], capsys)
    assert rc == 2
    assert err.startswith("error: config:")
    assert "hum" in err and err.count("\n") == 1


def test_cli_overflow_exit_3(tmp_path, capsys):
    cfgfile = tmp_path / "ovf.cfg"
    cfgfile.write_text("[numerics]\noverflow_cap = 1e-12\ndt = 193.8\n"
                       "t_end = 19380\nresolution = 4x4/4x4\n")
    out = tmp_path / "run"
    rc, _, err = run_cli(["simulate", "--params", str(cfgfile),
                          "--out", str(out)], capsys)
    assert rc == 3
    assert err.startswith("error: numeric:")
    assert (out / "emergency-checkpoint.txt").exists()
    assert ps.read_manifest(out / "manifest.json").exit_status == 3


def test_cli_equilibrium_reference_case(capsys):
    rc, out, _ = run_cli(["equilibrium", "--eps-a", "1.0",
                          "--lambda-heat", "0.0"], capsys)
    assert rc == 0
    vals = {line.split(" = ")[0]: float(line.split(" = ")[1].split()[0])
            for line in out.splitlines()}
    assert vals["T_a0"] == pytest.approx(278.3, abs=0.1)
    assert vals["T_o0"] == pytest.approx(308.0, abs=0.1)


def test_cli_constants_greppable(capsys):
    rc, out, _ = run_cli(["constants", "--resolution", "4x4/4x4"], capsys)
    assert rc == 0
    picked = {}
    for line in out.splitlines():
        if " = " in line and "#" in line:
            name, rest = line.split(" = ", 1)
            try:
                picked[name.strip()] = float(rest.split("#")[0])
            except ValueError:
                pass
    assert picked["kappa"] == pytest.approx(15.0)
    assert picked["mu*gamma_a"] == pytest.approx(9.0)
    assert picked["mu*gamma_o"] == pytest.approx(500.0)
    assert 1e-19 <= picked["Lambda_0"] <= 1e-17
    assert 18.0 <= picked["shortwave_slope_bound"] <= 19.0
    assert picked["shortwave_slope_bound"] < picked["lambda_heat"]
    assert "mode_count_bound" in out


def test_cli_runs_are_byte_identical(tmp_path, capsys):
    args = ["simulate", "--t-end", "19380", "--dt", "193.8",
            "--output-every", "20", "--resolution", "4x4/4x4",
            "--seed", "6"]
    run_cli(args + ["--out", str(tmp_path / "a")], capsys)
    run_cli(args + ["--out", str(tmp_path / "b")], capsys)
    for name in ("series.ndjson", "checkpoint.txt", "config.cfg"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())


def test_cli_converge_reads_config_section(tmp_path, capsys):
    cfgfile = tmp_path / "conv.cfg"
    cfgfile.write_text("[converge]\n"
                       "ladder = 2x2/2x2,3x3/3x3,4x4/4x4\n"
                       "horizon = 9690.0\n"
                       "dt = 193.8\n"
                       "seed = 2\n")
    rc, out, _ = run_cli(["converge", "--params", str(cfgfile)], capsys)
    assert rc == 0
    assert out.count("distance") == 2
    assert "reference 4x4/4x4" in out
    assert "monotone = true" in out


def test_cli_validate_passes(capsys):
    rc, out, _ = run_cli(["validate", "--resolution", "4x4/4x4"], capsys)
    assert rc == 0
    assert out.count("ok  ") == 3 and "FAIL" not in out
