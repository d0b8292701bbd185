import csv
import json

import numpy as np
import pytest

from riskshare.cli import COMMANDS, PipelineConfig, config_hash, main, run_pipeline
from riskshare.errors import ConfigError

SIM = """\
[simulate]
output = sim.csv
n_treated = 3
n_donors = 6
treatment_effect = 0 0 0 -0.2 0.2
[data]
format = wide_csv
"""

RUN = """\
[data]
actual = {actual}
format = wide_csv
[groups]
treated = T01 T02 T03
placebo = D01 D02
[inference]
n_perm = 5
seed = 3
[bias]
mode = placebo_full
"""


def _rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.reader(lines))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "sim.ini").write_text(SIM)
    assert main(["simulate", "--config", str(root / "sim.ini"), "--out", str(root)]) == 0
    (root / "run.ini").write_text(RUN.format(actual=root / "sim.csv"))
    return root


def _run(workspace, command, out, *extra):
    return main([command, "--config", str(workspace / "run.ini"), "--out", str(out), *extra])


def test_simulate_match_did_closes_pre_gap(workspace):
    out = workspace / "chain"
    assert _run(workspace, "match", out) == 0
    assert _run(workspace, "did", out) == 0
    rows = _rows(out / "did.csv")
    beta2 = [r for r in rows if r[0] == "Pre/Actual" and r[1] == "estimate"]
    assert beta2, rows[:6]
    assert np.max(np.abs(np.array(beta2[0][2:], dtype=float))) < 1e-4
    manifest = json.loads((out / "manifest_did.json").read_text())
    assert manifest["outputs"] == ["did.csv"] and "numpy" in manifest["versions"]


def test_full_equals_match_then_did(workspace):
    chain, full = workspace / "chain2", workspace / "full"
    for c in ("match", "did"):
        assert _run(workspace, c, chain) == 0
    assert _run(workspace, "full", full) == 0
    for name in ("synthetic.csv", "did.csv", "weights.json"):
        assert (chain / name).read_bytes() == (full / name).read_bytes()


def test_byte_reproducible_and_hash_embedded(workspace):
    a, b = workspace / "rep_a", workspace / "rep_b"
    for out in (a, b):
        assert _run(workspace, "match", out) == 0
        assert _run(workspace, "permute", out, "--format", "json") == 0
    digest = config_hash((workspace / "run.ini").read_text(), None)
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name
        if f.name.startswith("manifest"):
            assert json.loads(f.read_text())["config_sha256"] == digest
        else:
            assert digest in f.read_text(), f.name


def test_seed_override_changes_hash(workspace):
    text = (workspace / "run.ini").read_text()
    assert config_hash(text, None) != config_hash(text, 9)
    assert PipelineConfig.from_ini(text, seed=9).seed == 9
    assert PipelineConfig.from_ini(text).seed == 3


@pytest.mark.parametrize("command", [c for c in COMMANDS if c not in ("simulate", "full", "match")])
def test_every_command_runs(workspace, command):
    out = workspace / "all"
    if not (out / "synthetic.csv").exists():
        assert _run(workspace, "match", out) == 0
    assert _run(workspace, command, out) == 0
    assert (out / f"manifest_{command}.json").exists()


def test_missing_treated_unit_is_config_error(workspace, tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(RUN.format(actual=workspace / "sim.csv").replace("T03", "T99"))
    assert main(["match", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "T99" in capsys.readouterr().err


def test_other_config_errors(workspace, tmp_path):
    assert main(["did", "--config", str(tmp_path / "nope.ini")]) == 2
    assert run_pipeline("[did]\nfe_mode = wrong\n", "did", tmp_path) == 2
    assert run_pipeline("[bogus]\n", "did", tmp_path) == 2
    assert run_pipeline("[groups]\ntreated = A\ndonors = A\n", "did", tmp_path) == 2
    with pytest.raises(ConfigError):
        PipelineConfig.from_ini("[inference]\nn_perm = 0\n")


def test_estimation_failure_exits_one(workspace, tmp_path):
    text = RUN.format(actual=workspace / "sim.csv") + "[sample]\nfirst_year = 1997\n[did]\nvcov = clustered\n"
    (tmp_path / "short.ini").write_text(text)
    out = tmp_path / "o"
    assert main(["match", "--config", str(tmp_path / "short.ini"), "--out", str(out)]) == 0
    assert main(["trend-test", "--config", str(tmp_path / "short.ini"), "--out", str(out)]) == 1


def test_decompose_no_smoothing_fixture(tmp_path):
    (tmp_path / "sim.ini").write_text("[simulate]\noutput = flat.csv\nn_treated = 2\nn_donors = 4\n"
                                      "shares = 0 0 0 0 1\nchannel_noise_sd = 0\nweights = none\n")
    assert main(["simulate", "--config", str(tmp_path / "sim.ini"), "--out", str(tmp_path)]) == 0
    (tmp_path / "d.ini").write_text(f"[data]\nactual = {tmp_path / 'flat.csv'}\n")
    assert main(["decompose", "--config", str(tmp_path / "d.ini"), "--out", str(tmp_path / "o")]) == 0
    est = next(r for r in _rows(tmp_path / "o" / "decomposition.csv") if r[0] == "estimate")
    assert np.allclose(np.array(est[1:], dtype=float), [0, 0, 0, 0, 1], atol=1e-9)
