import json
import os

import pytest

from kshopf import cli
from kshopf.config import ConfigError, RunConfig, apply_overrides, from_mapping, load

SMALL = ["--M", "4", "--N", "8"]


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.K == (10, 16) and cfg.mode == "parameter_in_a"


def test_sections_and_top_level_keys():
    cfg = from_mapping({"truncation": {"M": 6, "N": 9}, "R": 1e-5, "run": {"threads": 2}})
    assert (cfg.M, cfg.N, cfg.R, cfg.threads) == (6, 9, 1e-5, 2)


@pytest.mark.parametrize("data", [
    {"truncation": {"M": 0}},
    {"truncation": {"nu1": 0.9}},
    {"validation": {"R": -1.0}},
    {"continuation": {"mode": "sideways"}},
    {"continuation": {"a_from": 0.1, "a_to": 0.0}},
    {"continuation": {"a_step": 0.0}},
    {"truncation": {"M": 2.5}},
    {"truncation": {"M": True}},
    {"bogus": {"x": 1}},
    {"truncation": {"bogus": 1}},
    {"bogus": 1},
    {"validation": {"search_K": [[0, 4]]}},
    {"validation": {"search": "yes"}},
])
def test_bad_mappings_rejected(data):
    with pytest.raises(ConfigError):
        from_mapping(data)


def test_load_reports_syntax_and_missing(tmp_path):
    with pytest.raises(ConfigError):
        load(_write(tmp_path, "[truncation\nM = 3"))
    with pytest.raises(ConfigError):
        load(str(tmp_path / "missing.toml"))


def test_desk_file_loads():
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    cfg = load(os.path.join(here, "desk.toml"))
    assert cfg.K == (10, 16) and cfg.R == 1e-4


def test_overrides_skip_none_and_revalidate():
    cfg = apply_overrides(RunConfig(), {"M": 5, "N": None})
    assert cfg.K == (5, 16)
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"R": 0.0})


def test_malformed_config_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["all", "--config", _write(tmp_path, "[truncation]\nM = -3\n"), "--out", str(out)])
    assert code == 2 and not out.exists()
    assert "config error" in capsys.readouterr().err


def test_bad_flag_value_exits_2(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["validate", "--R", "-1", "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_anchor_dir_exits_2(tmp_path):
    assert cli.main(["validate", "--anchors", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


def test_dry_run_prints_plan(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["all", "--dry-run", "--out", str(out), "--M", "12"]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["config"]["M"] == 12 and plan["planned_segments"] == 5
    assert plan["candidates"][0] == [[12, 16], [1.02, 1.02]]
    assert not out.exists()


def test_candidates_order_and_no_search():
    cfg = RunConfig()
    c = list(cli.candidates(cfg))
    assert c[0] == ((10, 16), (1.02, 1.02))
    assert len(set(c)) == len(c)
    cfg.search = False
    assert list(cli.candidates(cfg)) == [((10, 16), (1.02, 1.02))]


def test_chain_ok_rules():
    from kshopf.validator import Certificate

    def cert(v, h=False):
        c = Certificate("segment", 0, 0, 0, 0, 1)
        c.validated, c.hopf_crossing = v, h
        return c
    good = [cert(True), cert(True), cert(True, True), cert(True), cert(True)]
    assert cli.chain_ok(good)
    assert not cli.chain_ok(good[:4])
    assert not cli.chain_ok(good[:4] + [cert(False)])
    assert not cli.chain_ok([cert(True, True)] + good)


def test_steady_verb(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["steady", "--N", "8", "--out", str(out)]) == 0
    lines = (out / "steady.csv").read_text().splitlines()
    assert lines[0] == "lambda2,norm_y,abs_y2" and len(lines) == 31


def test_hopf_seed_verb(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["hopf-seed", *SMALL, "--out", str(out)]) == 0
    d = json.loads((out / "hopf_seed.json").read_text())
    assert d


@pytest.fixture(scope="module")
def continued(tmp_path_factory):
    out = tmp_path_factory.mktemp("cont")
    assert cli.main(["continue", *SMALL, "--out", str(out)]) == 0
    return out


def test_continue_verb_writes_branch(continued):
    assert len((continued / "branch.csv").read_text().splitlines()) == 11
    assert len(os.listdir(continued / "anchors")) == 6
    s = json.loads((continued / "summary.json").read_text())
    assert s["segments"] == 5 and s["validated"] == 0


def test_validate_verb_from_anchors(continued, tmp_path):
    out = tmp_path / "v"
    code = cli.main(["validate", *SMALL, "--anchors", str(continued / "anchors"), "--out", str(out)])
    s = json.loads((out / "summary.json").read_text())
    assert s["segments"] == 5
    assert len(os.listdir(out / "certificates")) == 5
    assert code == (0 if s["validated"] == 5 else 1)
    for name in sorted(os.listdir(out / "certificates")):
        c = json.loads((out / "certificates" / name).read_text())
        assert {"Y", "Z0", "Z1", "Z2", "r_star", "validated", "stage_failures"} <= set(c)
