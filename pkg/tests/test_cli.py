import json
import subprocess
import sys

import pytest

from gnas.cli import main
from gnas.oracle import load_benchmark, query, rank

from .conftest import PLANTED_TOP

PLANTED = "GCN,GAT,GCN,Skip-Connection"


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench") / "cora.gnasbench.json"
    assert main(["benchmark-gen", "--seed", "0", "--planted", PLANTED, "--dataset", "Cora", "--out", str(out)]) == 0
    return out


@pytest.fixture
def fixture_toml(tmp_path, bench):
    p = tmp_path / "fixture.toml"
    p.write_text(
        '[experiment]\ndatasets = ["Cora"]\nrepetitions = 2\n'
        f'[benchmark.paths]\nCora = "{bench}"\n'
    )
    return p


def test_benchmark_gen_rank1_is_planted(bench):
    table = load_benchmark(bench)
    assert table.rank_index[0] == PLANTED_TOP


def test_rank_matches_linear_scan(bench, capsys):
    key = "space-1|GCN,GCN,GCN,GCN"
    assert main(["rank", "--benchmark", str(bench), "--arch", key]) == 0
    table = load_benchmark(bench)
    mine = query(table, key).val_accuracy
    expected = 1 + sum(r.val_accuracy > mine for r in table.records.values())
    assert capsys.readouterr().out.strip() == f"({mine:.2f}, {expected})"


def test_rank_unknown_arch(bench, capsys):
    assert main(["rank", "--benchmark", str(bench), "--arch", "space-2|GCN,GCN,GCN,GCN"]) == 2
    assert "not in benchmark" in capsys.readouterr().err


def test_search_greedy_prints_rank1(fixture_toml, tmp_path, capsys):
    out = tmp_path / "r"
    code = main(["search", "--config", str(fixture_toml), "--strategy", "gpt4gnas",
                 "--backend", "mock-greedy", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert f"m* = {PLANTED_TOP}" in text and "val 82.93 (rank 1)" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["llm"]["backend"] == "mock-greedy"
    assert main(["verify", str(out)]) == 0


def test_search_stdout_deterministic(capsys):
    outs = []
    for _ in range(2):
        assert main(["search", "--strategy", "random", "--seed", "7"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] and "seed" in outs[0]


def test_missing_benchmark_exit2(tmp_path, capsys):
    missing = tmp_path / "gone.json"
    assert main(["search", "--benchmark", f"Cora={missing}"]) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_config_exit2(tmp_path, capsys):
    assert main(["search", "--config", str(tmp_path / "x.toml")]) == 2
    assert "x.toml" in capsys.readouterr().err


def test_http_requires_live(capsys):
    assert main(["search", "--backend", "http"]) == 2
    assert "--live" in capsys.readouterr().err


def test_failed_cell_exit1(tmp_path, capsys):
    script = tmp_path / "s.json"
    script.write_text("[]")
    code = main(["search", "--backend", "scripted", "--script", str(script), "--repetitions", "1",
                 "--out", str(tmp_path / "r")])
    assert code == 1
    assert "failed" in capsys.readouterr().err
    assert (tmp_path / "r" / "manifest.json").exists()


def test_verify_tampered_exit1(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["search", "--set", "benchmark.planted=" + PLANTED, "--out", str(out)]) == 0
    summary = out / "summary.md"
    summary.write_text(summary.read_text().replace("82.93 (1)", "83.93 (1)", 1))
    capsys.readouterr()
    assert main(["verify", str(out)]) == 1
    assert "83.93" in capsys.readouterr().err


def test_verify_not_a_report(tmp_path):
    assert main(["verify", str(tmp_path)]) == 2


def test_ablation_subcommand(tmp_path, capsys):
    assert main(["ablation", "--repetitions", "1", "--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    for label in ("GPT4GNAS", "¬Connections", "¬Operation", "¬Strategy"):
        assert label in out
    assert main(["verify", str(tmp_path / "a")]) == 0


def test_search_ablation_flag(capsys):
    assert main(["search", "--ablation", "no-strategy", "--repetitions", "1"]) == 0
    assert "gpt4gnas[no-strategy]" in capsys.readouterr().out


def test_bad_override_exit2(capsys):
    assert main(["search", "--set", "search.iterations=many"]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gnas.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "benchmark-gen" in proc.stdout
