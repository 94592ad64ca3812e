import csv
import json

import numpy as np
import pytest

from qcard import cli, synthetic, trainer
from qcard.errors import NumericError
from qcard.workload import read_digested, write_digested

EXAMPLE = ("SELECT * FROM table1, table2, table3 WHERE table1.pKey=table2.key1 "
           "AND table1.pKey=table3.key1 AND table2.colA > 100 AND table3.colB = 10")
SMALL = ["--qubits", "4", "--layers", "2", "--episodes", "5", "--workers", "1"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def example_dir(tmp_path, queries=(EXAMPLE,)):
    d = tmp_path / "data"
    d.mkdir()
    (d / "table1.csv").write_text("pKey\n" + "".join(f"{i}\n" for i in range(4)))
    (d / "table2.csv").write_text("key1,colA\n" + "".join(f"{i % 4},{i * 30}\n" for i in range(10)))
    (d / "table3.csv").write_text("key1,colB\n" + "".join(f"{i % 4},{i % 5 * 5}\n" for i in range(8)))
    (d / "queries.sql").write_text("\n".join(queries) + "\n")
    (d / "truths.csv").write_text("line,true_card,classical_card\n"
                                  + "".join(f"{n},{10 * n},{7 * n}\n" for n in range(1, len(queries) + 1)))
    return d


@pytest.fixture
def biased(tmp_path):
    return write_digested(tmp_path / "biased.jsonl", synthetic.biased_workload(n_queries=8, table_count=4,
                                                                               max_tables=3, seed=1))


def metrics_footer(path):
    rows = list(csv.reader(path.open()))
    return dict(zip(rows[0], rows[-1]))


# help and parsing


def test_help_lists_flags_with_defaults(capsys):
    code, text, _ = run(capsys, "train", "--help")
    assert code == 0
    for flag in ("--qubits", "--layers", "--episodes", "--lr", "--lr-decay", "--seed", "--split", "--d",
                 "--epsilon", "--base", "--width", "--tie-threshold-scalars", "--mode", "--layer", "--workers"):
        assert flag in text
    assert "(default: 6)" in text and "(default: 16)" in text and "(default: 8000)" in text


def test_bad_usage_exits_one(capsys):
    assert run(capsys, "train")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "train", "--workload", "x", "--layer", "softmax")[0] == 1


# ingest


def test_ingest_example_query(tmp_path, capsys):
    d = example_dir(tmp_path)
    code, out, _ = run(capsys, "ingest", "--data", d, "--out", tmp_path / "w.jsonl")
    assert code == 0
    wl = read_digested(tmp_path / "w.jsonl")
    (q,) = wl.queries
    # colA = 0, 30, ..., 270 has six of ten rows above 100; colB cycles 0, 5, 10, 15, 20 and hits 10 twice in 8
    assert q.slots == ((1, 1.0), (2, 0.6), (3, 0.25))
    assert (q.true_cardinality, q.classical_estimate) == (10, 7)
    assert "q1: table1(t=1, s=1)" in out


def test_ingest_partial_writes_rejects(tmp_path, capsys):
    d = example_dir(tmp_path, (EXAMPLE, "SELECT * FROM table1 WHERE pKey > 1 OR pKey < 0"))
    code, _, err = run(capsys, "ingest", "--data", d)
    assert code == 2
    assert "partial success" in err
    rows = list(csv.reader((d / "rejects.csv").open()))
    assert rows[0] == ["query_id", "reason"] and rows[1][0] == "q2" and "OR" in rows[1][1]
    assert len(read_digested(d / "workload.jsonl").queries) == 1


def test_ingest_empty_queries(tmp_path, capsys):
    d = example_dir(tmp_path, ())
    code, _, err = run(capsys, "ingest", "--data", d)
    assert code == 2
    assert "no queries" in err


# train and eval


def test_train_then_eval(tmp_path, capsys, biased):
    out = tmp_path / "run"
    code, text, _ = run(capsys, "train", "--workload", biased, "--mode", "correct", "--layer", "threshold",
                        "--d", "0.05", *SMALL, "--out", out)
    assert code == 0
    assert "improvement factor" in text
    for name in ("checkpoint.json", "metrics.csv", "loss_curve.csv"):
        assert (out / name).exists()
    train_footer = metrics_footer(out / "metrics.csv")
    assert float(train_footer["improvement_factor"]) > 0
    assert len((out / "loss_curve.csv").read_text().strip().split("\n")) == 6

    code, _, _ = run(capsys, "eval", "--workload", biased, "--checkpoint", out / "checkpoint.json",
                     "--out", tmp_path / "ev")
    assert code == 0
    assert metrics_footer(tmp_path / "ev" / "metrics.csv") == train_footer


def test_train_is_deterministic(tmp_path, capsys, biased):
    for name in ("a", "b"):
        assert run(capsys, "train", "--workload", biased, "--layer", "rational-log", *SMALL,
                   "--out", tmp_path / name)[0] == 0
    assert (tmp_path / "a" / "checkpoint.json").read_bytes() == (tmp_path / "b" / "checkpoint.json").read_bytes()
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_zero_episodes_checkpoint_is_initialization(tmp_path, capsys, biased):
    argv = ["train", "--workload", biased, "--layer", "place-value", "--width", "8", "--qubits", "4",
            "--layers", "3", "--episodes", "0", "--seed", "7", "--out", tmp_path / "z"]
    assert run(capsys, *argv)[0] == 0
    saved = trainer.load_checkpoint(tmp_path / "z" / "checkpoint.json")
    fresh = trainer.init_model(saved.config)
    np.testing.assert_array_equal(saved.theta, fresh.theta)
    np.testing.assert_array_equal(saved.layer.scalars, [2.0])


def test_eval_without_baseline_omits_factor(tmp_path, capsys):
    wl = synthetic.constant_workload(n_queries=5, table_count=4, max_tables=3, seed=0)
    path = write_digested(tmp_path / "c.jsonl", wl)
    assert run(capsys, "train", "--workload", path, "--layer", "rational-log", *SMALL, "--out", tmp_path / "r")[0] == 0
    header = (tmp_path / "r" / "metrics.csv").read_text().split("\n")[0]
    assert header == "query_id,predicted_log_card,true_log_card,abs_log_error"


def test_eval_mismatches_name_both_values(tmp_path, capsys, biased):
    run(capsys, "train", "--workload", biased, "--layer", "linear", *SMALL, "--out", tmp_path / "r")
    ck = tmp_path / "r" / "checkpoint.json"
    wide_wl = synthetic.biased_workload(n_queries=4, table_count=4, max_tables=4, seed=2)
    assert wide_wl.max_slots > 2
    wide = write_digested(tmp_path / "wide.jsonl", wide_wl)
    narrow = trainer.load_checkpoint(ck)
    data = json.loads(ck.read_text())
    data["encoding"]["n_qubits"] = data["ansatz"]["n_qubits"] = 2
    data["theta"] = data["theta"][: 2 * 2 * narrow.config.ansatz.n_layers]
    small_ck = tmp_path / "small.json"
    small_ck.write_text(json.dumps(data))
    code, _, err = run(capsys, "eval", "--workload", wide, "--checkpoint", small_ck)
    assert code == 2
    assert "width" in err and "2 qubits" in err and f"{wide_wl.max_slots} slots" in err

    other = write_digested(tmp_path / "other.jsonl", synthetic.biased_workload(n_queries=4, table_count=5, seed=3))
    code, _, err = run(capsys, "eval", "--workload", other, "--checkpoint", ck)
    assert code == 2
    assert "5 tables" in err and "up to 4" in err


def test_correct_mode_needs_classical(tmp_path, capsys):
    path = write_digested(tmp_path / "c.jsonl", synthetic.constant_workload(n_queries=3, table_count=4, seed=0))
    code, _, err = run(capsys, "train", "--workload", path, "--mode", "correct", *SMALL)
    assert code == 2
    assert "classical" in err


def test_numeric_failure_exit_code(tmp_path, capsys, biased, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericError("loss is nan", episode=4)

    monkeypatch.setattr(cli, "train", boom)
    code, _, err = run(capsys, "train", "--workload", biased, *SMALL, "--out", tmp_path / "n")
    assert code == 3
    assert "episode 4" in err


def test_config_file_and_flag_precedence(tmp_path, capsys, biased):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# tiny run\nworkload = {biased}\nqubits = 4\nlayers = 2\nepisodes = 3\n"
                   "layer = threshold-ratio\ntie-threshold-scalars = true\n")
    out = tmp_path / "cfg"
    assert run(capsys, "--config", cfg, "train", "--episodes", "2", "--out", out)[0] == 0
    data = json.loads((out / "checkpoint.json").read_text())
    assert data["episodes_trained"] == 2
    assert data["layer"]["kind"] == "ThresholdRatio" and data["layer"]["tie_scalars"] is True
    assert data["ansatz"] == {"n_layers": 2, "n_qubits": 4}

    cfg.write_text("nonsense = 1\n")
    assert run(capsys, "--config", cfg, "train", "--workload", biased)[0] == 1


# hist and fixture


def test_hist_default_panels(tmp_path, capsys):
    code, out, _ = run(capsys, "hist", "--samples", "200", "--out", tmp_path / "h")
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "h").iterdir())
    assert len(files) == 16
    assert "hist_PlaceValueNeg8.svg" in files and "hist_Threshold.csv" in files


def test_hist_reproducible_and_single_sample(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "hist", "--panels", "Threshold", "PlaceValue8", "--samples", "300", "--seed", "4",
            "--out", tmp_path / name)
    for f in ("hist_Threshold.csv", "hist_PlaceValue8.csv", "hist_PlaceValue8.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    run(capsys, "hist", "--panels", "Rational", "--samples", "1", "--out", tmp_path / "one")
    counts = [int(r.split(",")[2]) for r in (tmp_path / "one" / "hist_Rational.csv").read_text().split("\n")[1:] if r]
    assert sum(c > 0 for c in counts) == 1


def test_hist_invalid_width(tmp_path, capsys):
    code, _, err = run(capsys, "hist", "--panels", "PlaceValue8", "--qubits", "2", "--out", tmp_path / "x")
    assert code == 1
    assert "PlaceValue8" in err


def test_fixture(tmp_path, capsys):
    out = tmp_path / "f.jsonl"
    assert run(capsys, "fixture", "--kind", "job-light-shaped", "--out", out)[0] == 0
    assert len(read_digested(out).queries) == 70
