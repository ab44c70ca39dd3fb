import csv
import io
import json
from fractions import Fraction

import pytest

from ifsketch.cli import main
from ifsketch.dataset import read_db
from ifsketch.errors import ParamError
from ifsketch.experiment import (
    CSV_HEADER,
    ExperimentConfig,
    TrialRecord,
    parse_fraction,
    read_jsonl,
    run_experiment,
    run_trial,
    summarize,
    write_csv,
    write_jsonl,
)
from ifsketch.manifest import read_manifest


def strip_ms(text):
    return [row[:-1] for row in csv.reader(io.StringIO(text))]


class TestParseFraction:
    @pytest.mark.parametrize("text,value", [("1/4", Fraction(1, 4)), ("1", Fraction(1)), ("2/8", Fraction(1, 4))])
    def test_ok(self, text, value):
        assert parse_fraction(text) == value

    @pytest.mark.parametrize("text", ["0.25", "1/0", "-1/4", "a/b", "1e-2", ""])
    def test_rejected(self, text):
        with pytest.raises(ParamError):
            parse_fraction(text)


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig(64, Fraction(1, 4))
        assert c.sketch_epsilon == Fraction(1, 32)
        assert (c.K, c.m) == (4, 8)
        assert c.block_rows == 200  # ceil(48 ln 64)

    def test_n_divides(self):
        assert ExperimentConfig(64, Fraction(1, 4), n=40).block_rows == 10
        with pytest.raises(ParamError):
            ExperimentConfig(64, Fraction(1, 4), n=42)

    @pytest.mark.parametrize("kwargs", [
        dict(d=15, epsilon=Fraction(1, 4)),
        dict(d=64, epsilon=Fraction(1, 4), trials=0),
        dict(d=64, epsilon=Fraction(1, 4), sketch="bloom"),
        dict(d=64, epsilon=0.25),
        dict(d=64, epsilon=Fraction(1, 4), rows_per_block=4, n=16),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParamError):
            ExperimentConfig(**kwargs)


class TestTrials:
    def test_forced_gap_failure(self):
        rec = run_trial(ExperimentConfig(16, 1, n=2), 0)
        assert not rec.gap_pass and not rec.decode_ok
        assert rec.queries_issued == 0

    def test_exact_pipeline(self):
        records = run_experiment(ExperimentConfig(64, Fraction(1, 4), seed=2, trials=3))
        assert [r.seed for r in records] == [2, 3, 4]
        for r in records:
            assert r.decode_ok and r.gap_pass
            assert r.sketch_size_bits == 2016
            assert r.entropy_bits == pytest.approx(244.787, abs=1e-3)
            assert r.queries_issued == 1024

    def test_sampling_pipeline(self):
        records = run_experiment(ExperimentConfig(32, Fraction(1, 2), trials=2, sketch="sampling"))
        assert all(r.decode_ok for r in records if r.gap_pass)

    def test_parallel_matches_serial(self):
        c = ExperimentConfig(32, Fraction(1, 2), seed=5, trials=4)
        serial = run_experiment(c)
        parallel = run_experiment(ExperimentConfig(32, Fraction(1, 2), seed=5, trials=4, jobs=2))
        key = lambda r: (r.trial, r.seed, r.gap_pass, r.decode_ok, r.sketch_size_bits, r.queries_issued)
        assert list(map(key, serial)) == list(map(key, parallel))

    def test_summary(self):
        records = run_experiment(ExperimentConfig(16, 1, trials=2, n=2))
        s = summarize(records)
        assert s["trials"] == 2 and s["gap_pass_rate"] == 0.0 and s["conditional_recovery_rate"] == 0.0


class TestCsv:
    def test_empty(self):
        buf = io.StringIO()
        write_csv([], buf)
        assert buf.getvalue() == ",".join(CSV_HEADER) + "\n"

    def test_one_record(self):
        buf = io.StringIO()
        write_csv([TrialRecord(0, 7, True, False, 10, 1.5, 4, 0.002)], buf)
        lines = buf.getvalue().splitlines()
        assert lines == ["trial,seed,gap_pass,decode_ok,sketch_bits,entropy_bits,queries,ms",
                         "0,7,true,false,10,1.500000,4,2.000"]

    def test_jsonl_round_trip(self):
        records = run_experiment(ExperimentConfig(16, Fraction(1, 2), trials=2))
        buf = io.StringIO()
        write_jsonl(records, buf)
        buf.seek(0)
        assert read_jsonl(buf) == records


class TestCommands:
    def test_gen(self, tmp_path, capsys):
        assert main(["gen", "--d", "64", "--eps", "1/4", "--seed", "2", "--out", str(tmp_path)]) == 0
        man = read_manifest(tmp_path / "instance.manifest")
        assert man.K == 4 and sum(len(r) for r in man.perms) == 16
        db = read_db(tmp_path / "instance.ifdb")
        assert db.n == 4 * 200 == man.n

    def test_gen_rejects_bad_d(self, tmp_path, capsys):
        assert main(["gen", "--d", "15", "--eps", "1/4", "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_gen_rejects_float(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--d", "64", "--eps", "0.25", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_gen_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["gen", "--d", "4", "--eps", "1", "--seed", "0", "--out", str(tmp_path / sub)]) == 0
        for name in ("instance.ifdb", "instance.manifest"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.parametrize("kind", ["exact", "sampling"])
    def test_gen_sketch_decode(self, tmp_path, capsys, kind):
        out = str(tmp_path)
        assert main(["gen", "--d", "64", "--eps", "1/4", "--seed", "2", "--out", out]) == 0
        assert main(["sketch", "--out", out, "--sketch", kind]) == 0
        assert main(["decode", "--out", out]) == 0
        assert (tmp_path / "decoded.manifest").read_bytes() == (tmp_path / "instance.manifest").read_bytes()
        assert "recovered=yes" in capsys.readouterr().out

    def test_decode_failure_exit(self, tmp_path, capsys):
        out = str(tmp_path)
        assert main(["gen", "--d", "16", "--eps", "1", "--n", "1", "--out", out]) == 0
        assert main(["sketch", "--out", out]) == 0
        assert main(["decode", "--out", out]) == 1

    def test_missing_files(self, tmp_path, capsys):
        assert main(["sketch", "--out", str(tmp_path)]) == 3
        assert main(["report", "--out", str(tmp_path)]) == 3

    def test_corrupt_db(self, tmp_path):
        out = str(tmp_path)
        assert main(["gen", "--d", "8", "--eps", "1", "--out", out]) == 0
        (tmp_path / "instance.ifdb").write_bytes(b"garbage")
        assert main(["sketch", "--out", out]) == 3

    def test_experiment_and_report(self, tmp_path, capsys):
        out = tmp_path / "run"
        args = ["experiment", "--d", "32", "--eps", "1/2", "--trials", "5", "--seed", "3", "--out", str(out)]
        assert main(args) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["trials"] == 5 and summary["sketch_eps"] == "1/16"
        csv_text = (out / "report.csv").read_text()
        rows = list(csv.DictReader(io.StringIO(csv_text)))
        assert len(rows) == 5 and rows[0]["seed"] == "3"
        capsys.readouterr()
        assert main(["report", "--out", str(out)]) == 0
        assert strip_ms(capsys.readouterr().out) == strip_ms(csv_text)
        assert main(["report", "--out", str(out), "--csv", str(tmp_path / "r.csv")]) == 0
        assert (tmp_path / "r.csv").read_text() == csv_text

    def test_experiment_deterministic(self, tmp_path, capsys):
        texts = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["experiment", "--d", "16", "--eps", "1/2", "--trials", "3", "--out", str(out)]) == 0
            texts.append(strip_ms((out / "report.csv").read_text()))
        assert texts[0] == texts[1]

    def test_experiment_tiny_n(self, tmp_path, capsys):
        out = tmp_path / "tiny"
        assert main(["experiment", "--d", "16", "--eps", "1", "--n", "2", "--out", str(out)]) == 0
        row = next(csv.DictReader(open(out / "report.csv")))
        assert row["gap_pass"] == "false" and row["decode_ok"] == "false"
