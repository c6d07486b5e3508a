import json

from probsched.cli import main


def synth(tmp_path, *extra):
    assert main(["synth", "--out", str(tmp_path), "--jobs", "400", *extra]) == 0
    return tmp_path / "synthetic.acct"


def test_synth_writes_header_and_records(tmp_path):
    path = synth(tmp_path, "--seed", "4")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# generator=") and len(lines) == 401
    again = synth(tmp_path / "again", "--seed", "4")
    assert again.read_bytes() == path.read_bytes()


def test_ingest_prints_counters(tmp_path, capsys):
    path = synth(tmp_path)
    assert main(["ingest", str(path), "--out", str(tmp_path / "o")]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert list(stats) == [str(path)]


def test_flags_override_config_file(tmp_path):
    path = synth(tmp_path)
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"confidence": 0.7, "seed": 9, "min_class_size": 5,
                                "inputs": [str(path)]}))
    out = tmp_path / "o"
    assert main(["ingest", "--config", str(conf), "--out", str(out), "--seed", "2"]) == 0
    written = json.loads((out / "config.json").read_text())
    assert (written["seed"], written["confidence"], written["min_class_size"]) == (2, 0.7, 5)


def test_report_subcommand(tmp_path):
    path = synth(tmp_path)
    out = tmp_path / "o"
    assert main(["report", str(path), "--out", str(out), "--class-key", "group"]) == 0
    assert (out / "duration_cdf.csv").is_file() and (out / "class_summary.csv").is_file()
    assert not (out / "sim_report.json").exists()


def test_error_exit_codes(tmp_path):
    assert main(["ingest", str(tmp_path / "absent"), "--out", str(tmp_path)]) == 4
    assert main(["ingest", "--config", str(tmp_path / "absent.json")]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["ingest", "--config", str(bad)]) == 2
    assert main(["ingest", "x.acct", "--confidence", "1.5"]) == 2
    assert main(["ingest", "x.acct", "--class-key", "colour"]) == 2
    junk = tmp_path / "junk.acct"
    junk.write_text("junk\n" * 10)
    assert main(["ingest", str(junk), "--out", str(tmp_path / "o")]) == 3
