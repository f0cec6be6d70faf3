import json

import pytest

from causal_reanalysis import cli
from causal_reanalysis.bayes.hmc import SamplerError

SAMPLING = ["--chains", "2", "--warmup", "300", "--samples", "300"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Simulated data plus one full fit/marginal/ppc/report run."""
    root = tmp_path_factory.mktemp("cli")
    data, run = root / "data", root / "run"
    assert cli.main(["simulate", "--seed", "5", "--out", str(data)]) == 0
    assert cli.main(["fit", "--data", str(data), "--seed", "7", "--out", str(run), *SAMPLING]) == 0
    assert cli.main(["marginal", "--predictor", "passive", "--out", str(run)]) == 0
    assert cli.main(["ppc", "--out", str(run), "--format", "json"]) == 0
    assert cli.main(["report", "--out", str(run)]) == 0
    return data, run


def test_reproduce_json_to_stdout(pipeline, capsys):
    data, _ = pipeline
    capsys.readouterr()
    assert cli.main(["reproduce", "--data", str(data), "--format", "json", "--out", ""]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["element"] for r in rows] == ["Actors", "Objects", "Associations"]


def test_reproduce_strict_paper_shape(pipeline):
    data, _ = pipeline
    assert cli.main(["reproduce", "--data", str(data), "--strict-paper", "--out", ""]) == 0


def test_missing_input_names_the_file(tmp_path, pipeline, capsys):
    data, _ = pipeline
    assert cli.main(["reproduce", "--data", str(tmp_path / "nowhere")]) == 2
    assert "nowhere" in capsys.readouterr().err
    partial = tmp_path / "partial"
    partial.mkdir()
    (partial / "participants.csv").write_bytes((data / "participants.csv").read_bytes())
    assert cli.main(["reproduce", "--data", str(partial)]) == 2
    assert "requirements.csv" in capsys.readouterr().err


def test_identify_fixture_and_files(tmp_path, capsys):
    assert cli.main(["identify", "--format", "json", "--out", str(tmp_path)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert set(result["reduced_dag"]["nodes"]) == {
        "passive_voice", "exp_re_ind", "exp_re_acad", "missing_actors", "missing_objects", "missing_associations",
    }
    assert (tmp_path / "reduced_dag.dot").read_text().startswith("digraph reduced")
    assert json.loads((tmp_path / "identification.json").read_text()) == result


def test_identify_two_node_dag(tmp_path, capsys):
    (tmp_path / "g.dot").write_text("digraph { x -> y; }")
    (tmp_path / "g.json").write_text('{"version": 1, "exposure": "x", "outcomes": ["y"]}')
    assert cli.main(["identify", "--dag", str(tmp_path / "g.dot"), "--format", "json", "--out", ""]) == 0
    assert json.loads(capsys.readouterr().out)["outcomes"]["y"]["minimal_backdoor_sets"] == [[]]


def test_identify_rejects_cycle(tmp_path, capsys):
    (tmp_path / "c.dot").write_text("digraph { x -> y; y -> z; z -> x; }")
    (tmp_path / "c.json").write_text('{"version": 1, "exposure": "x", "outcomes": ["y"]}')
    assert cli.main(["identify", "--dag", str(tmp_path / "c.dot")]) == 2
    assert "cycle" in capsys.readouterr().err


def test_downstream_before_fit_is_order_error(tmp_path, capsys):
    for cmd in ("marginal", "ppc", "report"):
        assert cli.main([cmd, "--out", str(tmp_path)]) == 3
        assert "causal-reanalysis fit" in capsys.readouterr().err


def test_fit_requires_seed(pipeline, tmp_path, monkeypatch, capsys):
    data, _ = pipeline
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    assert cli.main(["fit", "--data", str(data), "--out", str(tmp_path), *SAMPLING]) == 2
    assert cli.SEED_ENV in capsys.readouterr().err


def test_seed_from_environment(pipeline, tmp_path, monkeypatch):
    data, _ = pipeline
    monkeypatch.setenv(cli.SEED_ENV, "11")
    argv = ["fit", "--data", str(data), "--response", "actors", "--out", str(tmp_path),
            "--chains", "2", "--warmup", "100", "--samples", "100"]
    assert cli.main(argv) == 0
    assert json.loads((tmp_path / "fits" / "actors" / "fit.json").read_text())["seed"] == 11


def test_fit_is_byte_identical(pipeline, tmp_path):
    data, _ = pipeline
    for name in ("a", "b"):
        argv = ["fit", "--data", str(data), "--response", "associations", "--seed", "7",
                "--chains", "2", "--warmup", "100", "--samples", "100", "--out", str(tmp_path / name)]
        assert cli.main(argv) == 0
    for f in ("draws.csv", "fit.json"):
        a = (tmp_path / "a" / "fits" / "associations" / f).read_bytes()
        assert a == (tmp_path / "b" / "fits" / "associations" / f).read_bytes()


def test_sampler_failure_exit_code(pipeline, tmp_path, monkeypatch):
    data, _ = pipeline

    def boom(*args, **kwargs):
        raise SamplerError("no finite log density")

    monkeypatch.setattr(cli, "hmc_sample", boom)
    assert cli.main(["fit", "--data", str(data), "--seed", "1", "--out", str(tmp_path)]) == 4


def test_marginal_artifacts(pipeline):
    _, run = pipeline
    for response in ("actors", "objects", "associations"):
        obj = json.loads((run / "marginals" / f"{response}_passive.json").read_text())
        assert obj["marginal"]["levels"] == [0.0, 1.0]
        assert (run / "marginals" / f"{response}_passive.svg").is_file()


def test_marginal_predictor_errors(pipeline, capsys):
    _, run = pipeline
    assert cli.main(["marginal", "--out", str(run), "--response", "actors", "--predictor", "missing_actors"]) == 2
    assert cli.main(["marginal", "--out", str(run), "--predictor", "passive", "--levels", "0,2"]) == 2
    assert cli.main(["marginal", "--out", str(run), "--predictor", "passive", "--levels", "zero"]) == 2


def test_ppc_self_consistency(pipeline):
    _, run = pipeline
    for response in ("actors", "objects", "associations"):
        checks = json.loads((run / "ppc" / f"{response}.json").read_text())["posterior"]
        for stat, c in checks.items():
            assert 0.05 < c["fraction_exceeding"] < 0.95, (response, stat)


def test_report_and_manifest(pipeline):
    data, run = pipeline
    md = (run / "report.md").read_text()
    assert "## Frequentist reproduction" in md and "## Posterior predictive checks" in md
    assert len(list(run.glob("marginal_passive_*.svg"))) == 3
    assert (run / "marginal_mediators_associations.svg").is_file()
    results = json.loads((run / "results.json").read_text())
    assert set(results["fits"]) == {"actors", "objects", "associations"}
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["tool_version"]
    assert set(manifest["stages"]) >= {"fit", "marginal", "ppc", "report"}
    assert set(manifest["stages"]["fit"]["inputs"]) == {"data/participants.csv", "data/requirements.csv", "data/observations.csv"}
    assert "time" not in json.dumps(manifest).lower()


def test_convert_long_table(pipeline, tmp_path):
    import csv

    data, _ = pipeline
    read = lambda n: list(csv.DictReader((data / n).open()))  # noqa: E731
    ps = {r["participant_id"]: r for r in read("participants.csv")}
    rs = {r["requirement_id"]: r for r in read("requirements.csv")}
    rows = [{**ps[o["participant_id"]], **rs[o["requirement_id"]], **o} for o in read("observations.csv")]
    with (tmp_path / "long.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    assert cli.main(["convert", str(tmp_path / "long.csv"), "--out", str(tmp_path / "canon")]) == 0
    for name in ("participants.csv", "requirements.csv", "observations.csv"):
        assert (tmp_path / "canon" / name).read_bytes() == (data / name).read_bytes()
