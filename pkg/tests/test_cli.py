import json
import math

import pytest

from perturbqe.cli import main
from perturbqe.synthetic import build_planted_corpus

from conftest import planted_config


def write_config(tmp_path, corpus, outdir, cache_dir, **extra):
    config = planted_config(corpus, cache_dir, outdir)
    doc = config.to_dict()
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return path


@pytest.fixture()
def corpus(tmp_path):
    return build_planted_corpus(
        tmp_path / "corpus",
        n_sentences=10,
        sentence_length=6,
        n_replacements=6,
        influence_threshold=2,
        seed=3,
        rule_sizes=(1, 2, 3),
    )


class TestRunCommand:
    def test_run_matches_planted_gold(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        assert main(["run", "--config", str(config_path)]) == 0
        predictions = (tmp_path / "out" / "predictions.txt").read_text()
        gold = corpus.tags_path.read_text()
        assert predictions == gold
        metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
        assert metrics["mcc"] == pytest.approx(1.0)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["skipped_sentences"] == []

    def test_run_equals_stage_composition(self, tmp_path, corpus):
        run_cfg = write_config(tmp_path, corpus, tmp_path / "out-run", tmp_path / "c1")
        assert main(["run", "--config", str(run_cfg)]) == 0

        stage_cfg = tmp_path / "stage_config.json"
        doc = json.loads(run_cfg.read_text())
        doc["output_dir"] = str(tmp_path / "out-stages")
        doc["cache_dir"] = str(tmp_path / "c2")
        stage_cfg.write_text(json.dumps(doc), encoding="utf-8")
        for command in ("perturb", "translate", "align", "predict", "explain", "evaluate"):
            assert main([command, "--config", str(stage_cfg)]) == 0, command

        for name in ("predictions.txt", "explanations.jsonl", "report.html", "verdicts.jsonl"):
            run_bytes = (tmp_path / "out-run" / name).read_bytes()
            stage_bytes = (tmp_path / "out-stages" / name).read_bytes()
            assert run_bytes == stage_bytes, name

    def test_empty_dataset_succeeds(self, tmp_path, corpus):
        (tmp_path / "empty.src").write_text("", encoding="utf-8")
        (tmp_path / "empty.mt").write_text("", encoding="utf-8")
        config_path = write_config(
            tmp_path,
            corpus,
            tmp_path / "out",
            tmp_path / "cache",
            dataset={
                "src": str(tmp_path / "empty.src"),
                "mt": str(tmp_path / "empty.mt"),
                "tags": None,
                "mask": None,
                "pos": None,
            },
        )
        assert main(["run", "--config", str(config_path)]) == 0
        assert (tmp_path / "out" / "predictions.txt").read_text() == ""

    def test_hyperparameter_flag_overrides_config(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        # influence threshold high enough that nothing can be BAD
        assert main(
            ["run", "--config", str(config_path), "--influence-threshold", "99"]
        ) == 0
        predictions = (tmp_path / "out" / "predictions.txt").read_text()
        assert "BAD" not in predictions


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2

    def test_bad_backend_kind_is_config_error(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path,
            corpus,
            tmp_path / "out",
            tmp_path / "cache",
            backend={"kind": "quantum", "backend_id": "q"},
        )
        assert main(["run", "--config", str(config_path)]) == 2

    def test_missing_dataset_file_is_config_error(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path,
            corpus,
            tmp_path / "out",
            tmp_path / "cache",
            dataset={
                "src": str(tmp_path / "nope.src"),
                "mt": str(corpus.mt_path),
                "tags": None,
                "mask": None,
                "pos": None,
            },
        )
        assert main(["run", "--config", str(config_path)]) == 2

    def test_malformed_tags_is_data_error(self, tmp_path, corpus):
        bad_tags = tmp_path / "bad.tags"
        lines = corpus.tags_path.read_text().splitlines()
        lines[0] = "OK"
        bad_tags.write_text("\n".join(lines) + "\n", encoding="utf-8")
        doc = json.loads(
            write_config(tmp_path, corpus, tmp_path / "out", tmp_path / "cache").read_text()
        )
        doc["dataset"]["tags"] = str(bad_tags)
        config_path = tmp_path / "config2.json"
        config_path.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["run", "--config", str(config_path)]) == 4

    def test_backend_failure_is_backend_error(self, tmp_path, corpus):
        # drop one sentence's template so its variants cannot translate
        rules = json.loads(corpus.rules_path.read_text())
        rules["templates"] = rules["templates"][1:]
        broken = tmp_path / "broken_rules.json"
        broken.write_text(json.dumps(rules), encoding="utf-8")
        doc = json.loads(
            write_config(tmp_path, corpus, tmp_path / "out", tmp_path / "cache").read_text()
        )
        doc["backend"]["rules"] = str(broken)
        config_path = tmp_path / "config3.json"
        config_path.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["run", "--config", str(config_path)]) == 3

    def test_skip_errors_excludes_broken_sentence(self, tmp_path, corpus):
        rules = json.loads(corpus.rules_path.read_text())
        dropped = rules["templates"][0]["sentence_id"]
        rules["templates"] = rules["templates"][1:]
        broken = tmp_path / "broken_rules.json"
        broken.write_text(json.dumps(rules), encoding="utf-8")
        doc = json.loads(
            write_config(tmp_path, corpus, tmp_path / "out", tmp_path / "cache").read_text()
        )
        doc["backend"]["rules"] = str(broken)
        config_path = tmp_path / "config4.json"
        config_path.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["run", "--config", str(config_path), "--skip-errors"]) == 0
        predictions = (tmp_path / "out" / "predictions.txt").read_text().splitlines()
        assert predictions[0] == ""  # skipped sentence keeps its (empty) line
        assert all(line for line in predictions[1:])
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["skipped_sentences"] == [dropped]


class TestTuneCommand:
    def test_planted_optimum_and_determinism(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(
            json.dumps({"influence_threshold": [0, 1, 2, 3, 4, 5]}), encoding="utf-8"
        )
        assert main(["tune", "--config", str(config_path), "--grid", str(grid_path)]) == 0
        best = json.loads((tmp_path / "out" / "best_config.json").read_text())
        assert best["hyperparameters"]["influence_threshold"] == 2
        first = (tmp_path / "out" / "leaderboard.jsonl").read_bytes()

        assert main(["tune", "--config", str(config_path), "--grid", str(grid_path)]) == 0
        assert (tmp_path / "out" / "leaderboard.jsonl").read_bytes() == first

    def test_empty_grid_is_config_error(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(json.dumps({"influence_threshold": []}), encoding="utf-8")
        assert main(["tune", "--config", str(config_path), "--grid", str(grid_path)]) == 2


class TestBaselineCommand:
    def test_logprob_baseline(self, tmp_path, corpus):
        n_lines = len(corpus.src_path.read_text().splitlines())
        n_tokens = len(corpus.mt_path.read_text().splitlines()[0].split())
        threshold = math.log2(0.45)
        lp_lines = []
        for i in range(n_lines):
            values = ["-0.1"] * n_tokens
            values[0] = str(threshold)  # exactly at the threshold: BAD
            lp_lines.append(" ".join(values))
        lp_path = tmp_path / "logprobs.txt"
        lp_path.write_text("\n".join(lp_lines) + "\n", encoding="utf-8")
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        assert main(
            [
                "baseline-logprob",
                "--config",
                str(config_path),
                "--logprob-file",
                str(lp_path),
                "--threshold-log2",
                str(threshold),
            ]
        ) == 0
        lines = (tmp_path / "out" / "baseline_predictions.txt").read_text().splitlines()
        for line in lines:
            labels = line.split()
            assert labels[0] == "BAD"
            assert all(lab == "OK" for lab in labels[1:])


class TestExplainCommand:
    def test_single_format(self, tmp_path, corpus):
        config_path = write_config(
            tmp_path, corpus, tmp_path / "out", tmp_path / "cache"
        )
        assert main(["run", "--config", str(config_path)]) == 0
        html = tmp_path / "out" / "report.html"
        html.unlink()
        assert main(["explain", "--config", str(config_path), "--format", "json"]) == 0
        assert not html.exists()
        assert main(["explain", "--config", str(config_path), "--format", "html"]) == 0
        assert html.exists()
