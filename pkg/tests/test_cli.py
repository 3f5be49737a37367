import csv
import io
import json

import pytest

from listening_energy.cli import main
from listening_energy.corpus import fixture_path, load_corpus, load_fixture
from listening_energy.questionnaire import QuestionnaireResponse, ResponseStore, read_responses

ANALYZE_OUTPUTS = {"trajectory.csv", "hypothesis.json", "speaker.svg", "listener.svg", "manifest.json"}


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


class TestAnalyze:
    def test_expert_fixture(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["--out", str(out), "analyze", "fixture:expert"]) == 0
        assert {p.name for p in out.iterdir()} == ANALYZE_OUTPUTS
        roles = [r["role"] for r in rows(out / "trajectory.csv")]
        assert roles.count("speaker") == 3 and roles.count("listener") == 2
        assert "expert: speaker growing" in capsys.readouterr().out
        report = json.loads((out / "hypothesis.json").read_text())
        assert report["hypothesis"]["starts_negative"] is True
        assert report["conversations"] == 1

    def test_charts(self, tmp_path):
        out = tmp_path / "out"
        main(["analyze", "fixture:extended-gemini", "--out", str(out), "--mean-color", "#aa0000"])
        svg = (out / "listener.svg").read_text()
        assert svg.startswith("<?xml")
        assert "#aa0000" in svg
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["run_digest"] in svg
        assert set(manifest["outputs"]) == ANALYZE_OUTPUTS - {"manifest.json"}

    def test_bit_identical_reruns(self, tmp_path):
        digests = set()
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert main(["analyze", "fixture:extended-chatgpt", "--out", str(out)]) == 0
            digests.add(tuple((out / name).read_bytes() for name in sorted(ANALYZE_OUTPUTS)))
        assert len(digests) == 1

    def test_options_change_digest(self, tmp_path):
        main(["analyze", "fixture:expert", "--out", str(tmp_path / "a")])
        main(["analyze", "fixture:expert", "--out", str(tmp_path / "b"), "--start-index", "1", "--smooth"])
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert a["run_digest"] != b["run_digest"]
        assert b["options"]["start_index"] == 1

    def test_missing_lexicon(self, tmp_path):
        out = tmp_path / "out"
        code = main(["--lexicon", str(tmp_path / "nope.txt"), "--out", str(out), "analyze", "fixture:expert"])
        assert code == 3
        assert not out.exists()

    def test_env_lexicon(self, tmp_path, monkeypatch):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        monkeypatch.setenv("LISTENING_ENERGY_LEXICON", str(empty))
        assert main(["analyze", "fixture:expert", "--out", str(tmp_path / "o")]) == 0
        assert {float(r["mean"]) for r in rows(tmp_path / "o" / "trajectory.csv")} == {0.0}

    def test_structure_violation(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        text = fixture_path("expert").read_text().replace('"role": "listener"', '"role": "speaker"', 1)
        bad.write_text(text)
        assert main(["analyze", str(bad), "--out", str(tmp_path / "o")]) == 4
        assert not (tmp_path / "o").exists()

    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        assert main(["analyze", str(bad), "--out", str(tmp_path / "o")]) == 3

    def test_existing_outputs_untouched_on_error(self, tmp_path):
        out = tmp_path / "out"
        main(["analyze", "fixture:expert", "--out", str(out)])
        before = {p.name: p.read_bytes() for p in out.iterdir()}
        assert main(["--lexicon", str(tmp_path / "nope"), "analyze", "fixture:control-gemini", "--out", str(out)]) == 3
        assert {p.name: p.read_bytes() for p in out.iterdir()} == before


class TestScore:
    def test_texts_to_stdout(self, capsys):
        assert main(["score", "VADER is smart, handsome, and funny.", "The cat sat."]) == 0
        lines = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert float(lines[0]["compound"]) == pytest.approx(0.8316, abs=1e-4)
        assert float(lines[1]["compound"]) == 0.0

    def test_corpus_to_file(self, tmp_path):
        assert main(["score", "--corpus", "fixture:expert", "--out", str(tmp_path)]) == 0
        scored = rows(tmp_path / "scores.csv")
        assert [r["role"] for r in scored] == ["speaker", "listener"] * 2 + ["speaker"]

    def test_nothing_to_score(self):
        assert main(["score"]) == 2


class TestExtendAndControl:
    def test_extend_replay(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["extend", "fixture:expert", "--provider", "chatgpt", "--replay", "fixture:exchanges-chatgpt", "--out", str(out)])
        assert code == 0
        assert load_corpus(out / "extended-chatgpt.jsonl") == load_fixture("extended-chatgpt")

    def test_extend_needs_replay_or_live(self, tmp_path):
        assert main(["extend", "fixture:expert", "--provider", "chatgpt", "--out", str(tmp_path)]) == 2

    def test_extend_replay_miss(self, tmp_path):
        code = main(["extend", "fixture:expert", "--provider", "chatgpt", "--replay", "fixture:exchanges-chatgpt",
                     "--target-turns", "8", "--out", str(tmp_path / "o")])
        assert code == 5
        assert not (tmp_path / "o").exists()

    def test_extend_rejects_non_expert(self, tmp_path):
        code = main(["extend", "fixture:control-gemini", "--provider", "gemini", "--replay", "fixture:exchanges-gemini",
                     "--out", str(tmp_path)])
        assert code == 2

    def test_unknown_provider(self, tmp_path):
        assert main(["extend", "fixture:expert", "--provider", "nobody", "--replay", "x", "--out", str(tmp_path)]) == 2

    def test_live_without_credential(self, tmp_path, monkeypatch):
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        code = main(["control", "--count", "1", "--provider", "chatgpt", "--live", "--out", str(tmp_path)])
        assert code == 5

    def test_control_zero(self, tmp_path):
        assert main(["control", "--count", "0", "--provider", "chatgpt", "--replay", "fixture:exchanges-chatgpt",
                     "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()

    def test_control_replay(self, tmp_path):
        out = tmp_path / "o"
        assert main(["control", "--count", "1", "--provider", "gemini", "--replay", "fixture:exchanges-gemini",
                     "--out", str(out)]) == 0
        assert load_corpus(out / "control-gemini.jsonl") == load_fixture("control-gemini")

    def test_unknown_fixture(self, tmp_path):
        assert main(["analyze", "fixture:nothing", "--out", str(tmp_path)]) == 2


class TestQuestionnaire:
    def test_flags(self, tmp_path, capsys):
        store = tmp_path / "r.jsonl"
        args = ["questionnaire", "extended-chatgpt", "--store", str(store), "--friendly", "5", "--nice", "5",
                "--sensible", "5", "--empathetic-listening", "1", "--comment", "gives advice", "--order", "2"]
        assert main(args) == 0
        (response,) = read_responses(store)
        assert response == QuestionnaireResponse("extended-chatgpt", 5, 5, 5, 1, "gives advice", "expert", 2)

    def test_out_of_range(self, tmp_path):
        args = ["questionnaire", "expert", "--store", str(tmp_path / "r.jsonl"), "--friendly", "6", "--nice", "5",
                "--sensible", "5", "--empathetic-listening", "1"]
        assert main(args) == 3
        assert not (tmp_path / "r.jsonl").exists()

    def test_interactive(self, tmp_path, monkeypatch, capsys):
        answers = iter(["4", "nine", "3", "2", "5", "clear and calm"])
        monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
        store = tmp_path / "r.jsonl"
        assert main(["questionnaire", "control-gemini", "--store", str(store)]) == 0
        (response,) = read_responses(store)
        assert (response.friendly, response.nice, response.sensible, response.empathetic_listening) == (4, 3, 2, 5)
        assert response.free_text == "clear and calm"

    def test_import_export(self, tmp_path):
        src = ResponseStore(tmp_path / "a.jsonl")
        src.put(QuestionnaireResponse("expert", 4, 4, 4, 5, rater="x"))
        dst = tmp_path / "b.jsonl"
        assert main(["questionnaire", "--store", str(dst), "--import", str(tmp_path / "a.jsonl"),
                     "--export", str(tmp_path / "c.jsonl")]) == 0
        assert (tmp_path / "c.jsonl").read_bytes() == (tmp_path / "a.jsonl").read_bytes()

    def test_nothing_to_do(self, tmp_path):
        assert main(["questionnaire", "--store", str(tmp_path / "r.jsonl")]) == 2


class TestDiscordance:
    def write_ratings(self, tmp_path, dataset_id, rating):
        path = tmp_path / "responses.jsonl"
        ResponseStore(path).put(QuestionnaireResponse(dataset_id, 5, 5, 5, rating))
        return path

    def test_growing_listener_and_low_rating(self, tmp_path, capsys):
        responses = self.write_ratings(tmp_path, "extended-chatgpt", 1)
        out = tmp_path / "out"
        code = main(["discordance", "--responses", str(responses), "--corpus", "fixture:extended-chatgpt", "--out", str(out)])
        assert code == 0
        (entry,) = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert entry["listener_trend"] == "growing" and entry["discordant"] is True
        assert (out / "discordance.jsonl").read_text().strip() == json.dumps(entry)

    def test_from_saved_summary(self, tmp_path, capsys):
        main(["analyze", "fixture:extended-chatgpt", "--out", str(tmp_path / "a")])
        capsys.readouterr()
        responses = self.write_ratings(tmp_path, "extended-chatgpt", 5)
        code = main(["discordance", "--responses", str(responses), "--summary",
                     f"extended-chatgpt={tmp_path / 'a' / 'trajectory.csv'}"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["discordant"] is False

    def test_missing_summary(self, tmp_path):
        responses = self.write_ratings(tmp_path, "control-gemini", 1)
        assert main(["discordance", "--responses", str(responses), "--corpus", "fixture:expert"]) == 2

    def test_bad_summary_flag(self, tmp_path):
        responses = self.write_ratings(tmp_path, "x", 1)
        assert main(["discordance", "--responses", str(responses), "--summary", "nofile"]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["analyze"]) == 2
    assert main(["bogus"]) == 2


def test_failed_write_leaves_directory_unchanged(tmp_path, monkeypatch):
    import listening_energy.fsutil as fsutil

    out = tmp_path / "out"
    main(["analyze", "fixture:expert", "--out", str(out)])
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    real_fdopen = fsutil.os.fdopen
    calls = []

    def flaky(fd, *args, **kwargs):
        calls.append(fd)
        if len(calls) == 3:
            fsutil.os.close(fd)
            raise OSError("disk full")
        return real_fdopen(fd, *args, **kwargs)

    monkeypatch.setattr(fsutil.os, "fdopen", flaky)
    assert main(["analyze", "fixture:control-gemini", "--out", str(out)]) == 1
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before
