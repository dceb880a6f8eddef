"""Command-line interface: ingest, query, eval, ablate, serve wiring."""
from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from finkpi.cli import EXIT_CLARIFICATION, main

from .conftest import GROWTH_TEXT, MARGIN_TEXT


def write_doc(tmp_path, name, text, company="ACME", published="2025-02-01"):
    path = tmp_path / name
    path.write_text(text)
    meta = {"doc_id": name, "source_kind": "EarningsRelease",
            "company": company, "published_on": published,
            "fiscal_year_end_month": 12}
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta))
    return path


@pytest.fixture()
def runner():
    return CliRunner()


class TestIngest:
    def test_ingest_files(self, runner, tmp_path):
        a = write_doc(tmp_path, "a.txt", GROWTH_TEXT, published="2024-05-01")
        store = tmp_path / "kpi.db"
        result = runner.invoke(main, ["ingest", str(a), "--store", str(store)])
        assert result.exit_code == 0, result.output
        assert "a.txt: accepted=3" in result.output
        assert store.exists()

    def test_ingest_directory_expands_filings(self, runner, tmp_path):
        docs = tmp_path / "docs"
        docs.mkdir()
        write_doc(docs, "a.txt", GROWTH_TEXT, published="2024-05-01")
        write_doc(docs, "b.txt", MARGIN_TEXT)
        (docs / "notes.md").write_text("ignored")
        store = tmp_path / "kpi.db"
        result = runner.invoke(main, ["ingest", str(docs), "--store", str(store)])
        assert result.exit_code == 0, result.output
        assert "a.txt:" in result.output and "b.txt:" in result.output
        assert "notes.md" not in result.output

    def test_no_files_is_noop(self, runner, tmp_path):
        result = runner.invoke(main, ["ingest", "--store",
                                      str(tmp_path / "kpi.db")])
        assert result.exit_code == 0
        assert "0 files processed" in result.output

    def test_all_failures_exit_1(self, runner, tmp_path):
        bad = tmp_path / "bad.txt"  # no sidecar metadata
        bad.write_text(MARGIN_TEXT)
        result = runner.invoke(main, ["ingest", str(bad), "--store",
                                      str(tmp_path / "kpi.db")])
        assert result.exit_code == 1
        assert "ERROR" in result.output

    def test_partial_failure_exits_0(self, runner, tmp_path):
        good = write_doc(tmp_path, "good.txt", GROWTH_TEXT,
                         published="2024-05-01")
        bad = tmp_path / "bad.txt"
        bad.write_text(MARGIN_TEXT)
        result = runner.invoke(main, ["ingest", str(good), str(bad),
                                      "--store", str(tmp_path / "kpi.db")])
        assert result.exit_code == 0
        assert "good.txt: accepted=3" in result.output
        assert "ERROR" in result.output


class TestQuery:
    @pytest.fixture()
    def populated(self, runner, tmp_path):
        doc = write_doc(tmp_path, "m.txt", MARGIN_TEXT)
        store = tmp_path / "kpi.db"
        assert runner.invoke(main, ["ingest", str(doc), "--store",
                                    str(store)]).exit_code == 0
        return store

    def test_plain_answer(self, runner, populated):
        result = runner.invoke(main, [
            "query", "What was Q4 2024 operating margin?",
            "--store", str(populated)])
        assert result.exit_code == 0, result.output
        assert "SQL: SELECT" in result.output
        assert "Q4 2024 operating margin (actual) was 14.6%." in result.output

    def test_json_bundle(self, runner, populated):
        result = runner.invoke(main, [
            "query", "What was Q4 2024 operating margin?",
            "--store", str(populated), "--json"])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["explanation"].endswith("was 14.6%.")
        assert payload["audit_id"].startswith("audit-")

    def test_clarification_exits_2(self, runner, populated):
        result = runner.invoke(main, [
            "query", "What was the weather?", "--store", str(populated)])
        assert result.exit_code == EXIT_CLARIFICATION
        assert "Cannot answer" in result.output


class TestEval:
    def test_writes_json_report(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "--seed", "7", "--docs", "12",
            "--workdir", str(tmp_path / "work"), "--json-out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["extraction"]["f1"] == 1.0


class TestAblate:
    def test_markdown_table_and_json(self, runner, tmp_path):
        out = tmp_path / "ablation.json"
        result = runner.invoke(main, [
            "ablate", "--seed", "7", "--docs", "12",
            "--workdir", str(tmp_path / "work"), "--json-out", str(out)])
        assert result.exit_code == 0, result.output
        assert "unit_error_rate" in result.output
        payload = json.loads(out.read_text())
        assert len(payload["runs"]) == 2

    def test_single_flag_ablation(self, runner, tmp_path):
        result = runner.invoke(main, [
            "ablate", "--seed", "7", "--docs", "12",
            "--ablate", "unit_resolution",
            "--workdir", str(tmp_path / "work")])
        assert result.exit_code == 0, result.output


class TestServe:
    def test_serve_is_registered(self, runner):
        result = runner.invoke(main, ["serve", "--help"])
        assert result.exit_code == 0
        assert "--port" in result.output
