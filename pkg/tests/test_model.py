from __future__ import annotations

import json
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hisql.model import (
    Attempt,
    CallLedger,
    Exhausted,
    Hint,
    HintSet,
    ItemRecord,
    NLQuery,
    PipelineConfig,
    PURPOSES,
    ResultTable,
    RunReport,
    SchemaText,
    Success,
    check_attempt_trace,
    difficulty_bucket,
    hint_file_text,
    hint_records,
    hints_from_records,
    report_json_text,
)


class TestDifficultyBucket:
    def test_paper_labels_case_insensitive(self):
        assert difficulty_bucket("Challenging") == "challenging"
        assert difficulty_bucket("SIMPLE") == "simple"
        assert difficulty_bucket("moderate") == "moderate"

    def test_absent_maps_to_unknown(self):
        assert difficulty_bucket(None) == "unknown"

    def test_unrecognized_label_maps_to_unknown(self):
        assert difficulty_bucket("hard") == "unknown"
        assert difficulty_bucket("") == "unknown"


class TestSchemaText:
    def test_rendered_is_blank_line_join(self):
        schema = SchemaText(statements=("CREATE TABLE a (x)", "CREATE TABLE b (y)"))
        assert schema.rendered == "CREATE TABLE a (x)\n\nCREATE TABLE b (y)"

    def test_round_trip(self):
        schema = SchemaText(statements=("CREATE TABLE a (x)",))
        assert SchemaText.from_dict(schema.to_dict()) == schema


class TestResultTable:
    def test_rejects_ragged_rows(self):
        with pytest.raises(ValueError):
            ResultTable(columns=("a", "b"), rows=((1,),))


class TestAttempts:
    def test_trace_must_be_gapless(self):
        a0 = Attempt(index=0, sql="SELECT 1", outcome="exec_error", error_kind="syntax", error="x")
        a2 = Attempt(index=2, sql="SELECT 1", outcome="success")
        with pytest.raises(ValueError):
            check_attempt_trace([a0, a2])

    def test_success_trace_must_end_in_success(self):
        bad = Attempt(index=0, sql="SELECT 1", outcome="exec_error", error_kind="syntax", error="x")
        with pytest.raises(ValueError):
            Success(result=ResultTable(columns=("a",), rows=()), attempts=(bad,))

    def test_exhausted_trace_cannot_contain_success(self):
        ok = Attempt(index=0, sql="SELECT 1", outcome="success")
        with pytest.raises(ValueError):
            Exhausted(attempts=(ok,), last_error="x")

    def test_exec_error_requires_message(self):
        with pytest.raises(ValueError):
            Attempt(index=0, sql="x", outcome="exec_error")

    def test_attempt_round_trip(self):
        attempt = Attempt(
            index=1, sql="SELECT 1", outcome="exec_error",
            error_kind="syntax", error="near x", latency_ms=12,
        )
        assert Attempt.from_dict(attempt.to_dict(include_latency=True)) == attempt


class TestCallLedger:
    def test_counts_by_purpose(self):
        ledger = CallLedger()
        ledger.increment("generation")
        ledger.increment("repair")
        ledger.increment("generation")
        assert ledger.count("generation") == 2
        assert ledger.count("repair") == 1
        assert ledger.total() == 3

    def test_unknown_purpose_rejected(self):
        with pytest.raises(ValueError):
            CallLedger().increment("marketing")

    def test_counts_only_increase(self):
        with pytest.raises(ValueError):
            CallLedger().increment("repair", by=0)

    def test_concurrent_increments_all_land(self):
        ledger = CallLedger()

        def bump():
            for _ in range(200):
                ledger.increment("generation")

        threads = [threading.Thread(target=bump) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert ledger.count("generation") == 1600

    def test_delta(self):
        ledger = CallLedger()
        before = ledger.snapshot()
        ledger.increment("hint_curation")
        delta = CallLedger.delta(before, ledger.snapshot())
        assert delta["hint_curation"] == 1
        assert sum(delta.values()) == 1

    @given(st.lists(st.sampled_from(PURPOSES), max_size=60))
    def test_total_equals_number_of_increments(self, purposes):
        ledger = CallLedger()
        for purpose in purposes:
            ledger.increment(purpose)
        assert ledger.total() == len(purposes)


class TestPipelineConfig:
    def test_defaults_match_contract(self):
        cfg = PipelineConfig()
        assert cfg.max_repairs == 3
        assert cfg.temperature == 0.3
        assert cfg.hint_repair_cap == 2
        assert cfg.split_ratio == 0.2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_repairs": 0},
            {"temperature": 2.5},
            {"split_ratio": 0.0},
            {"split_ratio": 1.0},
            {"row_cap": 0},
            {"comparison_mode": "fuzzy"},
        ],
    )
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_dict({"max_retries": 5})

    @given(
        st.builds(
            PipelineConfig,
            max_repairs=st.integers(1, 6),
            temperature=st.floats(0, 2, allow_nan=False),
            hint_target_count=st.integers(1, 50),
            hint_repair_cap=st.integers(1, 5),
            exec_timeout_ms=st.integers(1, 10 ** 6),
            row_cap=st.integers(1, 10 ** 6),
            split_ratio=st.floats(0.01, 0.99),
            seed=st.integers(-(2 ** 63), 2 ** 63 - 1),
            include_evidence=st.booleans(),
            hints_in_repair=st.booleans(),
            comparison_mode=st.sampled_from(["set", "multiset", "ordered"]),
            fold_numeric=st.booleans(),
        )
    )
    def test_json_round_trip_lossless(self, cfg):
        through_json = json.loads(json.dumps(cfg.to_dict()))
        assert PipelineConfig.from_dict(through_json) == cfg


class TestHintSerialization:
    def test_dropped_hints_excluded(self):
        hs = HintSet(
            db_id="d",
            hints=(
                Hint(description="a", sql_query="SELECT 1", status="valid"),
                Hint(description="b", sql_query="SELECT 2", status="dropped", repair_count=2),
                Hint(description="c", sql_query="SELECT 3", status="repaired", repair_count=1),
            ),
        )
        records = hint_records(hs)
        assert [r["description"] for r in records] == ["a", "c"]

    def test_file_text_is_the_interchange_array(self):
        hs = hints_from_records("d", [{"description": "a", "sql_query": "SELECT 1"}])
        parsed = json.loads(hint_file_text(hs))
        assert parsed == [{"description": "a", "sql_query": "SELECT 1"}]

    @given(
        st.lists(
            st.fixed_dictionaries(
                {
                    "description": st.text(max_size=40),
                    "sql_query": st.text(min_size=1, max_size=60),
                }
            ),
            max_size=8,
        )
    )
    def test_interchange_round_trip(self, records):
        hs = hints_from_records("db", records)
        assert json.loads(hint_file_text(hs)) == records

    def test_repair_calls_sums_all_hints(self):
        hs = HintSet(
            db_id="d",
            hints=(
                Hint(description="a", sql_query="s", status="repaired", repair_count=1),
                Hint(description="b", sql_query="s", status="dropped", repair_count=2),
            ),
        )
        assert hs.repair_calls() == 3


class TestRunReport:
    def _report(self) -> RunReport:
        record = ItemRecord(
            item_id="q1",
            difficulty="simple",
            attempts=(Attempt(index=0, sql="SELECT 1", outcome="success"),),
            outcome="success",
            ea_match=True,
            final_sql="SELECT 1",
        )
        return RunReport(
            mode="hisql",
            records=(record,),
            ea_by_difficulty={"simple": 1.0},
            ea_total=1.0,
            evaluated=1,
            matches=1,
            ledger={"hint_curation": 1, "hint_repair": 0, "generation": 1, "repair": 0},
            config=PipelineConfig(),
            generated_at="2024-01-01T00:00:00+00:00",
        )

    def test_round_trip(self):
        report = self._report()
        assert RunReport.from_dict(json.loads(report_json_text(report))) == report

    def test_json_text_is_stable(self):
        report = self._report()
        assert report_json_text(report) == report_json_text(report)


class TestNLQuery:
    def test_question_required(self):
        with pytest.raises(ValueError):
            NLQuery(id="a", db_id="d", question="")
