"""Recursive-descent parser for the SELECT subset."""
from __future__ import annotations

from decimal import Decimal

import pytest

from finkpi.sqlgrammar import (
    BinOp,
    Column,
    Condition,
    FuncCall,
    Literal,
    OrderTerm,
    SelectItem,
    SqlSyntaxError,
    Star,
    aggregates_in,
    binops_in,
    columns_in,
    parse_select,
)


class TestParsing:
    def test_minimal_select_star(self):
        stmt = parse_select("SELECT * FROM kpi")
        assert stmt.table == "kpi"
        assert stmt.items == (SelectItem(Star()),)
        assert stmt.where == ()

    def test_projection_and_where(self):
        stmt = parse_select(
            "SELECT value, unit FROM kpi WHERE metric = 'revenue' AND period_year = 2024")
        assert [i.expr for i in stmt.items] == [Column("value"), Column("unit")]
        assert stmt.where == (
            Condition("metric", "=", ("revenue",)),
            Condition("period_year", "=", (Decimal(2024),)),
        )

    def test_in_list(self):
        stmt = parse_select("SELECT value FROM kpi WHERE basis IN ('GAAP', 'Unstated')")
        assert stmt.where == (Condition("basis", "IN", ("GAAP", "Unstated")),)

    def test_aggregate_with_group_by(self):
        stmt = parse_select(
            "SELECT metric, AVG(value) FROM kpi GROUP BY metric")
        assert stmt.items[1].expr == FuncCall("AVG", Column("value"))
        assert stmt.group_by == ("metric",)

    def test_count_star(self):
        stmt = parse_select("SELECT COUNT(*) FROM kpi")
        assert stmt.items[0].expr == FuncCall("COUNT", Star())

    def test_order_by_and_limit(self):
        stmt = parse_select(
            "SELECT value FROM kpi ORDER BY period_year DESC, value ASC LIMIT 1")
        assert stmt.order_by == (OrderTerm("period_year", descending=True),
                                 OrderTerm("value", descending=False))
        assert stmt.limit == 1

    def test_alias(self):
        stmt = parse_select("SELECT AVG(value) AS avg_value FROM kpi")
        assert stmt.items[0].alias == "avg_value"

    def test_arithmetic_expression(self):
        stmt = parse_select("SELECT value * scale_applied FROM kpi")
        expr = stmt.items[0].expr
        assert expr == BinOp("*", Column("value"), Column("scale_applied"))

    def test_negative_and_decimal_literals(self):
        stmt = parse_select("SELECT value FROM kpi WHERE value >= -14.6")
        assert stmt.where[0].values == (Decimal("-14.6"),)

    def test_case_insensitive_keywords(self):
        stmt = parse_select("select value from kpi where metric = 'eps'")
        assert stmt.table == "kpi"

    def test_trailing_semicolon_accepted(self):
        assert parse_select("SELECT * FROM kpi;").table == "kpi"


class TestRejections:
    @pytest.mark.parametrize("sql", [
        "DELETE FROM kpi",
        "INSERT INTO kpi VALUES (1)",
        "UPDATE kpi SET value = 0",
        "DROP TABLE kpi",
        "CREATE TABLE t (x INT)",
        "PRAGMA table_info(kpi)",
    ])
    def test_non_select_rejected(self, sql):
        with pytest.raises(SqlSyntaxError):
            parse_select(sql)

    @pytest.mark.parametrize("sql", [
        "SELECT",
        "SELECT FROM kpi",
        "SELECT value FROM",
        "SELECT value FROM kpi WHERE",
        "SELECT value FROM kpi WHERE metric =",
        "SELECT value FROM kpi LIMIT many",
        "SELECT value FROM kpi; DROP TABLE kpi",
        "SELECT value kpi",
        "",
    ])
    def test_malformed_rejected(self, sql):
        with pytest.raises(SqlSyntaxError):
            parse_select(sql)

    def test_unterminated_string(self):
        with pytest.raises(SqlSyntaxError):
            parse_select("SELECT value FROM kpi WHERE metric = 'revenue")


class TestHelpers:
    def test_columns_in_walks_nested_exprs(self):
        stmt = parse_select("SELECT AVG(value * scale_applied) FROM kpi")
        assert sorted(columns_in(stmt.items[0].expr)) == ["scale_applied", "value"]

    def test_binops_in(self):
        stmt = parse_select("SELECT value + value_low FROM kpi")
        (op,) = binops_in(stmt.items[0].expr)
        assert op.op == "+"

    def test_aggregates_in(self):
        stmt = parse_select("SELECT SUM(value) FROM kpi")
        (agg,) = aggregates_in(stmt.items[0].expr)
        assert agg.name == "SUM"

    def test_conditions_on(self):
        stmt = parse_select(
            "SELECT value FROM kpi WHERE metric = 'eps' AND period_year = 2024")
        assert stmt.conditions_on("period_year") == [
            Condition("period_year", "=", (Decimal(2024),))]
