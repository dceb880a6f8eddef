"""Tokenizer and recursive-descent parser for the store's SELECT subset.

Grammar (conjunctive WHERE only):

    select    := SELECT item ("," item)* FROM ident
                 (WHERE cond (AND cond)*)?
                 (GROUP BY ident ("," ident)*)?
                 (ORDER BY ident (ASC|DESC)? ("," ident (ASC|DESC)?)*)?
                 (LIMIT number)?
    item      := expr (AS ident)?
    expr      := term (("+"|"-") term)*
    term      := factor (("*"|"/") factor)*
    factor    := number | string | ident | func "(" (expr|"*") ")" | "(" expr ")"
    cond      := ident op literal | ident IN "(" literal ("," literal)* ")"
    op        := = | != | <> | < | > | <= | >=
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal


class SqlSyntaxError(Exception):
    pass


KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "GROUP", "ORDER", "BY",
            "LIMIT", "AS", "IN", "ASC", "DESC"}
AGGREGATES = {"COUNT", "SUM", "AVG", "MIN", "MAX"}

_TOKEN_RE = re.compile(r"""
    \s*(?:
        (?P<num>\d+(?:\.\d+)?)
      | (?P<str>'(?:[^']|'')*')
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op><=|>=|<>|!=|=|<|>)
      | (?P<punct>[(),*+\-/])
    )""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num | str | ident | kw | op | punct
    text: str


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    sql = sql.strip().rstrip(";")
    if ";" in sql:
        raise SqlSyntaxError("multiple statements are not supported")
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if not m or m.end() == pos:
            raise SqlSyntaxError(f"unexpected character at {pos}: {sql[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("num"):
            tokens.append(Token("num", m.group("num")))
        elif m.group("str"):
            tokens.append(Token("str", m.group("str")[1:-1].replace("''", "'")))
        elif m.group("ident"):
            text = m.group("ident")
            kind = "kw" if text.upper() in KEYWORDS else "ident"
            tokens.append(Token(kind, text.upper() if kind == "kw" else text))
        elif m.group("op"):
            tokens.append(Token("op", m.group("op")))
        else:
            tokens.append(Token("punct", m.group("punct")))
    return tokens


# --- AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str


@dataclass(frozen=True)
class Literal:
    value: Decimal | str


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class FuncCall:
    name: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Column | Literal | Star | FuncCall | BinOp


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class Condition:
    column: str
    op: str  # comparison operator or "IN"
    values: tuple[Decimal | str, ...]


@dataclass(frozen=True)
class OrderTerm:
    column: str
    descending: bool = False


@dataclass(frozen=True)
class SelectStmt:
    items: tuple[SelectItem, ...]
    table: str
    where: tuple[Condition, ...] = ()
    group_by: tuple[str, ...] = ()
    order_by: tuple[OrderTerm, ...] = ()
    limit: int | None = None

    def conditions_on(self, column: str) -> list[Condition]:
        return [c for c in self.where if c.column == column]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise SqlSyntaxError("unexpected end of statement")
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise SqlSyntaxError(f"expected {text or kind}, got {tok.text!r}")
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.peek()
        if tok and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    # expressions

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while True:
            tok = self.peek()
            if tok and tok.kind == "punct" and tok.text in "+-":
                self.next()
                node = BinOp(tok.text, node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while True:
            tok = self.peek()
            if tok and tok.kind == "punct" and tok.text in "*/":
                self.next()
                node = BinOp(tok.text, node, self.parse_factor())
            else:
                return node

    def parse_factor(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            return Literal(Decimal(tok.text))
        if tok.kind == "str":
            return Literal(tok.text)
        if tok.kind == "punct" and tok.text == "(":
            inner = self.parse_expr()
            self.expect("punct", ")")
            return inner
        if tok.kind == "ident":
            if tok.text.upper() in AGGREGATES and self.accept("punct", "("):
                if self.accept("punct", "*"):
                    arg: Expr = Star()
                else:
                    arg = self.parse_expr()
                self.expect("punct", ")")
                return FuncCall(tok.text.upper(), arg)
            return Column(tok.text)
        raise SqlSyntaxError(f"unexpected token {tok.text!r} in expression")

    # clauses

    def parse_condition(self) -> Condition:
        col = self.expect("ident").text
        if self.accept("kw", "IN"):
            self.expect("punct", "(")
            values = [self.parse_literal()]
            while self.accept("punct", ","):
                values.append(self.parse_literal())
            self.expect("punct", ")")
            return Condition(col, "IN", tuple(values))
        op = self.expect("op").text
        if op == "<>":
            op = "!="
        return Condition(col, op, (self.parse_literal(),))

    def parse_literal(self) -> Decimal | str:
        tok = self.next()
        if tok.kind in ("op", "punct") and tok.text == "-":
            return -Decimal(self.expect("num").text)
        if tok.kind == "num":
            return Decimal(tok.text)
        if tok.kind == "str":
            return tok.text
        raise SqlSyntaxError(f"expected literal, got {tok.text!r}")

    def parse_select(self) -> SelectStmt:
        self.expect("kw", "SELECT")
        items = [self.parse_item()]
        while self.accept("punct", ","):
            items.append(self.parse_item())
        self.expect("kw", "FROM")
        table = self.expect("ident").text

        where: list[Condition] = []
        if self.accept("kw", "WHERE"):
            where.append(self.parse_condition())
            while self.accept("kw", "AND"):
                where.append(self.parse_condition())

        group_by: list[str] = []
        if self.accept("kw", "GROUP"):
            self.expect("kw", "BY")
            group_by.append(self.expect("ident").text)
            while self.accept("punct", ","):
                group_by.append(self.expect("ident").text)

        order_by: list[OrderTerm] = []
        if self.accept("kw", "ORDER"):
            self.expect("kw", "BY")
            order_by.append(self.parse_order_term())
            while self.accept("punct", ","):
                order_by.append(self.parse_order_term())

        limit = None
        if self.accept("kw", "LIMIT"):
            limit = int(self.expect("num").text)

        if self.peek() is not None:
            raise SqlSyntaxError(f"trailing tokens after statement: {self.peek().text!r}")
        return SelectStmt(tuple(items), table, tuple(where), tuple(group_by),
                          tuple(order_by), limit)

    def parse_item(self) -> SelectItem:
        if self.accept("punct", "*"):
            return SelectItem(Star())
        expr = self.parse_expr()
        alias = None
        if self.accept("kw", "AS"):
            alias = self.expect("ident").text
        return SelectItem(expr, alias)

    def parse_order_term(self) -> OrderTerm:
        col = self.expect("ident").text
        if self.accept("kw", "DESC"):
            return OrderTerm(col, descending=True)
        self.accept("kw", "ASC")
        return OrderTerm(col)


def parse_select(sql: str) -> SelectStmt:
    """Parse a SELECT statement; raises SqlSyntaxError on anything else."""
    tokens = tokenize(sql)
    if not tokens:
        raise SqlSyntaxError("empty statement")
    first = tokens[0]
    if not (first.kind == "kw" and first.text == "SELECT"):
        raise SqlSyntaxError(f"only SELECT statements are supported, got {first.text!r}")
    return _Parser(tokens).parse_select()


def columns_in(expr: Expr) -> list[str]:
    if isinstance(expr, Column):
        return [expr.name]
    if isinstance(expr, FuncCall):
        return columns_in(expr.arg)
    if isinstance(expr, BinOp):
        return columns_in(expr.left) + columns_in(expr.right)
    return []


def binops_in(expr: Expr) -> list[BinOp]:
    if isinstance(expr, BinOp):
        return [expr] + binops_in(expr.left) + binops_in(expr.right)
    if isinstance(expr, FuncCall):
        return binops_in(expr.arg)
    return []


def aggregates_in(expr: Expr) -> list[FuncCall]:
    if isinstance(expr, FuncCall):
        return [expr] + aggregates_in(expr.arg)
    if isinstance(expr, BinOp):
        return aggregates_in(expr.left) + aggregates_in(expr.right)
    return []
