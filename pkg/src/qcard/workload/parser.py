"""Parser for the conjunctive select-from-where subset used by cardinality benchmarks.

Accepted::

    SELECT <anything without a nested SELECT> FROM t1 [AS] [a1], t2 [a2], ...
    [WHERE <cond> AND <cond> ...] [;]

where each condition is either an equi-join ``x.col = y.col`` across two
different tables or a filter ``x.col <op> <literal>`` with op one of
``= <> != < <= > >=``. Literals are integers, decimals, or single-quoted
strings. Anything else is rejected with the offending token and position.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError, WorkloadError

OPERATORS = ("=", "<>", "<", "<=", ">", ">=")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*|"[^"]+")
  | (?P<op><>|!=|<=|>=|=|<|>)
  | (?P<punct>[.,;*()])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "AS"}
_UNSUPPORTED = {
    "OR", "NOT", "LIKE", "ILIKE", "IN", "IS", "NULL", "BETWEEN", "EXISTS", "JOIN",
    "ON", "GROUP", "ORDER", "HAVING", "LIMIT", "UNION", "CASE", "SELECT",
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper() if self.kind == "ident" else self.text


@dataclass(frozen=True)
class FilterPredicate:
    table: str
    column: str
    op: str
    constant: object

    def __str__(self):
        const = f"'{self.constant}'" if isinstance(self.constant, str) else repr(self.constant)
        return f"{self.table}.{self.column} {self.op} {const}"


@dataclass(frozen=True)
class JoinCondition:
    left: tuple[str, str]
    right: tuple[str, str]


@dataclass(frozen=True)
class ParsedQuery:
    tables: tuple[str, ...]
    joins: tuple[JoinCondition, ...]
    filters: tuple[FilterPredicate, ...]

    def filters_for(self, table: str) -> list[FilterPredicate]:
        return [f for f in self.filters if f.table == table]


def tokenize(sql: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN.match(sql, pos)
        if m is None:
            raise ParseError("unexpected character", sql[pos], pos)
        if m.lastgroup != "ws":
            text = m.group()
            if m.lastgroup == "ident" and text.startswith('"'):
                text = text[1:-1]
            tokens.append(Token(m.lastgroup, text, pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, sql: str):
        self.sql = sql
        self.tokens = tokenize(sql)
        self.i = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        if tok is None:
            raise ParseError(f"{message} (at end of input)")
        raise ParseError(message, tok.text, tok.pos)

    def next(self, expected: str) -> Token:
        tok = self.peek()
        if tok is None:
            self.fail(f"expected {expected}")
        self.i += 1
        return tok

    def keyword(self, word: str) -> None:
        tok = self.next(word)
        if tok.upper != word:
            self.fail(f"expected {word}", tok)

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "ident" and tok.upper == word

    def name(self, what: str) -> str:
        tok = self.next(what)
        if tok.kind != "ident" or tok.upper in _KEYWORDS | _UNSUPPORTED:
            self.fail(f"unsupported syntax, expected {what}", tok)
        return tok.text

    def parse(self) -> ParsedQuery:
        self.keyword("SELECT")
        self.skip_select_list()
        self.keyword("FROM")
        aliases: dict[str, str] = {}
        tables: list[str] = []
        while True:
            start = self.peek()
            table = self.name("table name")
            alias = table
            if self.at_keyword("AS"):
                self.i += 1
                alias = self.name("alias")
            elif self.peek() is not None and self.peek().kind == "ident" and self.peek().upper not in _KEYWORDS:
                alias = self.name("alias")
            if table in tables:
                raise WorkloadError(
                    f"self-joins unsupported: table {table!r} appears twice in FROM (position {start.pos})"
                )
            if alias in aliases:
                self.fail(f"duplicate alias {alias!r}", start)
            tables.append(table)
            aliases[alias] = table
            tok = self.peek()
            if tok is not None and tok.text == ",":
                self.i += 1
                continue
            break
        joins, filters = [], []
        if self.at_keyword("WHERE"):
            self.i += 1
            while True:
                cond = self.condition(aliases, tables)
                (joins if isinstance(cond, JoinCondition) else filters).append(cond)
                if self.at_keyword("AND"):
                    self.i += 1
                    continue
                break
        tok = self.peek()
        if tok is not None and tok.text == ";":
            self.i += 1
        if self.peek() is not None:
            self.fail("unsupported syntax")
        return ParsedQuery(tuple(tables), tuple(joins), tuple(filters))

    def skip_select_list(self) -> None:
        depth = 0
        seen = False
        while True:
            tok = self.peek()
            if tok is None:
                self.fail("expected FROM")
            if tok.kind == "ident" and tok.upper == "SELECT":
                self.fail("subqueries are unsupported", tok)
            if depth == 0 and tok.kind == "ident" and tok.upper == "FROM":
                if not seen:
                    self.fail("empty select list", tok)
                return
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            seen = True
            self.i += 1

    def column_ref(self, aliases: dict, tables: list) -> tuple[str, str]:
        first = self.name("column reference")
        tok = self.peek()
        if tok is not None and tok.text == ".":
            self.i += 1
            column = self.name("column name")
            if first not in aliases:
                self.fail(f"unknown table or alias {first!r}", tok)
            return aliases[first], column
        if len(tables) != 1:
            self.fail("column reference must be qualified when FROM lists several tables")
        return tables[0], first

    def condition(self, aliases: dict, tables: list):
        tok = self.peek()
        if tok is not None and tok.text == "(":
            self.fail("parenthesized conditions are unsupported", tok)
        left = self.column_ref(aliases, tables)
        op_tok = self.next("comparison operator")
        if op_tok.kind != "op":
            self.fail("unsupported syntax, expected comparison operator", op_tok)
        op = "<>" if op_tok.text == "!=" else op_tok.text
        rhs = self.peek()
        if rhs is None:
            self.fail("expected a literal or column after operator")
        if rhs.kind == "number":
            self.i += 1
            text = rhs.text
            value = int(text) if re.fullmatch(r"[+-]?\d+", text) else float(text)
            return FilterPredicate(left[0], left[1], op, value)
        if rhs.kind == "string":
            self.i += 1
            return FilterPredicate(left[0], left[1], op, rhs.text[1:-1].replace("''", "'"))
        right = self.column_ref(aliases, tables)
        if op != "=":
            self.fail("only equi-joins are supported between columns", op_tok)
        if right[0] == left[0]:
            self.fail("column-to-column comparison within one table is unsupported", op_tok)
        return JoinCondition(left, right)


def parse_query(sql_text: str) -> ParsedQuery:
    """Split a query into its tables, equi-joins, and per-table filters.

    Join conditions are kept for inspection but play no part in the encoding.
    """
    return _Parser(sql_text).parse()
