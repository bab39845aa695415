"""Tokenizer for the supported SQL subset.

Keywords and function names are case-insensitive and normalized to upper
case; identifiers keep their spelling. `--` starts a line comment.
"""

from dataclasses import dataclass

from .errors import LexError

KEYWORDS = frozenset({
    "CREATE", "TABLE", "VIEW", "AS", "SELECT", "FROM", "WHERE",
    "GROUP", "BY", "AND", "PRIMARY", "KEY",
    # type names in CREATE TABLE column definitions
    "INT", "DOUBLE", "STRING",
    # numeric functions (Table-driven translation targets)
    "SUM", "COUNT", "AVG", "EXP", "LN", "POW",
    # export-query dialect (pivot/denormalization queries)
    "CASE", "WHEN", "THEN", "ELSE", "END",
    # weight write-back statements
    "INSERT", "INTO", "VALUES",
    # recognized only to reject with a clear message
    "ORDER", "HAVING", "JOIN", "ON",
})

SINGLE_CHAR = {
    "+": "PLUS", "-": "MINUS", "*": "STAR", "/": "SLASH",
    "=": "EQ", ",": "COMMA", "(": "LPAREN", ")": "RPAREN",
    ";": "SEMI", ".": "DOT", "<": "LT", ">": "GT",
}


@dataclass(frozen=True)
class Token:
    kind: str          # KEYWORD kinds use the keyword itself, e.g. "SELECT"
    text: str
    line: int
    column: int

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def tokenize(text: str) -> list[Token]:
    """Tokenize SQL source. Raises LexError on illegal characters."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == "-":
            while i < n and text[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token(upper, word, start_line, start_col))
            else:
                tokens.append(Token("IDENT", word, start_line, start_col))
            advance(j - i)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("NUMBER", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch == "'":
            j = i + 1
            while j < n and text[j] != "'":
                if text[j] == "\n":
                    raise LexError("unterminated string literal", start_line, start_col)
                j += 1
            if j >= n:
                raise LexError("unterminated string literal", start_line, start_col)
            tokens.append(Token("STRING", text[i + 1:j], start_line, start_col))
            advance(j - i + 1)
            continue
        if ch in SINGLE_CHAR:
            tokens.append(Token(SINGLE_CHAR[ch], ch, start_line, start_col))
            advance(1)
            continue
        raise LexError(f"illegal character {ch!r}", line, col)

    tokens.append(Token("EOF", "", line, col))
    return tokens
