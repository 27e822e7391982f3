"""Lexical scanning for preprocessed (and, best-effort, raw) C text."""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(
    r"""
    (?P<comment>/\*.*?\*/|//[^\n]*)
  | (?P<directive>^[ \t]*\#[^\n]*)
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<char>'(?:\\.|[^'\\\n])*')
  | (?P<num>(?:0[xX][0-9a-fA-F]+|\.?\d(?:[\w.]|[eEpP][+-])*)[uUlLfF]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct><<=|>>=|\.\.\.|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||[+\-*/%&|^!~=<>]=?|[{}()\[\];,.?:])
    """,
    re.VERBOSE | re.DOTALL | re.MULTILINE,
)


@dataclass(frozen=True)
class Tok:
    kind: str   # ident / num / string / char / punct
    text: str
    line: int


def tokenize(text: str) -> list[Tok]:
    """Comments and preprocessor directives are skipped, not tokenized."""
    newlines = [m.start() for m in re.finditer("\n", text)]

    def line_of(pos: int) -> int:
        return bisect.bisect_right(newlines, pos - 1) + 1

    toks: list[Tok] = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("comment", "directive"):
            continue
        toks.append(Tok(kind, m.group(), line_of(m.start())))
    return toks


C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
    _Static_assert _Thread_local __restrict __restrict__ __inline __inline__
    __volatile__ __const __signed__ __asm __asm__ asm __attribute__
    __extension__ __typeof__ typeof __builtin_va_list""".split()
)

NOT_CALLS = frozenset(
    """if for while switch return sizeof _Alignof _Static_assert __attribute__
    __asm __asm__ asm __typeof__ typeof _Generic defined __builtin_offsetof
    __declspec""".split()
)
