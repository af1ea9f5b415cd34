"""Line-oriented system configuration format (``.mks`` files).

Example::

    system "bernoulli"
    space dim=1
    vertex V1 { box = [0, 1] }
    edge e1 { from=V1 to=V1 map="x/2"     prob="0.5" }
    edge e2 { from=V1 to=V1 map="x/2+1/2" prob="0.5" }
    set delta_floor=1e-6

Two-dimensional boxes are written ``[lo,hi] x [lo,hi]`` and two-dimensional
maps as ``map="<e0>, <e1>"``. ``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ConfigReferenceError, ParseError
from .expr import Expr, parse_expr

SETTINGS = {"delta_floor": float, "samples": int}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<str>"[^"]*")
  | (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.\-]*)
  | (?P<punct>[{}\[\]=,])
""", re.VERBOSE)


@dataclass(frozen=True)
class VertexDecl:
    id: str
    box: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class EdgeDecl:
    id: str
    source: str
    target: str
    map_src: tuple[str, ...]
    prob_src: str
    map: tuple[Expr, ...]
    prob: Expr


@dataclass
class SystemConfig:
    name: str
    dim: int
    vertices: list[VertexDecl] = field(default_factory=list)
    edges: list[EdgeDecl] = field(default_factory=list)
    settings: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def _lex(line: str, lineno: int) -> list[_Tok]:
    toks, i = [], 0
    while i < len(line):
        m = _TOKEN.match(line, i)
        if not m:
            raise ParseError(f"unexpected character {line[i]!r}", expected="token",
                             found=line[i], line=lineno, column=i + 1)
        if m.lastgroup == "comment":
            break
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), i + 1))
        i = m.end()
    return toks


class _Line:
    """Cursor over the tokens of one statement."""

    def __init__(self, toks, lineno, width):
        self.toks, self.lineno, self.width, self.i = toks, lineno, width, 0

    def fail(self, expected):
        if self.i < len(self.toks):
            tok = self.toks[self.i]
            found, col = tok.text, tok.col
        else:
            found, col = "end of line", self.width + 1
        raise ParseError(f"expected {expected}, found {found!r}", expected=expected,
                         found=found, line=self.lineno, column=col)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, kind, text=None, expected=None) -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            self.fail(expected or (repr(text) if text else kind))
        self.i += 1
        return tok

    def end(self):
        if self.i != len(self.toks):
            self.fail("end of line")


def _number(cur: _Line) -> float:
    return float(cur.take("num", expected="number").text)


def _parse_box(cur: _Line) -> tuple[tuple[float, float], ...]:
    box = []
    while True:
        start = cur.take("punct", "[")
        lo = _number(cur)
        cur.take("punct", ",")
        hi = _number(cur)
        cur.take("punct", "]")
        if not lo < hi:
            raise ParseError(f"empty interval [{lo}, {hi}]", expected="lo < hi",
                             found=f"[{lo}, {hi}]", line=cur.lineno, column=start.col)
        box.append((lo, hi))
        tok = cur.peek()
        if tok is not None and tok.kind == "name" and tok.text == "x":
            cur.i += 1
            continue
        return tuple(box)


def _sub_expr(src: str, dim: int, lineno: int, col: int) -> Expr:
    try:
        return parse_expr(src, dim)
    except ParseError as exc:
        err = type(exc)(exc.message, position=exc.position,
                        expected=exc.expected, found=exc.found, line=lineno,
                        column=col + len(src.encode()[:exc.position].decode(errors="ignore")))
        raise err from None


def parse_system_config(src: str) -> SystemConfig:
    """Parse configuration text into a :class:`SystemConfig`.

    Raises :class:`ParseError` (with ``line``/``column``) on syntax errors and
    :class:`ConfigReferenceError` on duplicate or unknown identifiers.
    """
    cfg = SystemConfig(name="", dim=1)
    seen_space = False
    pending_edges = []
    vertex_ids = set()
    for lineno, line in enumerate(src.splitlines(), start=1):
        toks = _lex(line, lineno)
        if not toks:
            continue
        cur = _Line(toks, lineno, len(line))
        head = cur.take("name", expected="statement keyword")
        if head.text == "system":
            cfg.name = cur.take("str", expected="quoted name").text[1:-1]
            cur.end()
        elif head.text == "space":
            if seen_space or cfg.vertices or pending_edges:
                raise ParseError("space must be declared once, before vertices and edges",
                                 expected="vertex or edge", found="space",
                                 line=lineno, column=head.col)
            cur.take("name", "dim")
            cur.take("punct", "=")
            tok = cur.take("num", expected="dimension")
            if tok.text not in ("1", "2"):
                raise ParseError("dim must be 1 or 2", expected="1 or 2", found=tok.text,
                                 line=lineno, column=tok.col)
            cfg.dim = int(tok.text)
            seen_space = True
            cur.end()
        elif head.text == "vertex":
            vid = cur.take("name", expected="vertex id").text
            if vid in vertex_ids:
                raise ConfigReferenceError(vid, f"duplicate vertex id {vid!r} (line {lineno})")
            cur.take("punct", "{")
            cur.take("name", "box")
            cur.take("punct", "=")
            box = _parse_box(cur)
            cur.take("punct", "}")
            cur.end()
            if len(box) != cfg.dim:
                raise ParseError(f"box has {len(box)} intervals, space dim is {cfg.dim}",
                                 expected=f"{cfg.dim} intervals", found=str(len(box)),
                                 line=lineno, column=head.col)
            vertex_ids.add(vid)
            cfg.vertices.append(VertexDecl(vid, box))
        elif head.text == "edge":
            eid = cur.take("name", expected="edge id").text
            cur.take("punct", "{")
            attrs = {}
            while cur.peek() is not None and cur.peek().text != "}":
                key = cur.take("name", expected="edge attribute")
                if key.text not in ("from", "to", "map", "prob") or key.text in attrs:
                    cur.i -= 1
                    cur.fail("one of from/to/map/prob")
                cur.take("punct", "=")
                kind = "name" if key.text in ("from", "to") else "str"
                attrs[key.text] = cur.take(kind, expected="vertex id" if kind == "name"
                                           else "quoted expression")
            cur.take("punct", "}")
            cur.end()
            missing = [k for k in ("from", "to", "map", "prob") if k not in attrs]
            if missing:
                raise ParseError(f"edge {eid!r} missing {', '.join(missing)}",
                                 expected=missing[0], found="}", line=lineno, column=head.col)
            pending_edges.append((lineno, eid, attrs))
        elif head.text == "set":
            key = cur.take("name", expected="setting name")
            if key.text not in SETTINGS:
                raise ParseError(f"unknown setting {key.text!r}",
                                 expected=" or ".join(SETTINGS), found=key.text,
                                 line=lineno, column=key.col)
            cur.take("punct", "=")
            val = cur.take("num", expected="number")
            try:
                cfg.settings[key.text] = SETTINGS[key.text](val.text)
            except ValueError:
                raise ParseError(f"bad value for {key.text}", expected="integer",
                                 found=val.text, line=lineno, column=val.col) from None
            cur.end()
        else:
            cur.i -= 1
            cur.fail("system, space, vertex, edge or set")

    edge_ids = set()
    for lineno, eid, attrs in pending_edges:
        if eid in edge_ids:
            raise ConfigReferenceError(eid, f"duplicate edge id {eid!r} (line {lineno})")
        edge_ids.add(eid)
        for key in ("from", "to"):
            if attrs[key].text not in vertex_ids:
                raise ConfigReferenceError(attrs[key].text,
                                           f"edge {eid!r} refers to unknown vertex "
                                           f"{attrs[key].text!r} (line {lineno})")
        map_tok, prob_tok = attrs["map"], attrs["prob"]
        parts, maps, offset = map_tok.text[1:-1].split(","), [], 0
        if len(parts) != cfg.dim:
            raise ParseError(f"map has {len(parts)} components, space dim is {cfg.dim}",
                             expected=f"{cfg.dim} components", found=str(len(parts)),
                             line=lineno, column=map_tok.col)
        for part in parts:
            maps.append(_sub_expr(part, cfg.dim, lineno, map_tok.col + 1 + offset))
            offset += len(part) + 1
        prob = _sub_expr(prob_tok.text[1:-1], cfg.dim, lineno, prob_tok.col + 1)
        cfg.edges.append(EdgeDecl(eid, attrs["from"].text, attrs["to"].text,
                                  tuple(p.strip() for p in parts), prob_tok.text[1:-1].strip(),
                                  tuple(maps), prob))
    return cfg
