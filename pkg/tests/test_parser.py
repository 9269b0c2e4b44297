import dataclasses
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dartwin import corpus
from dartwin import model as m
from dartwin.parser import ParseError, load_model, parse_fragment, parse_model, serialize_model, tokenize


def test_thermal_comfort_census(fixtures):
    model = fixtures["thermal_comfort"]
    assert [g.id for g in model.goals] == ["WarmComfort"]
    assert [(p.name, p.unit) for p in model.goals[0].pois] == [("room_temp", "celsius")]
    assert [d.id for d in model.dts()] == ["ThermostatLogic"]
    ports = {(p.name, p.direction.value) for p in model.root.ports}
    assert ports == {("room_temp", "in"), ("heater", "out"), ("comfort_temp", "in")}
    assert [l.id for l in model.links] == ["ThermostatLogic=>WarmComfort"]


def test_empty_goal_is_an_error():
    text = 'dartwin "E" {\n  goal G { }\n  system S { }\n}\n'
    diags = parse_model(text)
    assert isinstance(diags, list)
    assert [d.message for d in diags] == ["goal must declare at least one poi"]


@pytest.mark.parametrize("name", corpus.FIXTURES)
def test_corpus_parses_cleanly(name):
    result = parse_model(corpus.text(name), name)
    assert isinstance(result, m.Model), result


@pytest.mark.parametrize("name", (*corpus.FIXTURES, *corpus.EXTRA))
def test_round_trip(name):
    model = corpus.load(name)
    text = serialize_model(model)
    again = load_model(text)
    assert again == model
    assert serialize_model(again) == text


def test_nested_system_serializes_nested(fixtures):
    text = serialize_model(fixtures["green_comfort"])
    lines = text.splitlines()
    outer = next(i for i, l in enumerate(lines) if l.startswith("  system "))
    inner = next(i for i, l in enumerate(lines) if l.startswith("    system "))
    assert outer < inner
    assert sum(1 for l in lines if re.match(r"\s*system ", l)) == 2


def test_crlf_accepted():
    text = corpus.text("thermal_comfort").replace("\n", "\r\n")
    assert load_model(text) == corpus.load("thermal_comfort")


def _flow_runs(lines):
    runs, cur = [], []
    for i, l in enumerate(lines):
        if l.strip().startswith("flow "):
            cur.append(i)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def _goal_blocks(lines):
    """(start, end) line ranges of top-level goal blocks."""
    blocks, i = [], 0
    while i < len(lines):
        if lines[i].startswith("  goal "):
            j = i
            while lines[j] != "  }":
                j += 1
            blocks.append((i, j + 1))
            i = j + 1
        else:
            i += 1
    return blocks


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(corpus.FIXTURES), st.randoms(use_true_random=False))
def test_declaration_order_is_irrelevant(name, rnd):
    text = serialize_model(corpus.load(name))
    lines = text.splitlines()
    for run in _flow_runs(lines):
        chunk = [lines[i] for i in run]
        rnd.shuffle(chunk)
        for i, l in zip(run, chunk):
            lines[i] = l
    blocks = _goal_blocks(lines)
    if blocks:
        start, end = blocks[0][0], blocks[-1][1]
        parts = [lines[a:b] for a, b in blocks]
        rnd.shuffle(parts)
        lines[start:end] = [l for p in parts for l in p]
    permuted = "\n".join(lines) + "\n"
    assert serialize_model(load_model(permuted)) == text


BROKEN = [
    # (text, offending token)
    ('dartwin "X" {\n  goal G { poi t : kelvinish }\n  system S { }\n}\n', "kelvinish"),
    ('dartwin "X" {\n  goal G { poi t : celsius }\n  system S {\n    in t : celsius [monitoring]\n    flow boundary.t -> Nowhere.x\n  }\n}\n', "Nowhere"),
    ('dartwin "X" {\n  goal G { poi t : celsius }\n  goal G { poi u : celsius }\n  system S { }\n}\n', "G"),
    ('dartwin "X" {\n  goal G { poi t : celsius\n    constraint "always(t > 8 and q < 3)" }\n  system S { }\n}\n', "q"),
    ('dartwin "X" {\n  goal G { poi t : celsius }\n  system S {\n    in a : celsius [sideways]\n  }\n}\n', "sideways"),
    ('dartwin "X" {\n  goal G { poi t : celsius }\n  system S { dt D { satisfies Nope } }\n}\n', "Nope"),
]


@pytest.mark.parametrize("text,token", BROKEN)
def test_diagnostic_span_points_at_token(text, token):
    diags = parse_model(text, "broken.dartwin")
    assert isinstance(diags, list) and diags
    d = diags[0]
    line = text.splitlines()[d.span.line - 1]
    covered = line[d.span.column - 1 : d.span.column - 1 + d.span.length]
    assert covered == token, (d, covered)
    assert d.span.line >= 1 and d.span.column >= 1


def test_load_model_raises_with_diagnostics():
    with pytest.raises(ParseError) as exc:
        load_model('dartwin "X" {')
    assert exc.value.diagnostics


def test_tokenize_skips_comments():
    toks = tokenize("// hello\ngoal")
    assert [t.text for t in toks if t.kind != "eof"] == ["goal"]


def test_fragment_boundary_refs():
    frag = parse_fragment(corpus.text("additions/freeze_protection"))
    owners = {f.src.owner for f in frag.root.flows} | {f.dst.owner for f in frag.root.flows}
    assert "boundary" in owners
    assert [d.id for d in frag.root.dts] == ["FreezeProtection"]
