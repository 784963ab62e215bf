"""Specializing the expression-language interpreter on a fixed program
compiles the program away: the residual must agree with the independent
direct evaluator and contain no interpretive dispatch."""

import random

import pytest

from catat import check_stages, emit, parse, specialize_program
from catat import nodes as n
from catat.corpus import (
    dsl_interpreter_source, dsl_reference_eval, encode_dsl,
    random_dsl_program,
)
from catat.errors import UserStaticError
from catat.staticeval import value_of
from catat.dyninterp import run
from catat.values import IntV


def specialized(text):
    staged = check_stages(parse(dsl_interpreter_source()), 2)
    toks, count = encode_dsl(text)
    return specialize_program(staged, "dsl_program", [toks, count])


def run_specialized(rp, value):
    return value_of(run(rp, rp.entry_name, [IntV(value)]).value)


def test_quadratic_program():
    rp = specialized("in * in + 1")
    assert run_specialized(rp, 3) == 10
    assert run_specialized(rp, -4) == 17


def test_constant_program_has_no_dispatch():
    rp = specialized("7")
    for value in (-10, 0, 3):
        assert run_specialized(rp, value) == 7
    entry = rp.function(rp.entry_name)
    text = emit(rp)
    assert "switch" not in text and "for (" not in text and "toks" not in text
    # the entry forwards to a literal return; no loops or branches anywhere
    assert all(not isinstance(s, (n.For, n.If, n.Switch))
               for u in rp.units for s in u.body)
    assert entry.return_type.name == "int"


def test_identity_program():
    rp = specialized("in")
    for value in range(-10, 11):
        assert run_specialized(rp, value) == value


def test_malformed_token_stream_rejected():
    staged = check_stages(parse(dsl_interpreter_source()), 2)
    from catat.values import ArrayV, INT
    bad = ArrayV(INT, [IntV(1), IntV(0)])  # starts with '+'
    with pytest.raises(UserStaticError):
        specialize_program(staged, "dsl_program", [bad, IntV(1)])


def test_random_programs_match_reference():
    rng = random.Random(20260810)
    programs = [random_dsl_program(rng, 4) for _ in range(50)]
    for text in programs:
        rp = specialized(text)
        residual_text = emit(rp)
        assert "switch" not in residual_text
        assert "toks" not in residual_text
        for value in range(-10, 11):
            expected = dsl_reference_eval(text, value)
            assert run_specialized(rp, value) == expected, (text, value)
