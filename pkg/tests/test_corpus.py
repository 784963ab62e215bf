import pytest

from catat import check_stages, emit, parse, specialize_program
from catat.cli import parse_arg_list
from catat.dyninterp import format_binding, format_result, run
from catat.errors import StageError
from catat.corpus import (
    corpus_path, dsl_interpreter_source, dsl_reference_eval, encode_dsl,
    provide_corpus,
)

FIXTURES = {f.name: f for f in provide_corpus()}


def test_manifest_covers_every_fixture_file():
    on_disk = {p.name for p in corpus_path(".").glob("*.cat")}
    assert on_disk == set(FIXTURES)


def test_every_fixture_names_an_origin():
    for fixture in FIXTURES.values():
        assert fixture.origin


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_check_expectation(name):
    fixture = FIXTURES[name]
    program = parse(fixture.source())
    expectation = fixture.first("check")
    if expectation == "ok":
        check_stages(program, 2)
        return
    kind = expectation.split()[1]
    with pytest.raises(StageError) as exc:
        check_stages(program, 2)
    assert exc.value.kind == kind


@pytest.mark.parametrize(
    "name", [name for name, f in sorted(FIXTURES.items()) if f.first("golden")])
def test_golden_residuals(name):
    fixture = FIXTURES[name]
    staged = check_stages(parse(fixture.source()), 2)
    rp = specialize_program(staged, fixture.first("entry"),
                            parse_arg_list(fixture.first("static-args")))
    golden = corpus_path(fixture.first("golden")).read_text(encoding="utf-8")
    assert emit(rp) == golden


@pytest.mark.parametrize(
    "name",
    [name for name, f in sorted(FIXTURES.items()) if f.first("run-result")])
def test_fixture_run_results(name):
    fixture = FIXTURES[name]
    staged = check_stages(parse(fixture.source()), 2)
    rp = specialize_program(staged, fixture.first("entry"),
                            parse_arg_list(fixture.first("static-args")))
    result = run(rp, rp.entry_name, parse_arg_list(fixture.first("run-args")))
    assert format_result(result.value) == fixture.first("run-result")


@pytest.mark.parametrize(
    "name",
    [name for name, f in sorted(FIXTURES.items()) if f.all("script-binding")])
def test_fixture_script_bindings(name):
    fixture = FIXTURES[name]
    staged = check_stages(parse(fixture.source()), 2)
    rp = specialize_program(staged)
    rendered = [format_binding(bname, value)
                for bname, value in rp.static_bindings]
    for expected in fixture.all("script-binding"):
        assert expected in rendered


def test_dsl_interpreter_source_checks():
    program = parse(dsl_interpreter_source())
    check_stages(program, 2)


def test_encode_dsl():
    toks, count = encode_dsl("in * in + 1")
    assert [c.value for c in toks.cells] == [5, 2, 5, 1, 6, 1, 0]
    assert count.value == 6


def test_encode_dsl_multidigit_literal():
    toks, count = encode_dsl("(12)")
    assert [c.value for c in toks.cells] == [3, 6, 12, 4, 0]
    assert count.value == 4


def test_reference_evaluator():
    assert dsl_reference_eval("in * in + 1", 3) == 10
    assert dsl_reference_eval("7", -5) == 7
    assert dsl_reference_eval("in", 9) == 9
    assert dsl_reference_eval("2 + 3 * 4", 0) == 14
    assert dsl_reference_eval("(2 + 3) * 4", 0) == 20


def test_reference_evaluator_rejects_garbage():
    with pytest.raises(ValueError):
        dsl_reference_eval("1 +", 0)
    with pytest.raises(ValueError):
        dsl_reference_eval("(1", 0)
