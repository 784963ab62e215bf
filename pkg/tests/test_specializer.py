import pytest

from catat import check_stages, emit, parse
from catat import nodes as n
from catat.errors import (
    DepthExceeded, LiftError, ReturnTypeMismatch, SelfRecursiveSpecialization,
    TypeMismatch, UserStaticError,
)
from catat.specializer import (
    ResidualFunction, SpecializationCache, SpecializationKey,
    infer_return_type, lift, mangle, specialize_class, specialize_function,
    specialize_program,
)
from catat.staticeval import EvalLimits
from catat.values import (
    ArrayV, BoolV, DOUBLE, FLOAT, FloatV, INT, InstanceV, IntV, LONG_INT,
    PointerTV, VOID,
)

from conftest import fixture_source, staged_fixture


def specialize_fixture(name, entry, static_args, **kw):
    staged = staged_fixture(name)
    return specialize_program(staged, entry, static_args, **kw)


def multiply_assigns(body):
    return [s for s in body if isinstance(s, n.Assign) and s.op == "*="]


# -- residual shapes ---------------------------------------------------------

def test_pow_three_residual_shape():
    rp = specialize_fixture("pow_two_level.cat", "pow", [IntV(3)])
    fn = rp.function("pow__3")
    kinds = [type(s).__name__ for s in fn.body]
    assert kinds == ["VarDecl", "Assign", "Assign", "Assign", "Return"]
    assert len(multiply_assigns(fn.body)) == 3
    assert "for" not in emit(rp)


def test_pow_zero_residual_shape():
    rp = specialize_fixture("pow_two_level.cat", "pow", [IntV(0)])
    fn = rp.function("pow__0")
    assert [type(s).__name__ for s in fn.body] == ["VarDecl", "Return"]


@pytest.mark.parametrize("npow", range(0, 9))
def test_unroll_count(npow):
    rp = specialize_fixture("pow_two_level.cat", "pow", [IntV(npow)])
    fn = rp.function(f"pow__{npow}")
    assert len(multiply_assigns(fn.body)) == npow


def test_dot_residual():
    rp = specialize_fixture("dot.cat", "dot", [IntV(3), FLOAT])
    fn = rp.function("dot__3_float")
    adds = [s for s in fn.body if isinstance(s, n.Assign) and s.op == "+="]
    assert len(adds) == 3
    indices = [s.value.lhs.index.value for s in adds]
    assert indices == [0, 1, 2]
    assert fn.params[0][1] == PointerTV(FLOAT)
    assert fn.return_type == FLOAT


def test_average_residual():
    rp = specialize_fixture("average.cat", "average", [INT])
    fn = rp.function("average__int")
    assert fn.return_type == FLOAT
    assert fn.params == [("array", PointerTV(INT)), ("N", INT)]
    first = fn.body[0]
    assert isinstance(first, n.VarDecl)
    assert first.dtype == n.PrimType("float")
    # the dynamic loop survives as a loop
    assert any(isinstance(s, n.For) for s in fn.body)


def test_branch_pruning():
    source = """
        function choose(int@ k)(int x) {
            if@ (k > 0)
                return x + 1;
            else@
                return x - 1;
        }
    """
    staged = check_stages(parse(source), 2)
    plus = specialize_program(staged, "choose", [IntV(1)])
    minus = specialize_program(staged, "choose", [IntV(-1)])
    plus_text = emit(plus)
    minus_text = emit(minus)
    assert "x + 1" in plus_text and "x - 1" not in plus_text
    assert "x - 1" in minus_text and "x + 1" not in minus_text


def test_static_switch_selects_one_case():
    source = """
        function pick(int@ k)(int x) {
            switch@ (k) {
                case 1: return x + 1;
                case 2: return x + 2;
                default: return x;
            }
        }
    """
    staged = check_stages(parse(source), 2)
    rp = specialize_program(staged, "pick", [IntV(2)])
    text = emit(rp)
    assert "x + 2" in text and "switch" not in text and "x + 1" not in text


def test_unrolled_locals_are_renamed():
    rp = specialize_fixture("unroll_locals.cat", "windowed", [IntV(2)])
    fn = rp.function("windowed__2")
    decls = [d.name for s in fn.body if isinstance(s, n.VarDecl)
             for d in s.declarators]
    assert decls == ["acc", "t", "t_2"]
    check_stages(parse(emit(rp)), levels=1)


def test_memoization_yields_single_residual():
    rp = specialize_fixture("average_call.cat", None, [])
    avg_units = [u for u in rp.units if u.name.startswith("average_")]
    assert len(avg_units) == 1
    assert avg_units[0].name == "average__int"


def test_repeated_key_returns_same_entity():
    staged = staged_fixture("pow_two_level.cat")
    cache = SpecializationCache(staged)
    fn = staged.functions_by_key()[("pow", 1)]
    first = specialize_function(fn, [IntV(3)], cache)
    second = specialize_function(fn, [IntV(3)], cache)
    assert first is second
    assert len(cache.order) == 1


def test_residual_ordering_callees_first():
    rp = specialize_fixture("volume_cube.cat", "volumeOfCube", [])
    names = [u.name for u in rp.units]
    assert names.index("pow__3") < names.index("volumeOfCube")


def test_inferred_static_arguments():
    rp = specialize_fixture("average_call.cat", None, [])
    text = emit(rp)
    assert "result3 = average__int(data, 10);" in text


# -- mangling ----------------------------------------------------------------

def test_mangle_examples():
    assert mangle("average", SpecializationKey.for_function(
        "average", [INT])) == "average__int"
    assert mangle("pow", SpecializationKey.for_function(
        "pow", [IntV(3)])) == "pow__3"
    assert mangle("f", SpecializationKey.for_function("f", [])) == "f"
    assert mangle("f", SpecializationKey.for_function(
        "f", [IntV(-3)])) == "f__m3"
    assert mangle("g", SpecializationKey.for_function(
        "g", [LONG_INT])) == "g__long_int"
    assert mangle("g", SpecializationKey.for_function(
        "g", [PointerTV(FLOAT)])) == "g__floatp"
    assert mangle("g", SpecializationKey.for_function(
        "g", [FloatV(2.5)])) == "g__2_5"
    assert mangle("g", SpecializationKey.for_function(
        "g", [BoolV(True)])) == "g__true"


def test_mangle_collision_gets_numeric_suffix():
    staged = staged_fixture("pow_two_level.cat")
    cache = SpecializationCache(staged)
    k1 = SpecializationKey.for_function("g", [IntV(2)])
    k2 = SpecializationKey.for_function("g__2", [])
    assert cache.reserve(k1, "g") == "g__2"
    assert cache.reserve(k2, "g__2") == "g__2_2"
    # injectivity held: the two keys map to distinct names
    assert cache.names_by_key[k1] != cache.names_by_key[k2]


# -- lifting -------------------------------------------------------------------

def test_lift_literals():
    assert lift(IntV(3)) == n.IntLit(3)
    assert lift(IntV(-3)) == n.Unary("-", n.IntLit(3))
    assert lift(FloatV(2.5)) == n.FloatLit(2.5)
    assert lift(BoolV(True)) == n.BoolLit(True)


def test_lift_rejects_structured_values():
    with pytest.raises(LiftError):
        lift(InstanceV("Point", {}))
    with pytest.raises(LiftError):
        lift(ArrayV(INT, [IntV(1)]))
    with pytest.raises(LiftError):
        lift(INT)


def test_static_array_with_dynamic_index_fails_to_lift():
    source = """
        function first(int@* toks)(int i) {
            return toks[i];
        }
    """
    staged = check_stages(parse(source), 2)
    toks = ArrayV(INT, [IntV(7), IntV(8)])
    with pytest.raises(LiftError):
        specialize_program(staged, "first", [toks])


# -- return-type inference -----------------------------------------------------

def test_infer_float_from_mixed_returns():
    body = [n.If(n.VarRef("c"), n.Return(n.IntLit(1)),
                 n.Return(n.FloatLit(2.0)), 0, 0)]
    assert infer_return_type(body, {"c": None}) == FLOAT


def test_infer_void_from_no_returns():
    assert infer_return_type([n.ExprStmt(n.IntLit(1))], {}) == VOID


def test_infer_mismatch():
    body = [n.If(n.VarRef("c"), n.Return(n.IntLit(1)), n.Return(None), 0, 0)]
    with pytest.raises(ReturnTypeMismatch):
        infer_return_type(body, {"c": None})


def test_infer_through_locals_and_calls():
    rp = specialize_fixture("volume_cube.cat", "volumeOfCube", [])
    assert rp.function("volumeOfCube").return_type == FLOAT


# -- classes -------------------------------------------------------------------

def square_array(static_args, **kw):
    staged = staged_fixture("square_array.cat")
    cache = SpecializationCache(staged, kw.get("limits"))
    cls = staged.classes_by_name()["SquareArray"]
    return specialize_class(cls, static_args, cache)


def test_square_array_4_2():
    rc = square_array([FLOAT, IntV(4), IntV(2)])
    assert rc.static_members["numElements"] == IntV(16)
    assert rc.members[0][2].size == 16
    assert rc.name == "SquareArray__float_4_2"


def test_square_array_4_3():
    rc = square_array([FLOAT, IntV(4), IntV(3)])
    assert rc.static_members["numElements"] == IntV(64)


def test_square_array_guard_message():
    with pytest.raises(UserStaticError) as exc:
        square_array([FLOAT, IntV(0), IntV(2)])
    assert exc.value.message == "N_dim and N_length must be positive."


def test_square_array_residual_constructor_lifts_size():
    rc = square_array([FLOAT, IntV(4), IntV(2)])
    loop = rc.ctor_body[0]
    assert isinstance(loop, n.For)
    assert loop.cond == n.Binary("<", n.VarRef("i"), n.IntLit(16))


def test_static_instance():
    rp = specialize_fixture("static_point.cat", None, [])
    assert rp.is_pure_static
    name, inst = rp.static_bindings[-1]
    assert name == "p"
    assert isinstance(inst, InstanceV)
    assert inst.members["magSq"] == IntV(25)


def test_static_instantiation_of_class_with_dynamic_members_rejected():
    source = fixture_source("square_array.cat") + \
        "\nSquareArray@(int, 3, 2) x;\n"
    staged = check_stages(parse(source), 2)
    with pytest.raises(TypeMismatch):
        specialize_program(staged)


def test_dynamic_class_declaration_specializes_the_class():
    rp = specialize_fixture("vector_sum.cat", None, [])
    names = [u.name for u in rp.units]
    assert "Vector__int_4" in names
    text = emit(rp)
    assert "Vector__int_4 x;" in text
    assert "int data[4];" in text


# -- guards and recursion --------------------------------------------------------

def test_depth_guard_during_specialization():
    staged = staged_fixture("runaway.cat")
    with pytest.raises(DepthExceeded):
        specialize_program(staged, limits=EvalLimits(max_depth=32))


def test_self_recursive_specialization_detected():
    source = """
        function s(int@ k)(int x) {
            return s(k)(x);
        }
    """
    staged = check_stages(parse(source), 2)
    with pytest.raises(SelfRecursiveSpecialization):
        specialize_program(staged, "s", [IntV(1)])


def test_recursive_residual_function_is_allowed():
    # plain dynamic recursion residualizes as-is, it is not a cache cycle
    staged = staged_fixture("collatz.cat")
    rp = specialize_program(staged, "foo", [])
    text = emit(rp)
    assert "foo(X % 2 == 0 ? X / 2 : 3 * X + 1)" in text


# -- residual purity --------------------------------------------------------------

@pytest.mark.parametrize("name,entry,args", [
    ("pow_two_level.cat", "pow", [IntV(5)]),
    ("dot.cat", "dot", [IntV(4), FLOAT]),
    ("average.cat", "average", [INT]),
    ("volume_cube.cat", "volumeOfCube", []),
])
def test_residual_purity(name, entry, args):
    rp = specialize_fixture(name, entry, args)
    text = emit(rp)
    assert "@" not in text
    check_stages(parse(text), levels=1)


def test_provenance_comments():
    rp = specialize_fixture("average.cat", "average", [INT])
    assert "// specialized-from: average(int)" in emit(rp)


def test_scripting_empty_residual():
    rp = specialize_fixture("ctime_pow.cat", None, [])
    assert rp.is_pure_static
    assert ("z", IntV(125)) in rp.static_bindings


def test_global_static_state_threads_through_unrolling():
    rp = specialize_fixture("factorial_script.cat", None, [])
    assert rp.is_pure_static
    assert ("Nfact", IntV(24)) in rp.static_bindings
    assert ("N", IntV(5)) in rp.static_bindings
    # the loop variable is scoped to the loop, not a global binding
    assert all(name != "i" for name, _ in rp.static_bindings)


def test_mixed_top_level():
    rp = specialize_fixture("pow_flexible.cat", None, [])
    assert not rp.is_pure_static
    assert ("result2", IntV(8)) in rp.static_bindings
    text = emit(rp)
    assert "int result1 = pow(2, 3);" in text
