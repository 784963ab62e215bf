import subprocess
import sys

import pytest

from catat.corpus import corpus_path

CLI = [sys.executable, "-m", "catat.cli"]


def catat(*args):
    return subprocess.run(CLI + [str(a) for a in args],
                          capture_output=True, text=True)


def fixture(name):
    return str(corpus_path(name))


def test_check_ok():
    result = catat("check", fixture("dot.cat"))
    assert result.returncode == 0
    assert result.stdout.strip() == "ok: 1 declarations"


def test_check_stage_error_exit_2():
    result = catat("check", fixture("flow_bad.cat"))
    assert result.returncode == 2
    assert "stage error" in result.stderr
    assert "DynamicToStaticFlow" in result.stderr
    # file:line:col prefix
    assert result.stderr.startswith(fixture("flow_bad.cat") + ":4:")


def test_check_congruence_error():
    result = catat("check", fixture("congruence_bad.cat"))
    assert result.returncode == 2
    assert "StaticMutationUnderDynamicControl" in result.stderr


def test_parse_error_exit_1(tmp_path):
    bad = tmp_path / "bad.cat"
    bad.write_text("function f( {")
    result = catat("check", bad)
    assert result.returncode == 1
    assert "parse error" in result.stderr


def test_specialize_writes_golden(tmp_path):
    out = tmp_path / "pow3.cat"
    result = catat("specialize", fixture("pow_two_level.cat"),
                   "--entry", "pow", "--static-args", "3", "--out", out)
    assert result.returncode == 0
    golden = corpus_path("golden/pow_3.cat").read_text(encoding="utf-8")
    assert out.read_text(encoding="utf-8") == golden


def test_specialize_deterministic(tmp_path):
    args = ("specialize", fixture("average.cat"), "--entry", "average",
            "--static-args", "int")
    first = catat(*args)
    second = catat(*args)
    assert first.returncode == second.returncode == 0
    assert first.stdout == second.stdout


def test_specialize_error_quotes_constructor_message():
    result = catat("specialize", fixture("square_array.cat"),
                   "--entry", "SquareArray", "--static-args", "float,0,2")
    assert result.returncode == 3
    assert "compile-time error" in result.stderr
    assert "N_dim and N_length must be positive." in result.stderr


def test_via_flatten_matches_direct(tmp_path):
    for name, entry, static_args in (
            ("pow_two_level.cat", "pow", "3"),
            ("dot.cat", "dot", "3,float"),
            ("average.cat", "average", "int"),
            ("volume_cube.cat", "volumeOfCube", None)):
        base = ["specialize", fixture(name), "--entry", entry]
        if static_args:
            base += ["--static-args", static_args]
        direct = catat(*base)
        flattened = catat(*base, "--via-flatten")
        assert direct.returncode == flattened.returncode == 0, name
        assert direct.stdout == flattened.stdout, name


def test_dump_generator():
    result = catat("specialize", fixture("pow_two_level.cat"),
                   "--entry", "pow", "--static-args", "3",
                   "--dump-generator", "--via-flatten")
    assert result.returncode == 0
    assert "function pow_gen(int N)" in result.stdout
    assert 'make_op("*=", result, x)' in result.stdout


def test_flatten_subcommand():
    result = catat("flatten", fixture("dot.cat"), "--entry", "dot")
    assert result.returncode == 0
    assert "function dot_gen(int N, typename T)" in result.stdout


def test_run_residual_prints_stable_value(tmp_path):
    out = tmp_path / "pow3.cat"
    catat("specialize", fixture("pow_two_level.cat"), "--entry", "pow",
          "--static-args", "3", "--out", out)
    result = catat("run", out, "--entry", "pow__3", "--dyn-args", "2.0")
    assert result.returncode == 0
    assert result.stdout.strip() == "float 8.0"


def test_run_two_level_specializes_first():
    result = catat("run", fixture("dot.cat"), "--entry", "dot",
                   "--static-args", "3,float",
                   "--dyn-args", "[1.0,2.0,3.0],[4.0,5.0,6.0]")
    assert result.returncode == 0
    assert result.stdout.strip() == "float 32.0"


def test_run_script_prints_bindings_and_writes_nothing(tmp_path):
    out = tmp_path / "residual.cat"
    result = catat("run", fixture("factorial_script.cat"), "--out", out)
    assert result.returncode == 0
    assert "Nfact = 24" in result.stdout
    assert not out.exists()


def test_specialize_script_prints_bindings_and_writes_nothing(tmp_path):
    out = tmp_path / "residual.cat"
    result = catat("specialize", fixture("ctime_pow.cat"), "--out", out)
    assert result.returncode == 0
    assert "z = 125" in result.stdout
    assert not out.exists()


def test_depth_guard_exit_4():
    result = catat("specialize", fixture("runaway.cat"), "--max-depth", "32")
    assert result.returncode == 4
    assert "depth" in result.stderr
    assert "32" in result.stderr


def test_runtime_error_exit_5(tmp_path):
    out = tmp_path / "dot.cat"
    catat("specialize", fixture("dot.cat"), "--entry", "dot",
          "--static-args", "3,float", "--out", out)
    result = catat("run", out, "--entry", "dot__3_float",
                   "--dyn-args", "[1.0],[1.0]")
    assert result.returncode == 5
    assert "runtime error" in result.stderr


def test_levels_flag():
    result = catat("check", fixture("pow_two_level.cat"), "--levels", "3")
    assert result.returncode == 0


def test_missing_file_is_a_clean_error():
    result = catat("check", "no_such_file.cat")
    assert result.returncode == 1
    assert "catat:" in result.stderr
    assert "Traceback" not in result.stderr


def test_loop_cap_exit_4(tmp_path):
    looping = tmp_path / "loop.cat"
    looping.write_text("int@ i = 0;\nfor@ (;;)\n    i += 1;\n")
    result = catat("specialize", looping, "--loop-cap", "100")
    assert result.returncode == 4
    assert "loop" in result.stderr


def test_limits_must_be_positive():
    result = catat("check", fixture("dot.cat"), "--max-depth", "0")
    assert result.returncode == 2  # argparse usage error
    assert "must be >= 1" in result.stderr
