import pytest

from fuzzaug.targets import (BuildError, ExecError, Target, build, execute,
                             scripted_target)

from conftest import (CRASH_CPP, ECHO_CPP, HANG_CPP, HELLO_CPP, echo_fn,
                      require_compiler)


@pytest.fixture(autouse=True)
def _need_compilers():
    require_compiler("clang++", "clang", "g++")


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    """Compile the binary fixtures once."""
    require_compiler("clang++", "clang", "g++")
    root = tmp_path_factory.mktemp("targets")
    out = {}
    for name, src in [("hello", HELLO_CPP), ("echo", ECHO_CPP),
                      ("crash", CRASH_CPP)]:
        out[name] = build(name, src, root / name, instrumented=True)
    hang_cfg = None
    from fuzzaug.targets import BuildConfig
    hang_cfg = BuildConfig(timeout_ms=300)
    out["hang"] = build("hang", HANG_CPP, root / "hang", hang_cfg,
                        instrumented=True, smoke_run=False)
    out["echo_plain"] = build("echo", ECHO_CPP, root / "echo_plain",
                              instrumented=False)
    return out


class TestBuildExecute:
    def test_hello_world_coverage(self, built):
        res = execute(built["hello"], b"")
        assert res.status == "ok"
        assert res.stdout == b"hello\n"
        assert len(res.coverage.nonzero()) > 0

    def test_echo_roundtrip(self, built):
        res = execute(built["echo"], b"7\n")
        assert res.status == "ok"
        assert res.stdout == b"7\n"

    def test_stdout_byte_faithful(self, built):
        payload = b"a\r\nb\x00zzz"
        res = execute(built["echo"], payload)
        assert res.stdout == payload

    def test_hang_at_timeout(self, built):
        res = execute(built["hang"], b"x")
        assert res.status == "hang"
        assert res.exec_time_ms >= built["hang"].timeout_ms

    def test_crash_on_signal(self, built):
        res = execute(built["crash"], b"X")
        assert res.status == "crash"
        res = execute(built["crash"], b"y")
        assert res.status == "ok"

    def test_coverage_deterministic(self, built):
        a = execute(built["echo"], b"same input")
        b_ = execute(built["echo"], b"same input")
        assert a.coverage.signature() == b_.coverage.signature()

    def test_plain_target_has_no_coverage(self, built):
        res = execute(built["echo_plain"], b"hi")
        assert res.coverage is None
        assert res.stdout == b"hi"

    def test_build_error_carries_compiler_output(self, tmp_path):
        with pytest.raises(BuildError) as ei:
            build("bad", "int main( {", tmp_path / "bad")
        assert "error" in str(ei.value)

    def test_input_length_cap(self, built):
        with pytest.raises(ValueError):
            execute(built["echo"], b"x" * 100, max_input_len=10)


class TestScriptedTargets:
    def test_passthrough(self):
        t = scripted_target("echo", echo_fn)
        assert t.kind == "scripted"
        res = execute(t, b"abc")
        assert res.status == "ok"
        assert res.stdout == b"abc"
        assert set(res.coverage.nonzero()) == {0, 1, 2}

    def test_bad_status_is_exec_error(self):
        t = scripted_target("bad", lambda d: ([], b"", "weird"))
        with pytest.raises(ExecError):
            execute(t, b"")

    def test_timeout_must_be_positive(self):
        with pytest.raises(ValueError):
            Target(program_id="x", kind="scripted", invocation=echo_fn,
                   timeout_ms=0)

    def test_binary_target_must_exist(self, tmp_path):
        with pytest.raises(ValueError):
            Target(program_id="x", kind="instrumented_binary",
                   invocation=tmp_path / "nope")
