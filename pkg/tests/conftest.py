import shutil

import pytest

from fuzzaug.harvest import TestCasePair
from fuzzaug.targets import scripted_target

# library class, not a test case, despite the Test* name
TestCasePair.__test__ = False

# --- C++ fixture sources ----------------------------------------------------

HELLO_CPP = """\
#include <cstdio>
int main() {
    printf("hello\\n");
    return 0;
}
"""

ECHO_CPP = """\
#include <cstdio>
int main() {
    int c;
    while ((c = getchar()) != EOF) putchar(c);
    return 0;
}
"""

ADDER_CPP = """\
#include <cstdio>
int main() {
    long long a, b;
    if (scanf("%lld %lld", &a, &b) == 2) printf("%lld\\n", a + b);
    return 0;
}
"""

HANG_CPP = """\
#include <cstdio>
int main() {
    volatile int x = 1;
    while (x) {}
    return 0;
}
"""

CRASH_CPP = """\
#include <cstdio>
int main() {
    int c = getchar();
    if (c == 'X') {
        volatile int *p = 0;
        *p = 1;
    }
    printf("%d\\n", c);
    return 0;
}
"""

# Level i is gated on byte i matching a guard constant.  The guards alternate
# 127/255: single-site deterministic substitutions reach each value, but a
# coverage-blind mutator has to guess every prefix byte at once.
STAIR_GUARDS = (127, 255, 127, 255, 127, 255, 127, 255)

STAIRCASE_CPP = """\
#include <cstdio>
int main() {
    unsigned char b[8] = {0};
    fread(b, 1, 8, stdin);
    int depth = 0;
    if (b[0] == 127) { depth = 1;
    if (b[1] == 255) { depth = 2;
    if (b[2] == 127) { depth = 3;
    if (b[3] == 255) { depth = 4;
    if (b[4] == 127) { depth = 5;
    if (b[5] == 255) { depth = 6;
    if (b[6] == 127) { depth = 7;
    if (b[7] == 255) { depth = 8;
    }}}}}}}}
    printf("%d\\n", depth);
    return 0;
}
"""


# --- scripted targets --------------------------------------------------------

def staircase_depth(data: bytes) -> int:
    depth = 0
    for i, guard in enumerate(STAIR_GUARDS):
        if len(data) > i and data[i] == guard:
            depth += 1
        else:
            break
    return depth


def staircase_fn(data: bytes):
    """Edges 100..100+d mark reached staircase depth d; edge 0 is main.

    Depth edges fire only for exactly 8-byte inputs.  Deterministic stages
    preserve input length, so a guided campaign seeded with 8 bytes still
    walks every level; a blind mutator must keep the length intact *and*
    guess the guard prefix in one shot.
    """
    d = staircase_depth(data) if len(data) == len(STAIR_GUARDS) else 0
    edges = [0] + [100 + k for k in range(1, d + 1)]
    return edges, f"{d}\n".encode(), "ok"


def echo_fn(data: bytes):
    """Branchless: identical coverage for every input."""
    return [0, 1, 2], data, "ok"


def crashy_fn(data: bytes):
    if data.startswith(b"X"):
        return [], b"", "crash"
    return [0, 1], data[:4], "ok"


@pytest.fixture
def staircase_target():
    return scripted_target("staircase", staircase_fn)


@pytest.fixture
def echo_target():
    return scripted_target("echo", echo_fn)


@pytest.fixture
def crashy_target():
    return scripted_target("crashy", crashy_fn)


def require_compiler(*names):
    missing = [n for n in names if shutil.which(n) is None]
    if missing:
        pytest.skip(f"compiler(s) not available: {missing}")


@pytest.fixture
def fixture_corpus_root(tmp_path):
    """Mini POJ-style corpus: 2 problems x 3 programs."""
    sources = {
        "1": [HELLO_CPP, ECHO_CPP, ADDER_CPP],
        "2": [HELLO_CPP, ADDER_CPP, ECHO_CPP],
    }
    root = tmp_path / "corpus"
    for problem, progs in sources.items():
        d = root / problem
        d.mkdir(parents=True)
        for i, src in enumerate(progs):
            (d / f"{i}.cpp").write_text(src)
    return root
