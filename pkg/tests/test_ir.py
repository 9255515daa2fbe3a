import pytest

from tinyquant.ir import DSLError, ShapeError, check_shapes, linearize, parse

PROC1 = """\
param W1 : R[1][2] = W1
param B1 : R[1][1] = B1
input X1 : R[2][1]
return W1 * X1 + B1
"""


def test_procedure_one_parses_into_two_bindings():
    p = parse(PROC1)
    assert [(b.name, b.op, b.srcs) for b in p.body] == [("t1", "matmul", ("W1", "X1")), ("t2", "add", ("t1", "B1"))]
    assert p.output == "t2"
    assert p.param_names == ("W1", "B1")
    assert p.input.name == "X1"
    assert p.shapes["t2"] == (1, 1)


def test_linearize_appends_return():
    instrs = linearize(parse(PROC1))
    assert [(i.index, i.op, i.dest, i.srcs) for i in instrs] == [
        (0, "matmul", "t1", ("W1", "X1")),
        (1, "add", "t2", ("t1", "B1")),
        (2, "return", None, ("t2",)),
    ]


def test_single_binding_and_long_chain():
    p = parse("input x : R[3][1]\nlet y = relu(x)\nreturn y\n")
    assert len(linearize(p)) == 2
    src = "input x : R[3][1]\n" + "".join(f"let a{i} = tanh({'x' if i == 0 else f'a{i - 1}'})\n" for i in range(10))
    instrs = linearize(parse(src + "return a9\n"))
    assert [i.index for i in instrs] == list(range(11))


def test_operators_and_literals():
    p = parse(
        "param W : R[2][2] = w\ninput x : R[2][1]\n"
        "let h = sigmoid(W * x) <*> x - 0.5 * x\n"
        "let e = exp(reshape(h, 1, 2))\n"
        "return argmax(e)\n"
    )
    ops = [b.op for b in p.body]
    assert ops == ["matmul", "sigmoid", "hadamard", "smul", "sub", "reshape", "exp", "argmax"]
    assert p.body[3].const == 0.5
    assert p.shapes[p.output] == (1,)
    assert p.is_classifier


def test_round_trip():
    for src in (PROC1, "input x : R[2][2]\nlet y = 2 * x + x <*> x\nreturn tanh(y)\n"):
        p = parse(src)
        assert parse(p.format()) == p


@pytest.mark.parametrize(
    "src,fragment",
    [
        ("", "no output"),
        ("input x : R[1][1]\nreturn Q\n", "Q"),
        ("input x : R[1][1]\nlet x = relu(x)\nreturn x\n", "x"),
        ("input x : R[1][1]\nlet y = relu(x\nreturn y\n", ""),
        ("param w : R[1][1] = k\nfoo bar\nreturn w\n", ""),
    ],
)
def test_parse_errors(src, fragment):
    with pytest.raises(DSLError) as info:
        parse(src)
    assert fragment in str(info.value)


def test_error_carries_position():
    with pytest.raises(DSLError) as info:
        parse("input x : R[1][1]\nlet y = relu(z)\nreturn y\n")
    assert info.value.line == 2


def test_shape_checks():
    ok = parse("param a : R[2][2] = a\nparam b : R[2][2] = b\nreturn a + b\n")
    assert check_shapes(ok)[ok.output] == (2, 2)
    with pytest.raises(ShapeError) as info:
        parse("param a : R[1][2] = a\nparam b : R[3][1] = b\nreturn a * b\n")
    assert "a" in str(info.value) and "b" in str(info.value)
    with pytest.raises(ShapeError):
        parse("param a : R[2][2] = a\nparam b : R[2][1] = b\nreturn a + b\n")
