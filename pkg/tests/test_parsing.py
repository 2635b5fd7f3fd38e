import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeconv.errors import InvalidParameter, ParseError
from freeconv.measures import Atoms, Cauchy, Empirical, MarchenkoPastur, Semicircle, quantize, scale, shift
from freeconv.parsing import format_measure, parse_measure_spec, read_reals


def test_examples():
    assert parse_measure_spec("semicircle(var=1)") == Semicircle(1.0)
    assert parse_measure_spec("atoms(-1:0.5,1:0.5)") == Atoms((-1.0, 1.0), (0.5, 0.5))
    assert parse_measure_spec("mp(lambda=2)") == MarchenkoPastur(2.0)
    assert parse_measure_spec("cauchy(gamma=0.5)") == Cauchy(0.5)
    assert parse_measure_spec(" shift( scale(semicircle(var=1), 2) , -0.5 ) ") == shift(scale(Semicircle(1.0), 2.0), -0.5)
    assert parse_measure_spec("quantize(semicircle(var=1),10)") == quantize(Semicircle(1.0), 10)
    assert parse_measure_spec("atoms(1:0.5,-1:0.5)") == Atoms((-1.0, 1.0), (0.5, 0.5))


def test_weights_must_sum_to_one():
    with pytest.raises(ParseError) as exc:
        parse_measure_spec("atoms(-1:0.5,1:0.6)")
    assert exc.value.offset == 0
    assert "1.1" in str(exc.value)


@pytest.mark.parametrize(
    "text, offset",
    [
        ("", 0),
        ("gauss(var=1)", 0),
        ("semicircle(var=1", 16),
        ("semicircle(sigma=1)", 11),
        ("semicircle(var=x)", 15),
        ("atoms(0:1) extra", 11),
        ("scale(semicircle(var=1) 2)", 24),
        ("semicircle(var=-1)", 0),
        ("shift(mp(lambda=0.5),1)", 6),
        ("quantize(semicircle(var=1),1)", 0),
    ],
)
def test_error_offsets(text, offset):
    with pytest.raises(ParseError) as exc:
        parse_measure_spec(text)
    assert exc.value.offset == offset
    assert exc.value.expected


def test_empirical_file(tmp_path):
    f = tmp_path / "eigs.txt"
    f.write_text("1.5\n-0.5\n\n2.0\n")
    m = parse_measure_spec("empirical(@eigs.txt)", base_dir=tmp_path)
    assert isinstance(m, Empirical)
    assert np.array_equal(np.sort(m.samples), [-0.5, 1.5, 2.0])
    assert np.array_equal(read_reals(f), [1.5, -0.5, 2.0])
    with pytest.raises(ParseError, match="cannot read"):
        parse_measure_spec("empirical(@missing.txt)", base_dir=tmp_path)
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\nabc\n")
    with pytest.raises(InvalidParameter, match=":2:"):
        read_reals(bad)


_reals = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
_positive = st.floats(1e-3, 50, allow_nan=False, allow_infinity=False)


@st.composite
def _atoms(draw):
    xs = draw(st.lists(_reals, min_size=1, max_size=6, unique=True))
    ws = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(xs), max_size=len(xs))))
    ws = ws / ws.sum()
    order = np.argsort(xs)
    return Atoms(tuple(float(xs[i]) for i in order), tuple(float(ws[i]) for i in order))


_leaves = st.one_of(
    _positive.map(Semicircle),
    st.floats(1.0, 10.0).map(MarchenkoPastur),
    _positive.map(Cauchy),
    _atoms(),
)


_measures = st.recursive(
    _leaves,
    lambda inner: st.one_of(
        st.tuples(inner, _positive).map(lambda p: scale(*p)),
        st.tuples(inner, _reals).map(lambda p: shift(*p)),
    ),
    max_leaves=4,
)


@settings(max_examples=200, deadline=None)
@given(_measures)
def test_round_trip(m):
    text = format_measure(m)
    assert parse_measure_spec(text) == m
    assert format_measure(parse_measure_spec(text)) == text
