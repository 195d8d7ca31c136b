"""MPS writer/reader round trips."""

import io

import numpy as np
import pytest

from adlearn.lp import EQ, GE, LE, LinearProgram, LpStatus, read_mps, solve, write_mps


def sample_lp():
    return LinearProgram(
        c=np.array([1.0, -2.0, 0.5]),
        A=np.array([[1.0, 1.0, 0.0], [0.0, 1.0, -1.0], [2.0, 0.0, 1.0]]),
        senses=[LE, GE, EQ],
        b=np.array([4.0, -1.0, 3.0]),
        lb=np.array([0.0, -1.0, 0.0]),
        ub=np.array([np.inf, 2.0, 5.0]),
        row_names=["cap", "link", "bal"],
        col_names=["g1", "g2", "g3"],
        objective_constant=1.5,
    )


def test_round_trip_structure_and_values():
    lp = sample_lp()
    buf = io.StringIO()
    write_mps(lp, buf)
    lp2, ints = read_mps(io.StringIO(buf.getvalue()))
    assert ints == []
    assert lp2.n_rows == lp.n_rows
    assert lp2.n_cols == lp.n_cols
    assert list(lp2.senses) == list(lp.senses)
    np.testing.assert_allclose(lp2.A, lp.A)
    np.testing.assert_allclose(lp2.b, lp.b)
    np.testing.assert_allclose(lp2.c, lp.c)
    np.testing.assert_allclose(lp2.lb, lp.lb)
    np.testing.assert_allclose(lp2.ub, lp.ub)
    assert lp2.objective_constant == pytest.approx(1.5)


def test_round_trip_preserves_optimum():
    lp = sample_lp()
    buf = io.StringIO()
    write_mps(lp, buf)
    lp2, _ = read_mps(io.StringIO(buf.getvalue()))
    a, b = solve(lp), solve(lp2)
    assert a.status is LpStatus.OPTIMAL and b.status is LpStatus.OPTIMAL
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_integer_markers():
    lp = LinearProgram(
        c=np.array([1.0, 1.0]),
        A=np.array([[1.0, 1.0]]),
        senses=[GE],
        b=np.array([1.0]),
        ub=np.array([1.0, 1.0]),
        col_names=["y0", "x0"],
    )
    buf = io.StringIO()
    write_mps(lp, buf, integer_cols=[0])
    text = buf.getvalue()
    assert "'INTORG'" in text and "'INTEND'" in text
    assert " BV BND" in text
    _, ints = read_mps(io.StringIO(text))
    assert ints == ["y0"]


def test_long_names_are_regenerated():
    lp = LinearProgram(
        c=np.array([1.0]),
        A=np.array([[1.0]]),
        senses=[GE],
        b=np.array([1.0]),
        col_names=["a_very_long_column_name"],
        row_names=["a_very_long_row_name"],
    )
    buf = io.StringIO()
    names = write_mps(lp, buf)
    assert all(len(n) <= 8 for n in names["cols"] + names["rows"])
    lp2, _ = read_mps(io.StringIO(buf.getvalue()))
    assert lp2.n_cols == 1 and lp2.n_rows == 1


def test_fixed_format_field_alignment():
    lp = sample_lp()
    buf = io.StringIO()
    write_mps(lp, buf)
    for line in buf.getvalue().splitlines():
        if line.startswith("    ") and not line.startswith("    MARKER"):
            # field 2 starts at column 5 (1-indexed), field 3 at 15
            assert line[4] != " "
            if len(line) > 14:
                assert line[14] != " "
