"""Parser, distance and instance invariants."""

import math
import random

import pytest

from routeforge import data
from routeforge.model import Instance, ParseError, distance, parse_solomon

MINIMAL = """\
TINY

VEHICLE
NUMBER     CAPACITY
   2          50

CUSTOMER
CUST NO.   XCOORD.   YCOORD.    DEMAND   READY TIME   DUE DATE   SERVICE TIME

    0         10        10          0         0        100          0
    1         13        14          5        10         60          7
"""


def test_parse_r101():
    inst = data.load_instance("R101")
    assert inst.id == "R101"
    assert inst.n == 100
    assert inst.C == 200
    assert inst.fleet_limit == 25
    # clock is 10x finer than the file: depot horizon 230 -> 2300
    assert inst.a[0] == 0 and inst.b[0] == 2300
    assert inst.coords[0] == (350, 350)
    assert inst.coords[1] == (410, 490)
    assert inst.c[1] == 10 and inst.a[1] == 1610 and inst.b[1] == 1710
    assert inst.d[1] == 100
    assert inst.sum_d == 100 * 100
    assert inst.E_opt is None


def test_parse_unscaled():
    inst = parse_solomon(data.load_text("R101"), scale=1)
    assert inst.b[0] == 230
    assert inst.coords[0] == (35, 35)
    assert inst.sum_d == 1000


def test_parse_minimal():
    inst = parse_solomon(MINIMAL, scale=1)
    assert inst.id == "TINY"
    assert inst.n == 1
    assert inst.C == 50 and inst.fleet_limit == 2
    assert inst.c == [0, 5]
    assert inst.d == [0, 7]
    assert inst.a == [0, 10] and inst.b == [100, 60]
    assert inst.dist[0][1] == 5.0


def test_parse_all_bundled():
    names = data.instance_names()
    assert len(names) == 56
    for name in data.R1 + data.C1 + data.RC1:
        inst = data.load_instance(name)
        assert inst.n == 100
        assert inst.C == 200
        assert inst.fleet_limit == 25


def _edit_row(text, row_id, col, value):
    out = []
    in_table = False
    for ln in text.splitlines():
        parts = ln.split()
        if in_table and parts and parts[0] == str(row_id):
            parts[col] = str(value)
            ln = "   ".join(parts)
        if "CUST NO" in ln.upper():
            in_table = True
        out.append(ln)
    return "\n".join(out) + "\n"


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_solomon("")
    with pytest.raises(ParseError) as err:
        parse_solomon(_edit_row(MINIMAL, 1, 4, 70))  # READY after DUE
    assert "before READY TIME" in str(err.value)
    with pytest.raises(ParseError):
        parse_solomon(_edit_row(MINIMAL, 0, 3, 9))  # loaded depot
    dup = MINIMAL + "1 13 14 5 10 60 7\n"
    with pytest.raises(ParseError) as err:
        parse_solomon(dup)
    assert "duplicate" in str(err.value)
    with pytest.raises(ParseError) as err:
        parse_solomon(_edit_row(MINIMAL, 1, 2, "xx"))
    assert err.value.line is not None
    with pytest.raises(ParseError):
        parse_solomon(MINIMAL.replace("VEHICLE", "SECTION"))


def test_instance_invariants():
    with pytest.raises(ParseError):
        Instance("X", [(0, 0), (1, 1)], [0, 60], [0, 0], [0, 0], [10, 10], 50, 2)
    with pytest.raises(ParseError):
        Instance("X", [(0, 0), (1, 1)], [0, 5], [0, 0], [0, 9], [10, 4], 50, 2)
    with pytest.raises(ParseError):
        Instance("X", [(0, 0), (1, 1)], [3, 5], [0, 0], [0, 0], [10, 10], 50, 2)


def test_distance():
    inst = parse_solomon(MINIMAL, scale=1)
    assert distance(inst, 0, 0) == 0.0
    assert distance(inst, 0, 1) == 5.0
    with pytest.raises(ValueError):
        distance(inst, 0, 2)
    rng = random.Random(4242)
    r101 = data.load_instance("R101")
    for _ in range(200):
        i = rng.randrange(0, 101)
        j = rng.randrange(0, 101)
        dij = distance(r101, i, j)
        assert dij == distance(r101, j, i)
        assert dij >= 0.0
        xi, yi = r101.coords[i]
        xj, yj = r101.coords[j]
        assert dij == pytest.approx(math.hypot(xi - xj, yi - yj), abs=1e-12)


def test_triangle_inequality():
    r101 = data.load_instance("R101")
    rng = random.Random(7)
    for _ in range(500):
        i, j, k = (rng.randrange(0, 101) for _ in range(3))
        assert r101.dist[i][k] <= r101.dist[i][j] + r101.dist[j][k] + 1e-9


def test_neighbors():
    inst = data.load_instance("R101")
    nb = inst.neighbors(10)
    assert len(nb) == 101
    for i in (0, 1, 57, 100):
        lst = nb[i]
        assert len(lst) == 10
        assert i not in lst
        ds = [inst.dist[i][j] for j in lst]
        assert ds == sorted(ds)
        # nothing outside the list is closer than the last member
        worst = ds[-1]
        outside = [j for j in range(1, 101) if j != i and j not in lst]
        assert all(inst.dist[i][j] >= worst - 1e-9 for j in outside)


def test_eopt_table():
    table = data.default_eopt()
    assert table["R101"] == 19
    assert table["C101"] == 10
    assert table["RC101"] == 14
    for name in data.R1 + data.C1 + data.RC1:
        assert name in table
