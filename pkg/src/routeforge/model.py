"""Problem data model and benchmark-file ingestion.

The file format is the classic whitespace-separated layout: a name line,
a VEHICLE section (NUMBER, CAPACITY) and a CUSTOMER table whose row 0 is
the depot. All quantities that measure time or length (coordinates,
window bounds, service durations) are multiplied by `scale` on ingestion
so that one distance unit stays comparable with the thresholds used by
the search operators; loads and capacity are never scaled.
"""

from __future__ import annotations

import math


class ParseError(ValueError):
    """Raised for malformed instance files; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Instance:
    """Immutable routing problem: geometry, loads, durations, windows."""

    __slots__ = (
        "id", "n", "coords", "c", "d", "a", "b", "C", "fleet_limit",
        "E_opt", "dist", "sum_d", "d_max", "_neighbors",
    )

    def __init__(self, id, coords, loads, durations, tw_open, tw_close,
                 capacity, fleet_limit, E_opt=None):
        self.id = id
        self.n = len(coords) - 1
        self.coords = coords
        self.c = loads
        self.d = durations
        self.a = tw_open
        self.b = tw_close
        self.C = capacity
        self.fleet_limit = fleet_limit
        self.E_opt = E_opt
        self._check()
        self.dist = self._distance_matrix()
        self.sum_d = sum(durations)
        self.d_max = max((max(row) for row in self.dist), default=0.0)
        self._neighbors = None

    def _check(self):
        if self.n < 1:
            raise ParseError("instance needs at least one customer")
        if self.c[0] != 0 or self.d[0] != 0:
            raise ParseError("depot must have zero load and zero duration")
        for i in range(self.n + 1):
            if self.a[i] < 0 or self.a[i] > self.b[i]:
                raise ParseError(f"customer {i}: window [{self.a[i]}, {self.b[i]}] invalid")
            if self.c[i] < 0 or self.d[i] < 0:
                raise ParseError(f"customer {i}: negative load or duration")
            if self.c[i] > self.C:
                raise ParseError(f"customer {i}: load {self.c[i]} exceeds capacity {self.C}")

    def _distance_matrix(self):
        pts = self.coords
        m = len(pts)
        rows = []
        for i in range(m):
            xi, yi = pts[i]
            row = [0.0] * m
            for j in range(m):
                if j != i:
                    dx = xi - pts[j][0]
                    dy = yi - pts[j][1]
                    row[j] = math.sqrt(dx * dx + dy * dy)
            rows.append(row)
        return rows

    def neighbors(self, k=10):
        """k nearest customers of each node, by distance, id tie-break."""
        if self._neighbors is None or len(self._neighbors[1]) != min(k, self.n - 1):
            dist = self.dist
            out = [None] * (self.n + 1)
            for i in range(self.n + 1):
                order = sorted((j for j in range(1, self.n + 1) if j != i),
                               key=lambda j: (dist[i][j], j))
                out[i] = order[:k]
            self._neighbors = out
        return self._neighbors


def distance(inst: Instance, i: int, j: int) -> float:
    if not (0 <= i <= inst.n and 0 <= j <= inst.n):
        raise ValueError(f"node id out of range: ({i},{j}) with n={inst.n}")
    return inst.dist[i][j]


def parse_solomon(text: str, scale: float = 10) -> Instance:
    """Parse an instance file into an Instance, scaling time-like fields."""
    lines = text.splitlines()
    name = None
    vehicle_at = None
    header_at = None
    for idx, raw in enumerate(lines):
        s = raw.strip()
        if not s:
            continue
        if name is None:
            name = s.split()[0]
            continue
        u = s.upper()
        if u.startswith("VEHICLE"):
            vehicle_at = idx
        if "CUST" in u and "XCOORD" in u:
            header_at = idx
            break
    if name is None:
        raise ParseError("empty file")
    if vehicle_at is None or header_at is None:
        raise ParseError("missing VEHICLE or CUSTOMER header section")

    fleet_limit = capacity = None
    for idx in range(vehicle_at + 1, header_at):
        parts = lines[idx].split()
        if len(parts) == 2 and not parts[0].upper().startswith("NUM"):
            try:
                fleet_limit = int(float(parts[0]))
                capacity = int(float(parts[1]))
            except ValueError:
                raise ParseError("vehicle NUMBER/CAPACITY not numeric", idx + 1)
            break
    if fleet_limit is None:
        raise ParseError("vehicle NUMBER/CAPACITY row not found", vehicle_at + 1)

    rows = {}
    for idx in range(header_at + 1, len(lines)):
        parts = lines[idx].split()
        if not parts:
            continue
        if len(parts) != 7:
            raise ParseError(f"expected 7 columns, got {len(parts)}", idx + 1)
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            raise ParseError(f"non-numeric field in {parts!r}", idx + 1)
        cid = int(vals[0])
        if cid != vals[0]:
            raise ParseError(f"customer id {vals[0]} not an integer", idx + 1)
        if cid in rows:
            raise ParseError(f"duplicate customer id {cid}", idx + 1)
        x, y, demand, ready, due, service = vals[1:]
        if due < ready:
            raise ParseError(f"customer {cid}: DUE DATE {due} before READY TIME {ready}", idx + 1)
        if cid == 0 and demand != 0:
            raise ParseError("depot row has nonzero demand", idx + 1)
        rows[cid] = (x, y, demand, ready, due, service)

    if 0 not in rows:
        raise ParseError("no depot row (customer 0)")
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        raise ParseError(f"customer ids not contiguous: {ids[:5]}...")

    coords, loads, durations, tw_open, tw_close = [], [], [], [], []
    for cid in ids:
        x, y, demand, ready, due, service = rows[cid]
        coords.append((x * scale, y * scale))
        loads.append(demand)
        durations.append(service * scale)
        tw_open.append(ready * scale)
        tw_close.append(due * scale)
    return Instance(name, coords, loads, durations, tw_open, tw_close,
                    capacity, fleet_limit)
