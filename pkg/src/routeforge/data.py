"""Access to the bundled benchmark files and route-count target tables."""

from __future__ import annotations

from importlib import resources

from .model import Instance, parse_solomon

# the twelve-instance short-horizon families used throughout the reports
R1 = tuple(f"R1{i:02d}" for i in range(1, 13))
C1 = tuple(f"C1{i:02d}" for i in range(1, 10))
RC1 = tuple(f"RC1{i:02d}" for i in range(1, 9))

_SCALE = 10  # benchmark files use a 10x coarser clock than the solver


def _root():
    return resources.files(__package__) / "data"


def instance_names(prefix: str = "") -> list[str]:
    names = []
    for entry in (_root() / "solomon").iterdir():
        if entry.name.endswith(".txt"):
            stem = entry.name[:-4]
            if stem.upper().startswith(prefix.upper()):
                names.append(stem)
    return sorted(names)


def load_text(name: str) -> str:
    f = _root() / "solomon" / f"{name.upper()}.txt"
    try:
        return f.read_text()
    except FileNotFoundError:
        raise KeyError(f"no bundled instance named {name!r}") from None


def load_instance(name: str, scale: float = _SCALE) -> Instance:
    return parse_solomon(load_text(name), scale=scale)


def load_instances(names, scale: float = _SCALE) -> list[Instance]:
    return [load_instance(n, scale) for n in names]


def parse_eopt(text: str) -> dict[str, int]:
    """Read a route-target table: one `NAME COUNT` pair per line, # comments."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad route-target line: {raw!r}")
        out[parts[0].upper()] = int(parts[1])
    return out


def default_eopt() -> dict[str, int]:
    return parse_eopt((_root() / "eopt_default.txt").read_text())
