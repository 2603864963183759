"""Constellation construction, normalization and catalog I/O.

Supported families:

* ``qam``   -- square 4^n-QAM grids (4, 16, 64, 256 points) with the
  interleaved-Gray default bit mapping.
* ``apsk``  -- concentric rings of equally spaced points, e.g. DVB-S2(x)
  (4+12)-APSK.  Symbols are numbered ring by ring (inner ring first),
  counterclockwise starting at each ring's phase offset.
* ``irregular`` -- same geometry as ``apsk`` but never treated as
  hierarchy-conforming by the representation layer.

All constellations are normalized to unit average symbol energy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

QAM_ORDERS = (4, 16, 64, 256)

# Offset tolerance when deciding whether a ring sits on the pi/M grid.
_CONFORM_TOL = 1e-9


class CatalogError(ValueError):
    """Raised for malformed constellation definitions or catalog files."""


def gray_encode(k: int, width: int) -> str:
    """Reflected Gray code of ``k`` as an MSB-first bit string of ``width`` bits."""
    if width < 0:
        raise ValueError(f"width must be >= 0, got {width}")
    if k < 0 or k >= (1 << width):
        raise ValueError(f"k={k} out of range for width={width}")
    if width == 0:
        return ""
    return format(k ^ (k >> 1), f"0{width}b")


def gray_decode(bits: str) -> int:
    """Inverse of :func:`gray_encode`."""
    k = 0
    for b in bits:
        k = (k << 1) | (k & 1) ^ int(b)
    return k


@dataclass(frozen=True)
class RingSpec:
    """One circle of an APSK constellation (radius is post-normalization)."""

    radius: float
    num_points: int
    phase_offset: float

    def __post_init__(self):
        if self.radius <= 0:
            raise CatalogError(f"ring radius must be positive, got {self.radius}")
        if self.num_points < 1:
            raise CatalogError(f"ring num_points must be >= 1, got {self.num_points}")

    @property
    def conforming(self) -> bool:
        """True iff the phase offset is pi/M modulo the point spacing 2*pi/M."""
        m = self.num_points
        step = 2.0 * math.pi / m
        r = math.remainder(self.phase_offset - math.pi / m, step)
        return abs(r) < _CONFORM_TOL

    def series(self) -> tuple[int, int] | None:
        """Decompose the point count as 4*d*2^n with d odd; None if M % 4 != 0."""
        m = self.num_points
        if m % 4:
            return None
        d = m // 4
        n = 0
        while d % 2 == 0:
            d //= 2
            n += 1
        return d, n

    def angles(self) -> np.ndarray:
        k = np.arange(self.num_points)
        return self.phase_offset + 2.0 * np.pi * k / self.num_points


@dataclass(frozen=True, eq=False)
class Constellation:
    """Immutable labeled set of unit-mean-energy constellation points."""

    id: str
    points: np.ndarray
    bits_per_symbol: int
    bit_mapping: tuple[str, ...]
    family: str
    rings: tuple[RingSpec, ...] | None = None
    grid_order: int | None = None
    # ring index of each symbol, filled for ring-structured families
    ring_of_symbol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points.setflags(write=False)
        _validate_constellation(self)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def conforming(self) -> bool:
        """True iff every ring sits on the pi/M offset grid (APSK family only)."""
        if self.family != "apsk" or self.rings is None:
            return False
        return all(r.conforming and r.series() is not None for r in self.rings)

    def index_in_ring(self, symbol: int) -> int:
        if self.rings is None:
            raise ValueError(f"constellation '{self.id}' has no ring structure")
        start = 0
        for r in self.rings:
            if symbol < start + r.num_points:
                return symbol - start
            start += r.num_points
        raise ValueError(f"symbol {symbol} out of range for '{self.id}'")

    def bit_matrix(self) -> np.ndarray:
        """Bit mapping as a (num_symbols, bits_per_symbol) uint8 array."""
        return np.array([[int(c) for c in s] for s in self.bit_mapping], dtype=np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Constellation):
            return NotImplemented
        return (
            self.id == other.id
            and self.family == other.family
            and self.bit_mapping == other.bit_mapping
            and np.array_equal(self.points, other.points)
            and self.rings == other.rings
            and self.grid_order == other.grid_order
        )

    def __hash__(self):
        return hash(self.id)


def _validate_constellation(c: Constellation) -> None:
    m = len(c.points)
    if m < 2 or m & (m - 1):
        raise CatalogError(f"constellation '{c.id}': size {m} is not a power of two >= 2")
    if c.bits_per_symbol != m.bit_length() - 1:
        raise CatalogError(f"constellation '{c.id}': bits_per_symbol inconsistent with size")
    if len(c.bit_mapping) != m:
        raise CatalogError(f"constellation '{c.id}': bit_mapping must cover all {m} symbols")
    if any(len(s) != c.bits_per_symbol or set(s) - {"0", "1"} for s in c.bit_mapping):
        raise CatalogError(
            f"constellation '{c.id}': bit_mapping entries must be bit strings of length "
            f"{c.bits_per_symbol}"
        )
    if len(set(c.bit_mapping)) != m:
        raise CatalogError(f"constellation '{c.id}': bit_mapping contains duplicate bit strings")
    energy = float(np.mean(np.abs(c.points) ** 2))
    if abs(energy - 1.0) > 1e-12:
        raise CatalogError(f"constellation '{c.id}': mean symbol energy {energy!r} != 1")
    if c.family not in ("qam", "apsk", "irregular"):
        raise CatalogError(f"constellation '{c.id}': unknown family '{c.family}'")


def _default_interleaved_gray(order: int) -> list[str]:
    """Interleaved-Gray mapping for a 4^n grid in row-major (bottom-up) symbol order."""
    w = int(round(math.sqrt(order)))
    n = w.bit_length() - 1
    out = []
    for row in range(w):
        for col in range(w):
            gi = gray_encode(col, n)
            gq = gray_encode(row, n)
            out.append("".join(a + b for a, b in zip(gi, gq)))
    return out


def build_qam(order: int, id: str | None = None) -> Constellation:
    """Square 4^n-QAM with unit mean energy and interleaved-Gray default mapping.

    Grid levels are {+-1, +-3, ...} per axis before scaling.  Symbols are
    numbered row-major from the bottom-left corner (row = quadrature,
    col = in-phase), so ``points[row * w + col]``.
    """
    if order not in QAM_ORDERS:
        raise CatalogError(f"unsupported QAM order {order}; expected one of {QAM_ORDERS}")
    w = int(round(math.sqrt(order)))
    levels = 2 * np.arange(w) - (w - 1)
    scale = 1.0 / math.sqrt(2.0 * (order - 1) / 3.0)
    re, im = np.meshgrid(levels, levels)
    points = (re + 1j * im).ravel() * scale
    mapping = tuple(_default_interleaved_gray(order))
    if id is None:
        id = "qpsk" if order == 4 else f"{order}qam"
    return Constellation(
        id=id,
        points=points,
        bits_per_symbol=order.bit_length() - 1,
        bit_mapping=mapping,
        family="qam",
        grid_order=order,
    )


def build_apsk(
    id: str,
    rings: list[tuple[float, int, float]] | list[RingSpec],
    bit_mapping: list[str] | None = None,
    family: str = "apsk",
) -> Constellation:
    """Ring-structured constellation from (radius, num_points, phase_offset) triples.

    Radii may be given pre-normalization; the whole point set is jointly
    scaled to unit mean energy.  Symbols are numbered ring by ring (inner
    first), counterclockwise from each ring's phase offset.  When
    ``bit_mapping`` is omitted, symbol ``k`` is labeled ``gray_encode(k, B)``.
    """
    specs = [r if isinstance(r, RingSpec) else RingSpec(*r) for r in rings]
    if not specs:
        raise CatalogError(f"constellation '{id}': needs at least one ring")
    radii = [r.radius for r in specs]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise CatalogError(f"constellation '{id}': ring radii must be strictly increasing")
    total = sum(r.num_points for r in specs)
    if total < 2 or total & (total - 1):
        raise CatalogError(f"constellation '{id}': total point count {total} is not a power of two")
    b = total.bit_length() - 1

    energy = sum(r.num_points * r.radius**2 for r in specs) / total
    scale = 1.0 / math.sqrt(energy)
    specs = [RingSpec(r.radius * scale, r.num_points, r.phase_offset) for r in specs]

    points = np.concatenate([r.radius * np.exp(1j * r.angles()) for r in specs])
    ring_of = np.concatenate(
        [np.full(r.num_points, i, dtype=np.int64) for i, r in enumerate(specs)]
    )
    if bit_mapping is None:
        bit_mapping = [gray_encode(k, b) for k in range(total)]
    return Constellation(
        id=id,
        points=points,
        bits_per_symbol=b,
        bit_mapping=tuple(bit_mapping),
        family=family,
        rings=tuple(specs),
        ring_of_symbol=ring_of,
    )


# --- catalog files -----------------------------------------------------------

CATALOG_VERSION = 1


def constellation_to_dict(c: Constellation) -> dict:
    d: dict = {"id": c.id, "family": c.family}
    if c.family == "qam":
        d["grid_order"] = c.grid_order
        d["rings"] = []
    else:
        d["rings"] = [
            {
                "radius": r.radius,
                "num_points": r.num_points,
                "phase_offset_rad": r.phase_offset,
            }
            for r in c.rings
        ]
    d["bit_mapping"] = list(c.bit_mapping)
    return d


def _constellation_from_dict(d: dict) -> Constellation:
    if not isinstance(d, dict) or "id" not in d:
        raise CatalogError("catalog entry is missing required field 'id'")
    cid = d["id"]

    def req(fieldname, types):
        if fieldname not in d:
            raise CatalogError(f"constellation '{cid}': missing required field '{fieldname}'")
        v = d[fieldname]
        if not isinstance(v, types):
            raise CatalogError(f"constellation '{cid}': field '{fieldname}' has wrong type")
        return v

    family = req("family", str)
    mapping = d.get("bit_mapping")
    if mapping is not None and (
        not isinstance(mapping, list) or any(not isinstance(s, str) for s in mapping)
    ):
        raise CatalogError(f"constellation '{cid}': field 'bit_mapping' must be a list of strings")
    try:
        if family == "qam":
            order = req("grid_order", int)
            c = build_qam(order, id=cid)
            if mapping is not None and tuple(mapping) != c.bit_mapping:
                c = Constellation(
                    id=cid,
                    points=c.points,
                    bits_per_symbol=c.bits_per_symbol,
                    bit_mapping=tuple(mapping),
                    family="qam",
                    grid_order=order,
                )
            return c
        if family in ("apsk", "irregular"):
            rings = req("rings", list)
            specs = []
            for i, r in enumerate(rings):
                for key in ("radius", "num_points", "phase_offset_rad"):
                    if not isinstance(r, dict) or key not in r:
                        raise CatalogError(
                            f"constellation '{cid}': rings[{i}] is missing field '{key}'"
                        )
                specs.append(RingSpec(float(r["radius"]), int(r["num_points"]), float(r["phase_offset_rad"])))
            return build_apsk(cid, specs, bit_mapping=mapping, family=family)
    except CatalogError:
        raise
    except (TypeError, ValueError) as e:
        raise CatalogError(f"constellation '{cid}': {e}") from e
    raise CatalogError(f"constellation '{cid}': unknown family '{family}'")


def load_constellation_file(path: str | Path) -> list[Constellation]:
    """Load and validate a JSON constellation catalog. Empty file -> empty list."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise CatalogError(f"{path}: not valid JSON ({e})") from e
    if isinstance(raw, dict) and "constellations" in raw:
        raw = raw["constellations"]
    if not isinstance(raw, list):
        raise CatalogError(f"{path}: top level must be an array of constellation objects")
    out, seen = [], set()
    for entry in raw:
        c = _constellation_from_dict(entry)
        if c.id in seen:
            raise CatalogError(f"{path}: duplicate constellation id '{c.id}'")
        seen.add(c.id)
        out.append(c)
    return out


def write_constellation_file(constellations: list[Constellation], path: str | Path) -> None:
    """Serialize constellations; radii keep full double precision (>= 9 digits)."""
    payload = [constellation_to_dict(c) for c in constellations]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def bundled_catalog_path() -> Path:
    """Path of the catalog shipped with the package (13 constellations)."""
    return Path(__file__).parent / "data" / "catalog.json"


def bundled_extras_path() -> Path:
    """Extra constellations used for analysis only (e.g. offset 8-PSK)."""
    return Path(__file__).parent / "data" / "extras.json"


def load_catalog(paths: list[str | Path] | None = None) -> dict[str, Constellation]:
    """Load one or more catalog files into an id -> constellation table."""
    if not paths:
        paths = [bundled_catalog_path()]
    table: dict[str, Constellation] = {}
    for p in paths:
        for c in load_constellation_file(p):
            if c.id in table:
                raise CatalogError(f"duplicate constellation id '{c.id}' across catalog files")
            table[c.id] = c
    return table
