"""Global hierarchical bit-representation layout shared across constellations.

The layout allocates, in canonical order:

1. two quadrant bits (bit 0 = [Re > 0], bit 1 = [Im > 0]);
2. one shared block of interleaved-Gray bits sized for the largest
   4^n-QAM present (a 4^k-QAM uses the first 2(k-1) of them);
3. per odd-``d`` ring series (rings of 4*d*2^n points with a pi/M phase
   offset): Gray selector bits over the ``d`` base sectors of a quadrant
   plus one half-split refinement bit per hierarchy level;
4. per multi-ring constellation: Gray ring-label bits, smallest radius
   first;
5. per non-conforming constellation: its payload bits appended verbatim.

Each symbol gets a code over the subset of positions it actually uses
(its "used mask"); bits outside the mask carry no meaning for that
symbol and are excluded from losses and probabilities downstream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, gray_encode

_QUADRANT_BITS = {0: (1, 1), 1: (0, 1), 2: (0, 0), 3: (1, 0)}


class LayoutError(ValueError):
    """Raised when a constellation cannot be expressed in a layout."""


@dataclass(frozen=True)
class Segment:
    """Contiguous run of representation bits with one role."""

    kind: str  # quadrant | qam | series_selector | series_refine | ring_label | flat
    start: int
    length: int
    d: int | None = None
    level: int | None = None  # refinement level, 1-based (series_refine only)
    constellation_id: str | None = None

    @property
    def key(self) -> tuple:
        return (self.kind, self.d, self.level, self.constellation_id)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "start": self.start, "length": self.length}
        if self.d is not None:
            out["d"] = self.d
        if self.level is not None:
            out["level"] = self.level
        if self.constellation_id is not None:
            out["constellation_id"] = self.constellation_id
        return out


@dataclass(frozen=True, eq=False)
class SymbolCodes:
    """Per-symbol representation codes of one constellation.

    ``code[s, k]`` is the bit value at global position ``k``; it is only
    meaningful where ``used[s, k]`` is True.
    """

    code: np.ndarray  # (M, R) uint8
    used: np.ndarray  # (M, R) bool

    def __post_init__(self):
        self.code.setflags(write=False)
        self.used.setflags(write=False)

    @property
    def union_mask(self) -> np.ndarray:
        return self.used.any(axis=0)

    def code_strings(self) -> list[str]:
        """Render codes as strings with '-' at unused positions."""
        out = []
        for c, u in zip(self.code, self.used):
            out.append("".join(str(int(b)) if un else "-" for b, un in zip(c, u)))
        return out


def qam_repr_code(constellation: Constellation, symbol: int) -> str:
    """Interleaved-Gray code i1 q1 i2 q2 ... of a square-QAM symbol.

    Column (left to right) and row (bottom to top) indices are Gray
    encoded and interleaved, so the first 2k bits equal the 4^k-QAM code
    of the enclosing macro-cell.
    """
    if constellation.family != "qam" or constellation.grid_order is None:
        raise LayoutError(f"'{constellation.id}' is not a square QAM constellation")
    w = int(round(math.sqrt(constellation.grid_order)))
    n = w.bit_length() - 1
    row, col = divmod(symbol, w)
    gi = gray_encode(col, n)
    gq = gray_encode(row, n)
    return "".join(a + b for a, b in zip(gi, gq))


@dataclass(frozen=True)
class AngularCode:
    """Selector + refinement bits of one point on a conforming ring."""

    selector: str  # Gray code of the base sector, '' when d == 1
    refine: str  # MSB-first half-split bits, one per used level
    n_max: int  # refinement slots available in the series

    def padded(self) -> str:
        return self.refine + "-" * (self.n_max - len(self.refine))

    @property
    def used_levels(self) -> int:
        return len(self.refine)


def apsk_angular_code(d: int, n_ring: int, n_max: int, angular_index: int) -> AngularCode:
    """Code of point ``angular_index`` (counterclockwise within its quadrant)
    on a ring of 4*d*2^n_ring points.

    The quadrant is divided into ``d`` equal base sectors (Gray-coded
    selector); each refinement level halves the sector containing the
    point, with bit 1 picking the counterclockwise half.
    """
    if d < 1 or d % 2 == 0:
        raise ValueError(f"series base d must be odd and positive, got {d}")
    if n_ring < 0 or n_ring > n_max:
        raise ValueError(f"need 0 <= n_ring <= n_max, got n_ring={n_ring}, n_max={n_max}")
    per_quadrant = d << n_ring
    if not 0 <= angular_index < per_quadrant:
        raise ValueError(f"angular_index {angular_index} out of range [0, {per_quadrant})")
    sel_width = (d - 1).bit_length()
    base = angular_index >> n_ring
    m = angular_index & ((1 << n_ring) - 1)
    refine = format(m, f"0{n_ring}b") if n_ring else ""
    return AngularCode(gray_encode(base, sel_width), refine, n_max)


@dataclass(eq=False)
class RepresentationLayout:
    """Bit allocation plus per-constellation symbol codes and masks."""

    total_bits: int
    segments: tuple[Segment, ...]
    per_constellation: dict[str, SymbolCodes]
    flat_all: bool = False
    _segment_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._segment_index = {s.key: s for s in self.segments}

    def segment(self, kind: str, **qual) -> Segment | None:
        key = (kind, qual.get("d"), qual.get("level"), qual.get("constellation_id"))
        return self._segment_index.get(key)

    def mask(self, constellation_id: str) -> np.ndarray:
        """Union of the per-symbol used masks of one constellation."""
        return self.per_constellation[constellation_id].union_mask

    def codes_for(self, constellation: Constellation) -> SymbolCodes:
        """Codes of ``constellation`` under this layout.

        Falls back to projecting the constellation onto the existing
        segments when it was not part of the build set; this is how a
        model trained on one set is evaluated on hierarchy-compatible
        constellations it never saw.
        """
        got = self.per_constellation.get(constellation.id)
        if got is not None:
            return got
        return _codes_for(constellation, self, flat=self.flat_all)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "total_bits": self.total_bits,
            "flat_all": self.flat_all,
            "segments": [s.to_dict() for s in self.segments],
            "constellations": {
                cid: {
                    "mask": [int(i) for i in np.flatnonzero(sc.union_mask)],
                    "codes": sc.code_strings(),
                }
                for cid, sc in sorted(self.per_constellation.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @property
    def layout_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def layout_from_dict(d: dict, catalog: dict[str, Constellation]) -> RepresentationLayout:
    """Rebuild a layout from its JSON dump, reusing catalog constellations."""
    if d.get("version") != 1:
        raise LayoutError(f"unsupported layout dump version {d.get('version')!r}")
    segments = tuple(
        Segment(
            kind=s["kind"],
            start=s["start"],
            length=s["length"],
            d=s.get("d"),
            level=s.get("level"),
            constellation_id=s.get("constellation_id"),
        )
        for s in d["segments"]
    )
    layout = RepresentationLayout(d["total_bits"], segments, {}, flat_all=d["flat_all"])
    for cid in d["constellations"]:
        if cid not in catalog:
            raise LayoutError(f"layout references unknown constellation '{cid}'")
        layout.per_constellation[cid] = _codes_for(catalog[cid], layout, flat=layout.flat_all)
    rebuilt = {
        cid: {"mask": [int(i) for i in np.flatnonzero(sc.union_mask)], "codes": sc.code_strings()}
        for cid, sc in sorted(layout.per_constellation.items())
    }
    if rebuilt != d["constellations"]:
        raise LayoutError("layout dump codes do not match the supplied catalog")
    return layout


def _series_of(constellation: Constellation) -> list[tuple[int, int]]:
    """(d, n) of every ring; raises if the constellation is not conforming."""
    out = []
    for r in constellation.rings:
        s = r.series()
        if s is None or not r.conforming:
            raise LayoutError(f"ring of {r.num_points} points in '{constellation.id}' not conforming")
        out.append(s)
    return out


def _qam_n(constellation: Constellation) -> int:
    return (int(round(math.sqrt(constellation.grid_order)))).bit_length() - 1


def build_layout(
    constellations: list[Constellation], flat_all: bool = False
) -> RepresentationLayout:
    """Allocate the shared representation for a constellation set.

    With ``flat_all`` every constellation gets only its own payload bits
    (the naive appending baseline); no quadrant or hierarchy bits are
    allocated at all.
    """
    ids = [c.id for c in constellations]
    if len(set(ids)) != len(ids):
        raise LayoutError("constellation ids must be unique")
    by_id = sorted(constellations, key=lambda c: c.id)

    segments: list[Segment] = []
    cursor = 0

    def alloc(kind, length, **qual):
        nonlocal cursor
        if length <= 0:
            return
        segments.append(Segment(kind, cursor, length, **qual))
        cursor += length

    if not flat_all:
        alloc("quadrant", 2)
        qam_n = [_qam_n(c) for c in constellations if c.family == "qam"]
        if qam_n:
            alloc("qam", 2 * (max(qam_n) - 1))
        series: dict[int, int] = {}
        for c in by_id:
            if c.family == "apsk" and c.conforming:
                for d, n in _series_of(c):
                    series[d] = max(series.get(d, -1), n)
        for d in sorted(series):
            alloc("series_selector", (d - 1).bit_length(), d=d)
            for level in range(1, series[d] + 1):
                alloc("series_refine", 1, d=d, level=level)
        for c in by_id:
            if c.family == "apsk" and c.conforming and len(c.rings) > 1:
                alloc("ring_label", (len(c.rings) - 1).bit_length(), constellation_id=c.id)
        for c in by_id:
            if c.family != "qam" and not (c.family == "apsk" and c.conforming):
                alloc("flat", c.bits_per_symbol, constellation_id=c.id)
    else:
        for c in by_id:
            alloc("flat", c.bits_per_symbol, constellation_id=c.id)

    layout = RepresentationLayout(cursor, tuple(segments), {}, flat_all=flat_all)
    for c in constellations:
        layout.per_constellation[c.id] = _codes_for(c, layout, flat=flat_all)
    return layout


def _codes_for(
    constellation: Constellation, layout: RepresentationLayout, flat: bool = False
) -> SymbolCodes:
    """Compute per-symbol codes of one constellation against a layout."""
    m = constellation.size
    r = layout.total_bits
    code = np.zeros((m, r), dtype=np.uint8)
    used = np.zeros((m, r), dtype=bool)

    def put(sym, seg, offset, bit):
        pos = seg.start + offset
        code[sym, pos] = bit
        used[sym, pos] = True

    def need(kind, **qual):
        seg = layout.segment(kind, **qual)
        if seg is None:
            raise LayoutError(
                f"layout has no '{kind}' segment {qual or ''} needed by '{constellation.id}'"
            )
        return seg

    if flat or not (constellation.family == "qam" or (constellation.family == "apsk" and constellation.conforming)):
        flat_seg = need("flat", constellation_id=constellation.id)
        bits = constellation.bit_matrix()
        code[:, flat_seg.start : flat_seg.start + flat_seg.length] = bits
        used[:, flat_seg.start : flat_seg.start + flat_seg.length] = True
        return SymbolCodes(code, used)

    quad = need("quadrant")
    if constellation.family == "qam":
        n = _qam_n(constellation)
        qam_seg = layout.segment("qam") if n > 1 else None
        if n > 1:
            if qam_seg is None or qam_seg.length < 2 * (n - 1):
                raise LayoutError(
                    f"layout QAM block too small for '{constellation.id}' (needs {2 * (n - 1)} bits)"
                )
        for sym in range(m):
            bits = qam_repr_code(constellation, sym)
            put(sym, quad, 0, int(bits[0]))
            put(sym, quad, 1, int(bits[1]))
            for t, b in enumerate(bits[2:]):
                put(sym, qam_seg, t, int(b))
        return SymbolCodes(code, used)

    # conforming APSK
    rings = constellation.rings
    series = _series_of(constellation)
    label_width = (len(rings) - 1).bit_length()
    label_seg = need("ring_label", constellation_id=constellation.id) if label_width else None
    if label_seg is not None and label_seg.length != label_width:
        raise LayoutError(f"ring label width mismatch for '{constellation.id}'")
    sym = 0
    for ring_idx, (ring, (d, n)) in enumerate(zip(rings, series)):
        sel_seg = need("series_selector", d=d) if d > 1 else None
        refine_segs = [need("series_refine", d=d, level=lv) for lv in range(1, n + 1)]
        per_quadrant = ring.num_points // 4
        for k in range(ring.num_points):
            q, angular = divmod(k, per_quadrant)
            b0, b1 = _QUADRANT_BITS[q]
            put(sym, quad, 0, b0)
            put(sym, quad, 1, b1)
            ac = apsk_angular_code(d, n, n, angular)
            for i, b in enumerate(ac.selector):
                put(sym, sel_seg, i, int(b))
            for seg, b in zip(refine_segs, ac.refine):
                put(sym, seg, 0, int(b))
            for i, b in enumerate(gray_encode(ring_idx, label_width)):
                put(sym, label_seg, i, int(b))
            sym += 1
    return SymbolCodes(code, used)


def repr_of_symbol(
    layout: RepresentationLayout, constellation_id: str, symbol: int
) -> tuple[str, tuple[int, ...]]:
    """Masked code of one symbol: (bits over the mask, used global indices)."""
    try:
        sc = layout.per_constellation[constellation_id]
    except KeyError:
        raise LayoutError(f"unknown constellation '{constellation_id}'") from None
    if not 0 <= symbol < sc.code.shape[0]:
        raise LayoutError(f"symbol {symbol} out of range for '{constellation_id}'")
    idx = np.flatnonzero(sc.used[symbol])
    bits = "".join(str(int(b)) for b in sc.code[symbol, idx])
    return bits, tuple(int(i) for i in idx)
