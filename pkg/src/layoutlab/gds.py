"""GDSII stream-format subset: axis-aligned BOUNDARY records only.

Big-endian record framing, 1 nm database unit, fixed zero timestamps so
identical layouts serialize to identical bytes.

Layer map (datatype in parentheses):
    0  (0)      die outline
    1  (0)      metal1 wires
    2  (0)      metal2 wires
    3  (0)      via markers, squares joining metal1/metal2
    10 (kind)   component tiles; 0=nmos 1=pmos 2=resistor 3=capacitor
    20 (role)   pin markers;     0=d 1=g 2=s 3=b 4=p 5=n
"""

from __future__ import annotations

import struct

from .geometry import (ComponentTile, Halo, InternalRepresentation, Layout,
                       Rect, Via, WireSegment)

HEADER, BGNLIB, LIBNAME, ENDLIB = 0x00, 0x01, 0x02, 0x04
UNITS, BGNSTR, STRNAME, ENDSTR = 0x03, 0x05, 0x06, 0x07
BOUNDARY, LAYER, DATATYPE, XY, ENDEL = 0x08, 0x0D, 0x0E, 0x10, 0x11

_NO_DATA, _INT16, _INT32, _REAL8, _ASCII = 0x00, 0x02, 0x03, 0x05, 0x06

DIE_LAYER, VIA_LAYER, TILE_LAYER, PIN_LAYER = 0, 3, 10, 20
KIND_TO_DT = {"nmos": 0, "pmos": 1, "resistor": 2, "capacitor": 3}
DT_TO_KIND = {v: k for k, v in KIND_TO_DT.items()}
ROLE_TO_DT = {"d": 0, "g": 1, "s": 2, "b": 3, "p": 4, "n": 5}
DT_TO_ROLE = {v: k for k, v in ROLE_TO_DT.items()}

# Pin and via markers are fixed-size squares (half-width in nm); they only
# need to overlap the wires that land on them.
MARK_HALF = 25

_LIB_NAME = "LAYOUTLAB"
_I32_MIN, _I32_MAX = -(2 ** 31), 2 ** 31 - 1


class GdsError(ValueError):
    pass


def _encode_real8(value: float) -> bytes:
    """Excess-64 base-16 GDSII double."""
    if value == 0:
        return b"\x00" * 8
    sign = 0
    if value < 0:
        sign = 0x80
        value = -value
    exponent = 64
    while value >= 1.0:
        value /= 16.0
        exponent += 1
    while value < 1.0 / 16.0:
        value *= 16.0
        exponent -= 1
    if not 0 <= exponent <= 127:
        raise GdsError(f"real8 exponent out of range: {exponent}")
    mantissa = int(value * (1 << 56))
    out = bytearray(8)
    out[0] = sign | exponent
    for i in range(7):
        out[7 - i] = (mantissa >> (8 * i)) & 0xFF
    return bytes(out)


def _decode_real8(raw: bytes) -> float:
    sign = -1.0 if raw[0] & 0x80 else 1.0
    exponent = (raw[0] & 0x7F) - 64
    mantissa = int.from_bytes(raw[1:], "big") / float(1 << 56)
    return sign * mantissa * (16.0 ** exponent)


def _record(rectype: int, datatype: int, payload: bytes = b"") -> bytes:
    length = 4 + len(payload)
    if length % 2:
        raise GdsError("odd record length")
    return struct.pack(">HBB", length, rectype, datatype) + payload


def _ascii_record(rectype: int, text: str) -> bytes:
    data = text.encode("ascii")
    if len(data) % 2:
        data += b"\x00"
    return _record(rectype, _ASCII, data)


def _boundary(layer: int, datatype: int, rect: Rect) -> bytes:
    llx, lly, urx, ury = rect
    for c in rect:
        if not _I32_MIN <= c <= _I32_MAX:
            raise GdsError(f"coordinate {c} overflows 32-bit database units")
    points = [(llx, lly), (urx, lly), (urx, ury), (llx, ury), (llx, lly)]
    xy = b"".join(struct.pack(">ii", x, y) for x, y in points)
    return (_record(BOUNDARY, _NO_DATA)
            + _record(LAYER, _INT16, struct.pack(">h", layer))
            + _record(DATATYPE, _INT16, struct.pack(">h", datatype))
            + _record(XY, _INT32, xy)
            + _record(ENDEL, _NO_DATA))


def _mark_rect(x: int, y: int) -> Rect:
    return (x - MARK_HALF, y - MARK_HALF, x + MARK_HALF, y + MARK_HALF)


def write_gds(layout: Layout, cell_name: str = "TOP") -> bytes:
    """Serialize a layout; identical layouts give identical bytes."""
    zeros12 = struct.pack(">12h", *([0] * 12))
    out = [
        _record(HEADER, _INT16, struct.pack(">h", 600)),
        _record(BGNLIB, _INT16, zeros12),
        _ascii_record(LIBNAME, _LIB_NAME),
        # database unit: 1e-3 user units (um), 1e-9 meters -> 1 nm
        _record(UNITS, _REAL8, _encode_real8(1e-3) + _encode_real8(1e-9)),
        _record(BGNSTR, _INT16, zeros12),
        _ascii_record(STRNAME, cell_name),
    ]
    if layout.die != (0, 0, 0, 0):
        out.append(_boundary(DIE_LAYER, 0, layout.die))
    for tile in layout.ir.tiles:
        out.append(_boundary(TILE_LAYER, KIND_TO_DT[tile.kind], tile.box))
        for role in sorted(tile.pins):
            x, y, _layer = tile.pins[role]
            out.append(_boundary(PIN_LAYER, ROLE_TO_DT[role], _mark_rect(x, y)))
    for wire in layout.wires:
        out.append(_boundary(wire.layer, 0, wire.rect))
    for via in layout.vias:
        out.append(_boundary(VIA_LAYER, 0, _mark_rect(via.x, via.y)))
    out.append(_record(ENDSTR, _NO_DATA))
    out.append(_record(ENDLIB, _NO_DATA))
    return b"".join(out)


def _iter_records(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise GdsError("truncated record header")
        length, rectype, datatype = struct.unpack(">HBB", data[pos:pos + 4])
        if length < 4 or pos + length > len(data):
            raise GdsError(f"bad record length {length} at offset {pos}")
        yield rectype, datatype, data[pos + 4:pos + length]
        pos += length


_KNOWN = {HEADER, BGNLIB, LIBNAME, ENDLIB, UNITS, BGNSTR, STRNAME, ENDSTR,
          BOUNDARY, LAYER, DATATYPE, XY, ENDEL}


def read_gds(data: bytes) -> Layout:
    """Parse a stream written by write_gds back into a Layout.

    Tile names are synthesized in file order; finger counts, nets, and
    halos are not stored in GDS, so the result is geometry-only (halos
    collapse to the tile boxes).
    """
    boundaries: list[tuple[int, int, list[tuple[int, int]]]] = []
    in_boundary = False
    layer = datatype_val = None
    points: list[tuple[int, int]] = []
    saw_units = False
    for rectype, _dt, payload in _iter_records(data):
        if rectype not in _KNOWN:
            raise GdsError(f"unsupported record type 0x{rectype:02X}")
        if rectype == UNITS:
            saw_units = True
            db_meters = _decode_real8(payload[8:16])
            if abs(db_meters - 1e-9) > 1e-15:
                raise GdsError(f"unsupported database unit {db_meters} m")
        elif rectype == BOUNDARY:
            in_boundary, layer, datatype_val, points = True, None, None, []
        elif rectype == LAYER and in_boundary:
            layer = struct.unpack(">h", payload)[0]
        elif rectype == DATATYPE and in_boundary:
            datatype_val = struct.unpack(">h", payload)[0]
        elif rectype == XY and in_boundary:
            n = len(payload) // 8
            points = [struct.unpack(">ii", payload[8 * i:8 * i + 8])
                      for i in range(n)]
        elif rectype == ENDEL:
            if in_boundary:
                if layer is None or datatype_val is None or not points:
                    raise GdsError("boundary missing layer/datatype/xy")
                boundaries.append((layer, datatype_val, points))
            in_boundary = False
    if not saw_units:
        raise GdsError("missing UNITS record")

    def as_rect(pts: list[tuple[int, int]]) -> Rect:
        if len(pts) != 5 or pts[0] != pts[-1]:
            raise GdsError("only closed 5-point rectangles are supported")
        xs = sorted({p[0] for p in pts})
        ys = sorted({p[1] for p in pts})
        if len(xs) != 2 or len(ys) != 2:
            raise GdsError("non-rectangular boundary")
        return (xs[0], ys[0], xs[1], ys[1])

    die: Rect | None = None
    tiles: list[ComponentTile] = []
    pins: list[tuple[str, Rect]] = []
    wires: list[WireSegment] = []
    vias: list[Via] = []
    for layer, dt, pts in boundaries:
        rect = as_rect(pts)
        if layer == DIE_LAYER:
            die = rect
        elif layer == TILE_LAYER:
            if dt not in DT_TO_KIND:
                raise GdsError(f"unknown tile datatype {dt}")
            tiles.append(ComponentTile(
                f"t{len(tiles)}", DT_TO_KIND[dt],
                (rect[0], rect[1]), (rect[2], rect[3]), {}))
        elif layer == PIN_LAYER:
            if dt not in DT_TO_ROLE:
                raise GdsError(f"unknown pin datatype {dt}")
            pins.append((DT_TO_ROLE[dt], rect))
        elif layer == VIA_LAYER:
            vias.append(Via("", (rect[0] + rect[2]) // 2,
                            (rect[1] + rect[3]) // 2))
        elif layer in (1, 2):
            wires.append(WireSegment("", layer, rect))
        else:
            raise GdsError(f"unsupported layer {layer}")
    if die is None:
        die = (0, 0, 0, 0)  # an empty layout carries no die outline

    # attach pins to the unique tile containing them
    placed: list[ComponentTile] = []
    pin_map: dict[int, dict[str, tuple[int, int, int]]] = {i: {} for i
                                                           in range(len(tiles))}
    for role, rect in pins:
        x, y = (rect[0] + rect[2]) // 2, (rect[1] + rect[3]) // 2
        owner = None
        for i, tile in enumerate(tiles):
            if (tile.ll[0] <= x <= tile.ur[0]
                    and tile.ll[1] <= y <= tile.ur[1]):
                owner = i
                break
        if owner is None:
            raise GdsError(f"pin marker at ({x}, {y}) outside every tile")
        pin_map[owner][role] = (x, y, 1)
    for i, tile in enumerate(tiles):
        placed.append(ComponentTile(tile.name, tile.kind, tile.ll, tile.ur,
                                    pin_map[i], nf=None))
    halos = tuple(Halo(t.name, t.box, 0) for t in placed)
    ir = InternalRepresentation(tuple(placed), halos)
    return Layout(ir, tuple(wires), tuple(vias), die)
