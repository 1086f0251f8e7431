#!/usr/bin/env python3
"""Writes the external-denoiser wire-protocol conformance vectors.

Built with struct only, independently of either implementation. Run from
this directory; it rewrites the *.bin files and manifest.json.
"""

import json
import struct

MAGIC = b"PNPD"
VERSION = 1
DENOISE, OK, ERROR = 0x01, 0x81, 0xFF


def header(opcode, w, h, c, version=VERSION, magic=MAGIC):
    return magic + struct.pack("<BBIII", version, opcode, w, h, c)


def image(opcode, w, h, c, values):
    assert len(values) == w * h * c
    return header(opcode, w, h, c) + struct.pack("<%df" % len(values), *values)


def error(w, h, c, message):
    raw = message.encode("utf-8")
    return header(ERROR, w, h, c) + struct.pack("<I", len(raw)) + raw


def f32_bits(values):
    return ["%08x" % struct.unpack("<I", struct.pack("<f", v))[0] for v in values]


# planar, row-major: channel 0 rows first
SMALL = [0.5]
GRID = [0.0, -0.0, 1.0, -1.0, 0.25, 1e-30, 3.4028234663852886e38, -2.5, 0.1, 0.7, 1e-45, 123456.0]

valid = [
    ("denoise_1x1x1", image(DENOISE, 1, 1, 1, SMALL), DENOISE, (1, 1, 1), SMALL),
    ("ok_1x1x1", image(OK, 1, 1, 1, SMALL), OK, (1, 1, 1), SMALL),
    ("denoise_3x2x2", image(DENOISE, 3, 2, 2, GRID), DENOISE, (3, 2, 2), GRID),
    ("ok_3x2x2", image(OK, 3, 2, 2, GRID), OK, (3, 2, 2), GRID),
    ("ok_empty", image(OK, 0, 4, 1, []), OK, (0, 4, 1), []),
]
errors = [
    ("error_ascii", error(3, 2, 2, "unsupported shape"), (3, 2, 2), "unsupported shape"),
    ("error_utf8", error(1, 1, 1, "débruit échoué – σ"), (1, 1, 1), "débruit échoué – σ"),
    ("error_empty", error(0, 0, 0, ""), (0, 0, 0), ""),
]
good = image(DENOISE, 2, 1, 1, [0.25, 0.75])
invalid = [
    ("bad_magic", b"PNPX" + good[4:]),
    ("bad_version", good[:4] + b"\x02" + good[5:]),
    ("bad_opcode", good[:5] + b"\x02" + good[6:]),
    ("truncated_header", good[:11]),
    ("truncated_payload", good[:-1]),
    ("trailing_byte", good + b"\x00"),
    ("oversized_shape", header(DENOISE, 65536, 65536, 3)),
    ("error_bad_utf8", header(ERROR, 1, 1, 1) + struct.pack("<I", 2) + b"\xc3\x28"),
    ("error_truncated_message", header(ERROR, 1, 1, 1) + struct.pack("<I", 10) + b"abc"),
    ("error_huge_length", header(ERROR, 1, 1, 1) + struct.pack("<I", 0xFFFFFFFF)),
]

manifest = {"valid": [], "error": [], "invalid": []}
for name, blob, op, shape, values in valid:
    open(name + ".bin", "wb").write(blob)
    manifest["valid"].append(
        {"file": name + ".bin", "opcode": op, "shape": list(shape), "f32_bits": f32_bits(values)}
    )
for name, blob, shape, message in errors:
    open(name + ".bin", "wb").write(blob)
    manifest["error"].append({"file": name + ".bin", "shape": list(shape), "message": message})
for name, blob in invalid:
    open(name + ".bin", "wb").write(blob)
    manifest["invalid"].append({"file": name + ".bin"})
with open("manifest.json", "w") as f:
    json.dump(manifest, f, indent=2, ensure_ascii=False)
    f.write("\n")
