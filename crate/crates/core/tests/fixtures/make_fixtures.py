#!/usr/bin/env python3
"""Minimal stand-alone DICOM writer for the parser test fixtures.

Writes byte-level Part 10 files with the struct module only, so the fixtures
do not depend on the crate under test. Run from this directory:

    python3 make_fixtures.py
"""
import struct

EXPLICIT = "1.2.840.10008.1.2.1"
IMPLICIT = "1.2.840.10008.1.2"
US_MULTIFRAME = "1.2.840.10008.5.1.4.1.1.3.1"
IMPL_UID = "2.25.229574327816215469728381956380432127141"
LONG_VRS = {"OB", "OW", "SQ", "UN", "UT"}


def pad(value: bytes, vr: str) -> bytes:
    if len(value) % 2:
        value += b"\x00" if vr in ("UI", "OB") else b" "
    return value


def el_explicit(group, elem, vr, value: bytes) -> bytes:
    value = pad(value, vr)
    head = struct.pack("<HH", group, elem) + vr.encode()
    if vr in LONG_VRS:
        head += b"\x00\x00" + struct.pack("<I", len(value))
    else:
        head += struct.pack("<H", len(value))
    return head + value


def el_implicit(group, elem, vr, value: bytes) -> bytes:
    value = pad(value, vr)
    return struct.pack("<HHI", group, elem, len(value)) + value


def us(v):
    return struct.pack("<H", v)


def part10(dataset_elems, ts=EXPLICIT, sop_instance="1.2.3.4.1"):
    meta = b"".join(
        [
            el_explicit(0x0002, 0x0001, "OB", b"\x00\x01"),
            el_explicit(0x0002, 0x0002, "UI", US_MULTIFRAME.encode()),
            el_explicit(0x0002, 0x0003, "UI", sop_instance.encode()),
            el_explicit(0x0002, 0x0010, "UI", ts.encode()),
            el_explicit(0x0002, 0x0012, "UI", IMPL_UID.encode()),
        ]
    )
    group_len = el_explicit(0x0002, 0x0000, "UL", struct.pack("<I", len(meta)))
    enc = el_explicit if ts == EXPLICIT else el_implicit
    body = b"".join(enc(g, e, vr, v) for (g, e, vr, v) in sorted(dataset_elems))
    return b"\x00" * 128 + b"DICM" + group_len + meta + body


def base_elements(rows, cols, frames, phi=False, spacing=b"0.5\\0.5"):
    pixels = bytes((i * 7) % 256 for i in range(rows * cols * frames))
    elems = [
        (0x0008, 0x0016, "UI", US_MULTIFRAME.encode()),
        (0x0008, 0x0018, "UI", b"1.2.3.4.1"),
        (0x0008, 0x0060, "CS", b"US"),
        (0x0008, 0x103E, "LO", b"A4C"),
        (0x0018, 0x1063, "DS", b"20"),
        (0x0020, 0x000D, "UI", b"1.2.3.4"),
        (0x0020, 0x0013, "IS", b"1"),
        (0x0028, 0x0002, "US", us(1)),
        (0x0028, 0x0004, "CS", b"MONOCHROME2"),
        (0x0028, 0x0008, "IS", str(frames).encode()),
        (0x0028, 0x0010, "US", us(rows)),
        (0x0028, 0x0011, "US", us(cols)),
        (0x0028, 0x0100, "US", us(8)),
        (0x0028, 0x0101, "US", us(8)),
        (0x0028, 0x0102, "US", us(7)),
        (0x0028, 0x0103, "US", us(0)),
        (0x7FE0, 0x0010, "OB", pixels),
    ]
    if spacing is not None:
        elems.append((0x0028, 0x0030, "DS", spacing))
    if phi:
        elems += [
            (0x0008, 0x0080, "LO", phi["institution"]),
            (0x0008, 0x0090, "PN", phi["referrer"]),
            (0x0010, 0x0010, "PN", phi["name"]),
            (0x0010, 0x0020, "LO", phi["id"]),
            (0x0010, 0x0030, "DA", phi["birth"]),
        ]
    return elems


def region_item():
    inner = b"".join(
        [
            el_explicit(0x0018, 0x6024, "US", us(3)),
            el_explicit(0x0018, 0x6026, "US", us(3)),
            el_explicit(0x0018, 0x602C, "FD", struct.pack("<d", 0.05)),
            el_explicit(0x0018, 0x602E, "FD", struct.pack("<d", 0.04)),
        ]
    )
    # undefined-length sequence and item, as many scanners emit them
    return (
        struct.pack("<HH", 0x0018, 0x6011)
        + b"SQ\x00\x00"
        + struct.pack("<I", 0xFFFFFFFF)
        + struct.pack("<HHI", 0xFFFE, 0xE000, 0xFFFFFFFF)
        + inner
        + struct.pack("<HHI", 0xFFFE, 0xE00D, 0)
        + struct.pack("<HHI", 0xFFFE, 0xE0DD, 0)
    )


def main():
    with open("canonical_4x4x2.dcm", "wb") as f:
        f.write(part10(base_elements(4, 4, 2)))

    with open("implicit_4x4x2.dcm", "wb") as f:
        f.write(part10(base_elements(4, 4, 2), ts=IMPLICIT))

    # No PixelSpacing; calibration from ultrasound region deltas in cm.
    # The region sequence sorts between FrameTime and StudyInstanceUID.
    elems = sorted(base_elements(4, 4, 2, spacing=None))
    head = [e for e in elems if (e[0], e[1]) < (0x0018, 0x6011)]
    tail = [e for e in elems if (e[0], e[1]) > (0x0018, 0x6011)]
    data = part10(head)
    data += region_item()
    data += b"".join(el_explicit(*e) for e in tail)
    with open("regions_4x4x2.dcm", "wb") as f:
        f.write(data)

    phi = {
        "institution": b"General Hospital",
        "referrer": b"SMITH^JOHN",
        "name": b"DOE^JANE",
        "id": b"PAT-00042",
        "birth": b"19600101",
    }
    with open("phi_4x4x2.dcm", "wb") as f:
        f.write(part10(base_elements(4, 4, 2, phi=phi)))

    # Hand-edited expectation: every PHI value replaced with ANON.
    anon = {k: b"ANON" for k in phi}
    with open("phi_4x4x2_anonymized.dcm", "wb") as f:
        f.write(part10(base_elements(4, 4, 2, phi=anon)))

    # Big endian transfer syntax, otherwise identical.
    with open("big_endian.dcm", "wb") as f:
        f.write(part10(base_elements(4, 4, 2), ts="1.2.840.10008.1.2.2"))


if __name__ == "__main__":
    main()
