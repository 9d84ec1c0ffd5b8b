"""Independent reference encoder for the golden codec vectors in data/vectors.

Uses Python's struct packing and the `cryptography` package's AES/CMAC, so the
vectors do not share code with the C++ implementation.
"""
import struct
import sys
from pathlib import Path

from cryptography.hazmat.primitives import cmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

NWK = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
APP = bytes(range(16))
DEV_ADDR = 0x26011BDA
FCNT = 42


def reading(wt=True, mt=True):
    out = struct.pack(">IHHBB", 1268999200, 7, 5002, 1, 0)
    out += struct.pack(">IIIiH", 230150, 12345, 2841, -412, 9900)
    blocks = [
        (90000, 0, 1000000, 90000) if wt else None,
        None,
        (300000, -1500, 12660000, 23700) if mt else None,
        None,
    ]
    for b in blocks:
        out += b"\xff" * 16 if b is None else struct.pack(">IiII", *b)
    out += struct.pack(">i", -929200)
    assert len(out) == 96
    return out


def aes(key, block):
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def keystream_xor(key, direction, data, first):
    out = bytearray(data)
    for k in range((len(data) + 15) // 16):
        a = bytes([1, 0, 0, 0, 0, direction]) + struct.pack("<II", DEV_ADDR, FCNT) + bytes([0, first + k])
        s = aes(key, a)
        for j in range(16):
            if 16 * k + j < len(out):
                out[16 * k + j] ^= s[j]
    return bytes(out)


def mic(direction, msg):
    b0 = bytes([0x49, 0, 0, 0, 0, direction]) + struct.pack("<II", DEV_ADDR, FCNT) + bytes([0, len(msg)])
    c = cmac.CMAC(algorithms.AES(NWK))
    c.update(b0 + msg)
    return c.finalize()[:4]


def sealed_uplink(payload):
    mhdr = bytes([0x40])  # unconfirmed data up, major 0
    fopts = keystream_xor(NWK, 0, b"\x02", 0)
    fhdr = struct.pack("<IBH", DEV_ADDR, 0x80 | 1, FCNT) + fopts
    msg = mhdr + fhdr + bytes([10]) + keystream_xor(APP, 0, payload, 1)
    return msg + mic(0, msg)


def crc4(b0, b1):
    reg = 0
    for byte in (b0, b1):
        for i in range(7, -1, -1):
            bit = (byte >> i) & 1
            top = (reg >> 3) & 1
            reg = (reg << 1) & 0xF
            if top ^ bit:
                reg ^= 0x3
    return reg


def crc16_ccitt(data):
    reg = 0xFFFF
    for byte in data:
        reg ^= byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ 0x1021) & 0xFFFF if reg & 0x8000 else (reg << 1) & 0xFFFF
    return reg


def phy(payload, cr=1):
    b1 = cr << 5 | 0x10
    hdr = bytes([len(payload), b1, crc4(len(payload), b1) << 4])
    return hdr + payload + struct.pack(">H", crc16_ccitt(payload))


def fragments(payload, seq):
    total = max(1, (len(payload) + 48) // 49)
    out = []
    for i in range(total):
        ident = (seq & 0x3FF) << 6 | i << 4 | total << 2
        out.append(struct.pack(">H", ident) + payload[49 * i : 49 * (i + 1)])
    return out


def dump(path, comment, data):
    lines = [data[i : i + 16].hex(" ") for i in range(0, len(data), 16)]
    path.write_text(f"# {comment}\n" + "\n".join(lines) + "\n")


def main(outdir):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    full = reading()
    dump(out / "reading_full.hex", "meter record, WT and MT present, PV and FC absent", full)
    dump(out / "reading_wt_absent.hex", "meter record, only MT present", reading(wt=False))
    dump(out / "reading_saturated.hex", "all-ones record", b"\xff" * 96)
    frame = sealed_uplink(full)
    dump(out / "uplink_sealed.hex", "unconfirmed uplink, FPort 10, FOpts 02, FCnt 42", frame)
    frags = fragments(full, 5)
    for i, f in enumerate(frags):
        dump(out / f"fragment_sf10_{i}.hex", f"fragment {i} of sequence 5 at SF 10", f)
    dump(out / "phy_uplink.hex", "explicit header, CR 4/5, CRC on, carrying the sealed uplink", phy(frame))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/vectors")
