"""Regenerate the golden protocol fixtures under tests/fixtures.

The byte files are produced by the server-side protocol implementation so
the TypeScript decoder and the Python tests validate against the exact same
wire bytes. Run from the frontend directory: python3 scripts/generate_fixtures.py
"""

import base64
import json
from pathlib import Path

import numpy as np

from livewarp.protocol import encode_frame

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def image(h, w, seed):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    manifest = []

    known_2x2 = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    frames = [
        ("frame_color_2x2.bin", "color", 0, known_2x2),
        ("frame_color_6x4.bin", "color", 17, image(4, 6, 1)),
        ("frame_depth_5x3.bin", "depth", 5, image(3, 5, 2)),
        ("frame_confidence_3x5.bin", "confidence", 9, image(5, 3, 3)),
        ("frame_large_index.bin", "color", 2**40 + 3, image(2, 2, 4)),
    ]
    for name, mode, idx, img in frames:
        data = encode_frame(mode, idx, img)
        (OUT / name).write_bytes(data)
        manifest.append({
            "file": name,
            "kind": "frame",
            "mode": mode,
            "width": img.shape[1],
            "height": img.shape[0],
            "frame_index": idx,
            "payload_b64": base64.b64encode(img.tobytes()).decode(),
        })

    good = encode_frame("color", 1, image(4, 6, 5))
    bad_magic = b"XXXX" + good[4:]
    bad_version = good[:4] + bytes([9]) + good[5:]
    bad_mode = good[:5] + bytes([7]) + good[6:]
    malformed = [
        ("bad_truncated.bin", good[:10], "shorter"),
        ("bad_magic.bin", bad_magic, "magic"),
        ("bad_version.bin", bad_version, "version"),
        ("bad_mode_byte.bin", bad_mode, "mode"),
        ("bad_payload_length.bin", good[:-1], "payload"),
    ]
    for name, data, needle in malformed:
        (OUT / name).write_bytes(data)
        manifest.append({"file": name, "kind": "malformed", "error_contains": needle})

    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(manifest)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
