"""Wire formats for the render service.

Control messages are JSON text frames; synthesized frames travel as binary
frames with a fixed little-endian header:

    magic "LNVS" | version u8 | mode u8 | width u32 | height u32
    | frame_index u64 | payload width*height*3 bytes RGB8 row-major
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import Pose

MAGIC = b"LNVS"
VERSION = 1
HEADER = struct.Struct("<4sBBIIQ")

MODE_CODES = {"color": 0, "depth": 1, "confidence": 2}
MODE_NAMES = {v: k for k, v in MODE_CODES.items()}

CONTROL_TYPES = ("set_pose", "set_mode", "set_params", "update_poses", "get_stats")
QUAT_NORM_TOLERANCE = 1e-3


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class FrameMessage:
    mode: str
    width: int
    height: int
    frame_index: int
    payload: bytes

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype=np.uint8).reshape(self.height, self.width, 3)


def encode_frame(mode: str, frame_index: int, image: np.ndarray) -> bytes:
    if mode not in MODE_CODES:
        raise ProtocolError(f"unknown mode {mode!r}")
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ProtocolError("frame payload must be HxWx3 uint8")
    h, w = image.shape[:2]
    header = HEADER.pack(MAGIC, VERSION, MODE_CODES[mode], w, h, frame_index)
    return header + np.ascontiguousarray(image).tobytes()


def decode_frame(data: bytes) -> FrameMessage:
    if len(data) < HEADER.size:
        raise ProtocolError("frame shorter than header")
    magic, version, mode_code, width, height, frame_index = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if mode_code not in MODE_NAMES:
        raise ProtocolError(f"unknown mode byte {mode_code}")
    payload = data[HEADER.size:]
    if len(payload) != 3 * width * height:
        raise ProtocolError(
            f"payload length {len(payload)} != 3*{width}*{height}"
        )
    return FrameMessage(
        mode=MODE_NAMES[mode_code], width=width, height=height,
        frame_index=frame_index, payload=payload,
    )


def pose_from_seven(values) -> Pose:
    """tx ty tz qx qy qz qw; quaternions are renormalized within 1e-3."""
    if len(values) != 7:
        raise ProtocolError(f"pose needs 7 numbers, got {len(values)}")
    try:
        vals = [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"non-numeric pose value: {exc}") from exc
    norm = math.sqrt(sum(v * v for v in vals[3:7]))
    if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
        raise ProtocolError(f"quaternion norm {norm:.6f} outside tolerance")
    q = [v / norm for v in vals[3:7]]
    return Pose.from_quaternion(*vals[0:3], *q)


def parse_control(text: str) -> dict:
    """Validate a JSON control message; returns the parsed dict."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("control message must be a JSON object")
    mtype = msg.get("type")
    if mtype not in CONTROL_TYPES:
        raise ProtocolError(f"unknown control type {mtype!r}")
    if mtype == "set_pose":
        msg["_pose"] = pose_from_seven(msg.get("pose", []))
    elif mtype == "set_mode":
        if msg.get("mode") not in MODE_CODES:
            raise ProtocolError(f"unknown mode {msg.get('mode')!r}")
    elif mtype == "update_poses":
        updates = msg.get("updates")
        if not isinstance(updates, list) or not updates:
            raise ProtocolError("update_poses needs a non-empty 'updates' list")
        parsed = []
        for item in updates:
            if not isinstance(item, dict) or "id" not in item:
                raise ProtocolError("each update needs 'id' and 'pose'")
            parsed.append((int(item["id"]), pose_from_seven(item.get("pose", []))))
        msg["_updates"] = parsed
    elif mtype == "set_params":
        params = msg.get("params")
        if not isinstance(params, dict):
            raise ProtocolError("set_params needs a 'params' object")
    return msg
