import base64
import json
import struct
from pathlib import Path

import numpy as np
import pytest

from livewarp.protocol import (
    HEADER,
    MAGIC,
    MODE_CODES,
    ProtocolError,
    VERSION,
    decode_frame,
    encode_frame,
    parse_control,
    pose_from_seven,
)


def sample_image(h=4, w=6, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


class TestFrameEncoding:
    def test_round_trip_bit_for_bit(self):
        img = sample_image()
        data = encode_frame("color", 17, img)
        msg = decode_frame(data)
        assert msg.mode == "color"
        assert (msg.width, msg.height) == (6, 4)
        assert msg.frame_index == 17
        assert msg.payload == img.tobytes()
        assert np.array_equal(msg.to_array(), img)

    def test_header_layout(self):
        img = sample_image(h=2, w=3)
        data = encode_frame("depth", 5, img)
        magic, version, mode, w, h, idx = HEADER.unpack_from(data)
        assert magic == MAGIC == b"LNVS"
        assert version == VERSION == 1
        assert mode == MODE_CODES["depth"] == 1
        assert (w, h, idx) == (3, 2, 5)
        assert len(data) == HEADER.size + 3 * w * h

    def test_mode_bytes(self):
        assert MODE_CODES == {"color": 0, "depth": 1, "confidence": 2}

    def test_unknown_mode_rejected(self):
        with pytest.raises(ProtocolError, match="mode"):
            encode_frame("thermal", 0, sample_image())

    def test_wrong_payload_shape_rejected(self):
        with pytest.raises(ProtocolError):
            encode_frame("color", 0, np.zeros((4, 6), dtype=np.uint8))
        with pytest.raises(ProtocolError):
            encode_frame("color", 0, np.zeros((4, 6, 3), dtype=np.float32))

    def test_truncated_header(self):
        with pytest.raises(ProtocolError, match="shorter"):
            decode_frame(b"LNVS")

    def test_bad_magic(self):
        data = bytearray(encode_frame("color", 0, sample_image()))
        data[:4] = b"XXXX"
        with pytest.raises(ProtocolError, match="magic"):
            decode_frame(bytes(data))

    def test_bad_version(self):
        data = bytearray(encode_frame("color", 0, sample_image()))
        data[4] = 9
        with pytest.raises(ProtocolError, match="version"):
            decode_frame(bytes(data))

    def test_bad_mode_byte(self):
        data = bytearray(encode_frame("color", 0, sample_image()))
        data[5] = 7
        with pytest.raises(ProtocolError, match="mode byte"):
            decode_frame(bytes(data))

    def test_payload_length_mismatch(self):
        data = encode_frame("color", 0, sample_image())
        with pytest.raises(ProtocolError, match="payload"):
            decode_frame(data[:-1])

    def test_large_frame_index_u64(self):
        idx = 2**40
        msg = decode_frame(encode_frame("color", idx, sample_image()))
        assert msg.frame_index == idx


class TestPoseFromSeven:
    def test_identity(self):
        p = pose_from_seven([1, 2, 3, 0, 0, 0, 1])
        assert np.allclose(p.translation, [1, 2, 3])
        assert np.allclose(p.rotation, np.eye(3))

    def test_renormalizes_within_tolerance(self):
        eps = 5e-4
        p = pose_from_seven([0, 0, 0, 0, 0, 0, 1 + eps])
        assert np.allclose(p.rotation, np.eye(3), atol=1e-9)

    def test_norm_outside_tolerance_rejected(self):
        with pytest.raises(ProtocolError, match="norm"):
            pose_from_seven([0, 0, 0, 0, 0, 0, 1.01])

    def test_wrong_count(self):
        with pytest.raises(ProtocolError, match="7"):
            pose_from_seven([0, 0, 0, 1])

    def test_non_numeric(self):
        with pytest.raises(ProtocolError, match="numeric"):
            pose_from_seven([0, 0, 0, 0, 0, "x", 1])


class TestParseControl:
    def test_set_pose_attaches_parsed_pose(self):
        msg = parse_control(json.dumps(
            {"type": "set_pose", "pose": [1, 0, 0, 0, 0, 0, 1]}))
        assert np.allclose(msg["_pose"].translation, [1, 0, 0])

    def test_set_mode_validated(self):
        assert parse_control('{"type": "set_mode", "mode": "depth"}')["mode"] == "depth"
        with pytest.raises(ProtocolError):
            parse_control('{"type": "set_mode", "mode": "xray"}')

    def test_update_poses_parsed(self):
        msg = parse_control(json.dumps({
            "type": "update_poses",
            "updates": [{"id": 3, "pose": [0, 0, 1, 0, 0, 0, 1]}],
        }))
        assert msg["_updates"][0][0] == 3

    def test_update_poses_requires_list(self):
        with pytest.raises(ProtocolError, match="updates"):
            parse_control('{"type": "update_poses", "updates": []}')

    def test_set_params_requires_object(self):
        with pytest.raises(ProtocolError, match="params"):
            parse_control('{"type": "set_params"}')

    def test_unknown_type(self):
        with pytest.raises(ProtocolError, match="type"):
            parse_control('{"type": "reboot"}')

    def test_malformed_json(self):
        with pytest.raises(ProtocolError, match="JSON"):
            parse_control("{nope")

    def test_non_object(self):
        with pytest.raises(ProtocolError, match="object"):
            parse_control("[1, 2]")


FIXTURES = Path(__file__).parent.parent / "frontend" / "tests" / "fixtures"


@pytest.mark.skipif(not FIXTURES.exists(), reason="viewer fixtures not generated")
class TestGoldenFixtures:
    """The browser client parses the same golden bytes; keep both sides honest."""

    def entries(self, kind):
        manifest = json.loads((FIXTURES / "manifest.json").read_text())
        return [e for e in manifest if e["kind"] == kind]

    def test_frames_decode_bit_for_bit(self):
        entries = self.entries("frame")
        assert len(entries) >= 5
        for e in entries:
            msg = decode_frame((FIXTURES / e["file"]).read_bytes())
            assert msg.mode == e["mode"]
            assert (msg.width, msg.height) == (e["width"], e["height"])
            assert msg.frame_index == e["frame_index"]
            assert msg.payload == base64.b64decode(e["payload_b64"])

    def test_malformed_fixtures_rejected(self):
        entries = self.entries("malformed")
        assert len(entries) >= 5
        for e in entries:
            with pytest.raises(ProtocolError, match=e["error_contains"]):
                decode_frame((FIXTURES / e["file"]).read_bytes())
