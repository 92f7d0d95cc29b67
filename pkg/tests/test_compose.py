import numpy as np
import pytest

from livewarp.compose import ComposedFrame, TemporalState, compose, visualize_confidence, visualize_depth
from livewarp.fusion import FusionBuffer


def filled_buffer(h=6, w=8, rgb=(0.2, 0.5, 0.8), depth=2.0):
    buf = FusionBuffer(h, w)
    buf.n[:] = 1
    buf.w[:] = 1.0
    buf.d[:] = depth
    buf.f[..., 0] = rgb[0]
    buf.f[..., 1] = rgb[1]
    buf.f[..., 2] = rgb[2]
    return buf


class TestTemporalState:
    def test_blend_range_validated(self):
        with pytest.raises(ValueError):
            TemporalState(blend=1.5)
        with pytest.raises(ValueError):
            TemporalState(blend=-0.1)

    def test_reset_clears_history(self):
        state = TemporalState(blend=0.5)
        compose(filled_buffer(), state)
        assert state.previous is not None
        state.reset()
        assert state.previous is None


class TestCompose:
    def test_channels_scaled_to_uint8(self):
        frame = compose(filled_buffer(rgb=(0.0, 0.5, 1.0)), TemporalState())
        assert frame.rgb.dtype == np.uint8
        assert frame.rgb[0, 0, 0] == 0
        assert frame.rgb[0, 0, 1] == 128  # 0.5*255 + 0.5 rounds up
        assert frame.rgb[0, 0, 2] == 255

    def test_holes_are_black(self):
        buf = filled_buffer()
        buf.n[2, 3] = 0
        frame = compose(buf, TemporalState())
        assert tuple(frame.rgb[2, 3]) == (0, 0, 0)
        assert tuple(frame.rgb[0, 0]) != (0, 0, 0)

    def test_out_of_range_features_clipped(self):
        buf = filled_buffer(rgb=(-0.5, 1.7, 0.5))
        frame = compose(buf, TemporalState())
        assert frame.rgb[0, 0, 0] == 0 and frame.rgb[0, 0, 1] == 255

    def test_first_frame_ignores_blend(self):
        state = TemporalState(blend=0.9)
        frame = compose(filled_buffer(rgb=(0.4, 0.4, 0.4)), state)
        assert frame.rgb[0, 0, 0] == int(0.4 * 255 + 0.5)

    def test_feedback_blend_recursion(self):
        # frame 1 all 1.0, frame 2 all 0.0: output2 = blend * 1.0
        state = TemporalState(blend=0.1)
        compose(filled_buffer(rgb=(1.0, 1.0, 1.0)), state)
        frame2 = compose(filled_buffer(rgb=(0.0, 0.0, 0.0)), state)
        assert frame2.rgb[0, 0, 0] == int(0.1 * 255 + 0.5)
        frame3 = compose(filled_buffer(rgb=(0.0, 0.0, 0.0)), state)
        assert frame3.rgb[0, 0, 0] == int(0.01 * 255 + 0.5)

    def test_history_kept_in_float_not_uint8(self):
        # tiny values must accumulate without being quantized away
        state = TemporalState(blend=0.5)
        compose(filled_buffer(rgb=(0.001, 0.001, 0.001)), state)
        compose(filled_buffer(rgb=(0.001, 0.001, 0.001)), state)
        assert state.previous[0, 0, 0] == pytest.approx(0.001, abs=1e-6)

    def test_frame_index_passthrough(self):
        frame = compose(filled_buffer(), TemporalState(), frame_index=42)
        assert frame.frame_index == 42


class TestVisualize:
    def test_depth_ramp(self):
        buf = filled_buffer(depth=0.2)
        assert visualize_depth(buf, near=0.2, far=6.0)[0, 0] == 255
        buf.d[:] = 6.0
        assert visualize_depth(buf, near=0.2, far=6.0)[0, 0] == 0
        buf.d[:] = 3.1
        mid = visualize_depth(buf, near=0.2, far=6.0)[0, 0]
        assert 120 < mid < 135

    def test_depth_holes_black_even_when_near(self):
        buf = filled_buffer(depth=0.2)
        buf.n[1, 1] = 0
        img = visualize_depth(buf)
        assert img[1, 1] == 0 and img[0, 0] == 255

    def test_depth_range_validated(self):
        with pytest.raises(ValueError):
            visualize_depth(filled_buffer(), near=2.0, far=1.0)

    def test_confidence_image_shape(self):
        img = visualize_confidence(filled_buffer())
        assert img.shape == (6, 8, 3) and img.dtype == np.uint8
