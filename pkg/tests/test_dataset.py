import logging

import numpy as np
import pytest

from livewarp.dataset import (
    DEPTH_SCALE,
    DatasetError,
    InputFrame,
    MotionScore,
    load_depth_png,
    load_intrinsics,
    load_stream,
    load_trajectory,
    motion_score,
    save_depth_png,
    select_keyframes,
    write_dataset,
)
from livewarp.geometry import Intrinsics, Pose, project, unproject

from conftest import constant_depth_frame, random_pose

K = Intrinsics(fx=100.0, fy=100.0, cx=39.5, cy=29.5, width=80, height=60)


def shifted_frame(tx, ts, depth=2.0, K=K):
    pose = Pose(np.eye(3), np.array([tx, 0.0, 0.0]))
    return constant_depth_frame(depth, pose, K, timestamp=ts)


class TestInputFrame:
    def test_mismatched_shapes_rejected(self):
        color = np.zeros((60, 80, 3), np.uint8)
        depth = np.zeros((30, 40), np.float32)
        with pytest.raises(ValueError):
            InputFrame(color=color, depth=depth, timestamp=0.0, pose=Pose.identity(), intrinsics=K)

    def test_intrinsics_mismatch_rejected(self):
        color = np.zeros((30, 40, 3), np.uint8)
        depth = np.zeros((30, 40), np.float32)
        with pytest.raises(ValueError):
            InputFrame(color=color, depth=depth, timestamp=0.0, pose=Pose.identity(), intrinsics=K)

    def test_negative_depth_rejected(self):
        color = np.zeros((60, 80, 3), np.uint8)
        depth = np.full((60, 80), -1.0, np.float32)
        with pytest.raises(ValueError, match="negative"):
            InputFrame(color=color, depth=depth, timestamp=0.0, pose=Pose.identity(), intrinsics=K)


class TestDiskRoundTrip:
    def test_write_then_load(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = []
        for i in range(3):
            color = rng.integers(0, 256, size=(K.height, K.width, 3), dtype=np.uint8)
            depth = rng.uniform(0.5, 5.0, size=(K.height, K.width)).astype(np.float32)
            frames.append(InputFrame(color=color, depth=depth, timestamp=i * 0.1,
                                     pose=random_pose(rng), intrinsics=K))
        write_dataset(tmp_path, frames)
        loaded = load_stream(tmp_path)
        assert len(loaded) == 3
        for orig, back in zip(frames, loaded):
            assert np.array_equal(orig.color, back.color)
            # 16-bit quantization at 1/5000 m steps
            # half a 16-bit step plus float32 rounding in the scale product
            assert np.abs(orig.depth - back.depth).max() <= 0.51 / DEPTH_SCALE
            assert back.pose.allclose(orig.pose, atol=1e-6)
            assert back.timestamp == pytest.approx(orig.timestamp, abs=1e-6)

    def test_depth_png_scale(self, tmp_path):
        depth = np.array([[1.0, 0.2], [0.0, 3.0]], dtype=np.float32)
        p = tmp_path / "d.png"
        save_depth_png(p, depth)
        from PIL import Image
        raw = np.asarray(Image.open(p))
        assert raw[0, 0] == 5000 and raw[0, 1] == 1000 and raw[1, 0] == 0
        back = load_depth_png(p)
        assert np.abs(back - depth).max() < 1e-6


class TestParseErrors:
    def test_missing_intrinsics(self, tmp_path):
        with pytest.raises(DatasetError, match="intrinsics"):
            load_intrinsics(tmp_path / "intrinsics.txt")

    def test_wrong_intrinsics_field_count(self, tmp_path):
        p = tmp_path / "intrinsics.txt"
        p.write_text("100 100 40 30\n")
        with pytest.raises(DatasetError, match="fields"):
            load_intrinsics(p)

    def test_trajectory_wrong_field_count_reports_line(self, tmp_path):
        p = tmp_path / "trajectory.txt"
        p.write_text("0.0 0 0 0 0 0 0 1\n0.1 0 0 0\n")
        with pytest.raises(DatasetError, match=":2"):
            load_trajectory(p)

    def test_trajectory_bad_number(self, tmp_path):
        p = tmp_path / "trajectory.txt"
        p.write_text("0.0 0 0 zero 0 0 0 1\n")
        with pytest.raises(DatasetError, match=":1"):
            load_trajectory(p)

    def test_trajectory_non_unit_quaternion(self, tmp_path):
        p = tmp_path / "trajectory.txt"
        p.write_text("0.0 0 0 0 0 0 0 1.1\n")
        with pytest.raises(DatasetError, match="norm"):
            load_trajectory(p)

    def test_trajectory_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "trajectory.txt"
        p.write_text("# header\n\n0.0 1 2 3 0 0 0 1\n")
        rows = load_trajectory(p)
        assert len(rows) == 1
        assert np.allclose(rows[0][1].translation, [1, 2, 3])

    def test_missing_depth_image(self, tmp_path):
        frame = shifted_frame(0.0, 0.0)
        write_dataset(tmp_path, [frame])
        next((tmp_path / "depth").iterdir()).unlink()
        with pytest.raises(DatasetError, match="depth"):
            load_stream(tmp_path)

    def test_frame_without_pose_dropped_with_warning(self, tmp_path, caplog):
        frames = [shifted_frame(0.0, 0.0), shifted_frame(0.01, 0.1)]
        write_dataset(tmp_path, frames)
        # rewrite the trajectory with only the first pose
        traj = tmp_path / "trajectory.txt"
        traj.write_text(traj.read_text().splitlines()[0] + "\n")
        with caplog.at_level(logging.WARNING):
            loaded = load_stream(tmp_path)
        assert len(loaded) == 1
        assert "no pose" in caplog.text


class TestMotionScore:
    def test_static_camera_zero(self):
        a = shifted_frame(0.0, 0.0)
        b = shifted_frame(0.0, 0.1)
        s = motion_score(a, b)
        assert s.value == pytest.approx(0.0, abs=1e-9)
        assert s.valid_fraction > 0.9

    def test_pure_translation_analytic(self):
        # constant depth d, lateral shift tx: every pixel moves fx*tx/d
        tx, d = 0.1, 2.0
        a = shifted_frame(0.0, 0.0, depth=d)
        b = shifted_frame(tx, 0.1, depth=d)
        s = motion_score(a, b)
        assert s.value == pytest.approx(K.fx * tx / d, rel=1e-6)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(9)
        depth = rng.uniform(1.5, 3.0, size=(K.height, K.width)).astype(np.float32)
        ang = 0.02
        R = np.array([[np.cos(ang), -np.sin(ang), 0],
                      [np.sin(ang), np.cos(ang), 0], [0, 0, 1]])
        pose_b = Pose(R, np.array([0.03, -0.01, 0.02]))
        a = InputFrame(color=np.zeros((K.height, K.width, 3), np.uint8), depth=depth,
                       timestamp=0.0, pose=Pose.identity(), intrinsics=K)
        b = InputFrame(color=a.color, depth=depth, timestamp=0.1, pose=pose_b, intrinsics=K)
        s = motion_score(a, b, step=4)

        disps = []
        for v in range(0, K.height, 4):
            for u in range(0, K.width, 4):
                d = float(depth[v, u])
                world = a.pose.transform(unproject((u, v, d), K))
                cam = pose_b.inverse().transform(world)
                if cam[2] <= 0:
                    continue
                pu, pv, _ = project(cam, K)
                if 0 <= pu <= K.width - 1 and 0 <= pv <= K.height - 1:
                    disps.append(np.hypot(pu - u, pv - v))
        assert s.value == pytest.approx(float(np.mean(disps)), rel=1e-9)
        assert s.valid_fraction == pytest.approx(len(disps) / (15 * 20), abs=1e-9)

    def test_world_frame_invariance(self):
        rng = np.random.default_rng(4)
        a = shifted_frame(0.0, 0.0)
        b = shifted_frame(0.05, 0.1)
        base = motion_score(a, b)
        g = random_pose(rng)  # rigid change of world frame
        a2 = InputFrame(color=a.color, depth=a.depth, timestamp=a.timestamp,
                        pose=g.compose(a.pose), intrinsics=K)
        b2 = InputFrame(color=b.color, depth=b.depth, timestamp=b.timestamp,
                        pose=g.compose(b.pose), intrinsics=K)
        moved = motion_score(a2, b2)
        assert moved.value == pytest.approx(base.value, rel=1e-9)

    def test_invalid_depth_everywhere_is_undefined(self):
        a = shifted_frame(0.0, 0.0, depth=0.0)
        b = shifted_frame(0.0, 0.1, depth=0.0)
        s = motion_score(a, b)
        assert s.undefined and s.value == np.inf

    def test_out_of_order_rejected(self):
        a = shifted_frame(0.0, 0.5)
        b = shifted_frame(0.0, 0.1)
        with pytest.raises(ValueError, match="order"):
            motion_score(a, b)


class TestSelectKeyframes:
    def make_sequence(self, steps, dt=0.2):
        """Frames translating in x; steps[i] is the displacement before frame i."""
        frames = []
        x = 0.0
        for i, step in enumerate(steps):
            x += step
            frames.append(shifted_frame(x, i * dt))
        return frames

    def test_first_frame_always_emitted(self):
        frames = self.make_sequence([0.0, 0.01, 0.01])
        out = list(select_keyframes(frames))
        assert out[0] is frames[0]

    def test_one_keyframe_per_window_lowest_motion(self):
        # 5 frames per 1 s window at 0.2 s spacing; frame with the smallest
        # step since its predecessor wins its window
        # windows anchored at t=0: frames 1-4, frames 5-9, frame 10 alone
        steps = [0.0,
                 0.05, 0.04, 0.002, 0.04,         # window 1: frame 3 wins
                 0.05, 0.03, 0.001, 0.03, 0.04,   # window 2: frame 7 wins
                 0.05]                            # window 3: frame 10 only
        frames = self.make_sequence(steps)
        out = list(select_keyframes(frames))
        assert [f.timestamp for f in out] == pytest.approx(
            [frames[i].timestamp for i in (0, 3, 7, 10)])

    def test_tie_breaks_to_earliest(self):
        steps = [0.0, 0.02, 0.02, 0.02, 0.02, 0.02]
        frames = self.make_sequence(steps)
        out = list(select_keyframes(frames))
        # all five candidates in window 1 have identical scores
        assert out[1] is frames[1]

    def test_low_overlap_frames_never_selected(self):
        # frame 1 jumps 50 m from its predecessor and has no overlap; it
        # loses to any well-behaved competitor in the same window
        steps = [0.0, 50.0, 0.04, 0.04, 0.04, 0.04]
        frames = self.make_sequence(steps)
        out = list(select_keyframes(frames))
        assert all(f is not frames[1] for f in out)
        assert out[1] is frames[2]

    def test_window_with_only_bad_frames_emits_nothing(self):
        steps = [0.0, 50.0, 50.0, 50.0, 50.0,   # window 1: nothing usable
                 50.0, 0.01, 0.05, 0.05, 0.05,  # window 2: frame 6
                 0.05]                          # window 3: frame 10
        frames = self.make_sequence(steps)
        out = list(select_keyframes(frames))
        assert [f.timestamp for f in out] == pytest.approx(
            [frames[i].timestamp for i in (0, 6, 10)])

    def test_non_increasing_timestamps_rejected(self):
        frames = [shifted_frame(0.0, 0.0), shifted_frame(0.0, 0.0)]
        with pytest.raises(ValueError):
            list(select_keyframes(frames))

    def test_lazy_generator(self):
        frames = iter(self.make_sequence([0.0, 0.01, 0.01]))
        gen = select_keyframes(frames)
        assert next(gen).timestamp == 0.0
