"""Real-time novel view synthesis for RGB-D streams.

Keyframes are selected from the input stream, encoded to 8-channel feature
maps, forward-warped into a virtual camera as depth-meshed triangles, and
fused per pixel with a depth-aware case-based blending rule. Poses stay
mutable throughout: loop-closure updates take effect on the very next frame
because no global model is ever built.
"""

from .dataset import InputFrame, MotionScore, load_stream, motion_score, select_keyframes
from .engine import RenderConfig, Renderer, RenderResult
from .fusion import DepthErrorModel, Fragment, FusionBuffer, FusionPixel, fragment_weight, fuse_fragment
from .geometry import Intrinsics, Pose, project, relative_pose, unproject, view_direction
from .store import Keyframe, KeyframeStore

__version__ = "0.1.0"

__all__ = [
    "InputFrame", "MotionScore", "load_stream", "motion_score", "select_keyframes",
    "RenderConfig", "Renderer", "RenderResult",
    "DepthErrorModel", "Fragment", "FusionBuffer", "FusionPixel",
    "fragment_weight", "fuse_fragment",
    "Intrinsics", "Pose", "project", "relative_pose", "unproject", "view_direction",
    "Keyframe", "KeyframeStore",
]
