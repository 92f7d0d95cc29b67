"""Long-running render service: replayed ingest, on-demand rendering, streaming.

One websocket connection carries JSON control messages client->server and
binary frame messages server->client. Three logical tasks share state:

- ingest: replays the dataset's keyframes into the store on their timeline
- render loop: renders the latest pose/mode at a fixed rate (per session)
- session I/O: applies control messages, streams frames with a 2-deep
  drop-oldest queue so a slow client never stalls rendering or ingest
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import time
from dataclasses import replace

import numpy as np
import websockets

from .dataset import InputFrame, select_keyframes
from .engine import MODES, WARP_MODES, RenderConfig, Renderer
from .geometry import Intrinsics, Pose
from .protocol import ProtocolError, encode_frame, parse_control
from .store import KeyframeStore, StoreError

log = logging.getLogger(__name__)

FRAME_QUEUE_DEPTH = 2


class RenderService:
    def __init__(self, keyframes: list[InputFrame], width: int = 640, height: int = 480,
                 render_fps: float = 15.0, replay_fps: float = 0.0,
                 config: RenderConfig | None = None):
        """replay_fps > 0 spaces keyframe insertion on the stream timeline
        rescaled to that rate; 0 inserts everything up front."""
        if not keyframes:
            raise ValueError("service needs at least one keyframe")
        self.keyframes = keyframes
        self.render_fps = render_fps
        self.replay_fps = replay_fps
        self.store = KeyframeStore()
        src_K = keyframes[0].intrinsics
        sx = width / src_K.width
        sy = height / src_K.height
        self.target_K = Intrinsics(
            fx=src_K.fx * sx, fy=src_K.fy * sy,
            cx=src_K.cx * sx, cy=src_K.cy * sy,
            width=width, height=height,
        )
        self.config = config or RenderConfig()
        self.renderer = Renderer(self.store, self.target_K, self.config)
        self.pose: Pose = keyframes[0].pose.copy()
        self.mode: str = "color"
        self.warp: str = "forward"
        self.frames_sent = 0
        self.frames_dropped = 0
        self._ingest_done = asyncio.Event()

    @classmethod
    def from_dataset(cls, root, **kwargs) -> "RenderService":
        from .dataset import load_stream
        frames = load_stream(root)
        keyframes = list(select_keyframes(frames))
        return cls(keyframes, **kwargs)

    async def ingest(self):
        """Insert keyframes on the replay timeline (or immediately)."""
        if self.replay_fps <= 0:
            for kf in self.keyframes:
                self.store.insert(kf)
            self._ingest_done.set()
            return
        t_start = self.keyframes[0].timestamp
        wall_start = time.monotonic()
        native_dt = (
            (self.keyframes[-1].timestamp - t_start) / max(1, len(self.keyframes) - 1)
        )
        speed = self.replay_fps * native_dt if native_dt > 0 else 1.0
        for kf in self.keyframes:
            due = wall_start + (kf.timestamp - t_start) / max(speed, 1e-9)
            delay = due - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
            self.store.insert(kf)
        self._ingest_done.set()

    def handle_control(self, text: str) -> dict:
        """Apply one control message; returns the JSON-serializable reply."""
        try:
            msg = parse_control(text)
        except ProtocolError as exc:
            return {"ok": False, "error": str(exc)}
        mtype = msg["type"]
        try:
            if mtype == "set_pose":
                self.pose = msg["_pose"]
            elif mtype == "set_mode":
                self.mode = msg["mode"]
            elif mtype == "set_params":
                self._apply_params(msg["params"])
            elif mtype == "update_poses":
                self.store.apply_pose_updates(msg["_updates"])
            elif mtype == "get_stats":
                return {"ok": True, "type": mtype, "stats": self.stats()}
        except (StoreError, ProtocolError, ValueError) as exc:
            return {"ok": False, "error": str(exc)}
        return {"ok": True, "type": mtype}

    def _apply_params(self, params: dict):
        if "warp" in params:
            if params["warp"] not in WARP_MODES:
                raise ProtocolError(f"unknown warp mode {params['warp']!r}")
            self.warp = params["warp"]
        if "num_views" in params:
            n = int(params["num_views"])
            if not 1 <= n <= 256:
                raise ProtocolError("num_views out of range [1, 256]")
            self._reconfigure(num_views=n)
        if "temporal_blend" in params:
            b = float(params["temporal_blend"])
            if not 0.0 <= b <= 1.0:
                raise ProtocolError("temporal_blend out of range [0, 1]")
            self._reconfigure(temporal_blend=b)
        unknown = set(params) - {"warp", "num_views", "temporal_blend"}
        if unknown:
            raise ProtocolError(f"unknown params: {sorted(unknown)}")

    def _reconfigure(self, **changes):
        self.config = replace(self.config, **changes)
        self.renderer.config = self.config
        self.renderer.temporal.blend = self.config.temporal_blend

    def stats(self) -> dict:
        # keyframe poses let a client compose update_poses batches
        return {
            "keyframes": len(self.store),
            "keyframe_poses": [
                {"id": e.id, "pose": [round(v, 9) for v in e.pose.to_quaternion()]}
                for e in self.store.snapshot()
            ],
            "frames_sent": self.frames_sent,
            "frames_dropped": self.frames_dropped,
            "mode": self.mode,
            "warp": self.warp,
            "cache": self.renderer.cache.stats(),
        }

    def render_once(self) -> bytes:
        # snapshot: control messages may change these mid-render
        pose, mode, warp = self.pose, self.mode, self.warp
        result = self.renderer.render(pose, mode=mode, warp=warp)
        return encode_frame(mode, result.frame_index, result.image)

    async def session(self, websocket):
        """One interactive session: control reader + render/send loop."""
        queue: asyncio.Queue[bytes] = asyncio.Queue(maxsize=FRAME_QUEUE_DEPTH)

        async def reader():
            async for message in websocket:
                if isinstance(message, bytes):
                    continue  # clients only send text control frames
                await websocket.send(json.dumps(self.handle_control(message)))

        async def sender():
            while True:
                await websocket.send(await queue.get())
                self.frames_sent += 1

        async def render_loop():
            loop = asyncio.get_running_loop()
            interval = 1.0 / self.render_fps
            while True:
                t0 = time.monotonic()
                if len(self.store) > 0:
                    frame = await loop.run_in_executor(None, self.render_once)
                    while queue.full():
                        queue.get_nowait()
                        self.frames_dropped += 1
                    queue.put_nowait(frame)
                delay = interval - (time.monotonic() - t0)
                if delay > 0:
                    await asyncio.sleep(delay)

        tasks = [
            asyncio.create_task(reader()),
            asyncio.create_task(sender()),
            asyncio.create_task(render_loop()),
        ]
        try:
            done, _ = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for t in done:
                exc = t.exception()
                if exc is not None and not isinstance(exc, websockets.ConnectionClosed):
                    raise exc
        finally:
            for t in tasks:
                t.cancel()

    async def serve(self, host: str = "127.0.0.1", port: int = 8765,
                    ready: asyncio.Event | None = None):
        ingest_task = asyncio.create_task(self.ingest())
        try:
            async with websockets.serve(self.session, host, port, max_size=None) as server:
                if ready is not None:
                    ready.set()
                await asyncio.Future()  # run until cancelled
        finally:
            ingest_task.cancel()
