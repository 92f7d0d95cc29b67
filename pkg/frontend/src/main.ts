// Browser entry point: canvas display, HUD, camera input, control buttons.

import { FpsCamera } from './camera';
import { LoopClosureDemo } from './loopclosure';
import { MODES, Mode, toRGBA } from './protocol';
import { Viewer } from './viewer';

const RENDER_FPS = 15;

const params = new URLSearchParams(location.search);
const url = params.get('server') ?? `ws://${location.hostname || '127.0.0.1'}:8765`;

const canvas = document.getElementById('view') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const hud = document.getElementById('hud')!;
const buttons = document.getElementById('buttons')!;

const camera = new FpsCamera();
const viewer = new Viewer({ url, renderFps: RENDER_FPS });
const demo = new LoopClosureDemo();
let demoArmed = false;

viewer.onFrame = (frame) => {
    if (canvas.width !== frame.width || canvas.height !== frame.height) {
        canvas.width = frame.width;
        canvas.height = frame.height;
    }
    ctx.putImageData(new ImageData(toRGBA(frame), frame.width, frame.height), 0, 0);
};

viewer.onChange = () => {
    hud.textContent = [
        `server ${url}`,
        `status ${viewer.status}${viewer.lastError ? ` (${viewer.lastError})` : ''}`,
        `mode ${viewer.mode}`,
        `frame ${viewer.frameIndex}  fps ${viewer.fps().toFixed(1)}`,
        `latency ${viewer.latencyMs === null ? '-' : viewer.latencyMs.toFixed(0) + ' ms'}`,
        `malformed ${viewer.malformedFrames}`,
    ].join('\n');
};

viewer.onStats = (reply) => {
    if (demoArmed && reply.stats) {
        demoArmed = false;
        viewer.updatePoses(demo.nextUpdates(reply.stats.keyframe_poses));
    }
};

for (const mode of MODES) {
    const b = document.createElement('button');
    b.textContent = mode;
    b.onclick = () => viewer.setMode(mode as Mode);
    buttons.appendChild(b);
}
const demoButton = document.createElement('button');
demoButton.textContent = 'loop closure demo';
demoButton.onclick = () => {
    demoArmed = true;
    viewer.requestStats();
};
buttons.appendChild(demoButton);

window.addEventListener('keydown', (e) => {
    if (!e.repeat) camera.keyDown(e.code);
});
window.addEventListener('keyup', (e) => camera.keyUp(e.code));
window.addEventListener('blur', () => camera.releaseAll());

let dragging = false;
canvas.addEventListener('mousedown', () => {
    dragging = true;
});
window.addEventListener('mouseup', () => {
    dragging = false;
});
window.addEventListener('mousemove', (e) => {
    if (!dragging) return;
    camera.drag(e.movementX, e.movementY);
    viewer.sendPose(camera.poseSeven());
});

let last = performance.now();
function tick(now: number) {
    const dt = (now - last) / 1000;
    last = now;
    if (camera.update(dt)) {
        viewer.sendPose(camera.poseSeven());
    }
    requestAnimationFrame(tick);
}

viewer.connect();
requestAnimationFrame(tick);
