// Wire format for the render stream.
//
// Binary frames, little-endian header:
//   magic "LNVS" | version u8 | mode u8 | width u32 | height u32
//   | frame_index u64 | payload width*height*3 bytes RGB8 row-major
//
// Control messages travel the other way as JSON text frames.

export const HEADER_SIZE = 22;
export const VERSION = 1;
export const MODES = ['color', 'depth', 'confidence'] as const;
export type Mode = (typeof MODES)[number];

const MAGIC = [0x4c, 0x4e, 0x56, 0x53]; // "LNVS"

export class ProtocolError extends Error {}

export interface FrameMessage {
    mode: Mode;
    width: number;
    height: number;
    frameIndex: number;
    payload: Uint8Array;
}

export function decodeFrame(data: ArrayBuffer): FrameMessage {
    if (data.byteLength < HEADER_SIZE) {
        throw new ProtocolError(`frame shorter than header (${data.byteLength} bytes)`);
    }
    const bytes = new Uint8Array(data);
    for (let i = 0; i < 4; i++) {
        if (bytes[i] !== MAGIC[i]) {
            throw new ProtocolError('bad magic');
        }
    }
    const view = new DataView(data);
    const version = view.getUint8(4);
    if (version !== VERSION) {
        throw new ProtocolError(`unsupported version ${version}`);
    }
    const modeCode = view.getUint8(5);
    if (modeCode >= MODES.length) {
        throw new ProtocolError(`unknown mode byte ${modeCode}`);
    }
    const width = view.getUint32(6, true);
    const height = view.getUint32(10, true);
    const frameIndex = Number(view.getBigUint64(14, true));
    const payload = bytes.subarray(HEADER_SIZE);
    if (payload.length !== 3 * width * height) {
        throw new ProtocolError(
            `payload length ${payload.length} != 3*${width}*${height}`,
        );
    }
    return { mode: MODES[modeCode], width, height, frameIndex, payload };
}

/** RGB payload expanded to opaque RGBA, ready for ImageData. */
export function toRGBA(frame: FrameMessage): Uint8ClampedArray<ArrayBuffer> {
    const n = frame.width * frame.height;
    const out = new Uint8ClampedArray(n * 4);
    for (let i = 0; i < n; i++) {
        out[i * 4] = frame.payload[i * 3];
        out[i * 4 + 1] = frame.payload[i * 3 + 1];
        out[i * 4 + 2] = frame.payload[i * 3 + 2];
        out[i * 4 + 3] = 255;
    }
    return out;
}

export type PoseSeven = number[]; // tx ty tz qx qy qz qw

function checkPose(pose: PoseSeven): void {
    if (pose.length !== 7 || pose.some((v) => !Number.isFinite(v))) {
        throw new ProtocolError('pose needs 7 finite numbers');
    }
    const [qx, qy, qz, qw] = pose.slice(3);
    const norm = Math.hypot(qx, qy, qz, qw);
    if (Math.abs(norm - 1.0) > 1e-3) {
        throw new ProtocolError(`quaternion norm ${norm.toFixed(6)} outside tolerance`);
    }
}

export function setPoseMessage(pose: PoseSeven): string {
    checkPose(pose);
    return JSON.stringify({ type: 'set_pose', pose });
}

export function setModeMessage(mode: Mode): string {
    return JSON.stringify({ type: 'set_mode', mode });
}

export function setParamsMessage(params: Record<string, unknown>): string {
    return JSON.stringify({ type: 'set_params', params });
}

export function updatePosesMessage(updates: { id: number; pose: PoseSeven }[]): string {
    updates.forEach((u) => checkPose(u.pose));
    return JSON.stringify({ type: 'update_poses', updates });
}

export function getStatsMessage(): string {
    return JSON.stringify({ type: 'get_stats' });
}

export interface ControlReply {
    ok: boolean;
    type?: string;
    error?: string;
    stats?: {
        keyframes: number;
        keyframe_poses: { id: number; pose: PoseSeven }[];
        [key: string]: unknown;
    };
}

export function parseReply(text: string): ControlReply {
    let parsed: unknown;
    try {
        parsed = JSON.parse(text);
    } catch {
        throw new ProtocolError('malformed JSON reply');
    }
    if (typeof parsed !== 'object' || parsed === null || typeof (parsed as ControlReply).ok !== 'boolean') {
        throw new ProtocolError('reply must be an object with an "ok" flag');
    }
    return parsed as ControlReply;
}
