// Connection and stream state for one render session.
//
// Responsibilities: websocket lifecycle with auto-reconnect, frame decode
// with a malformed-frame counter, set_pose rate limiting (at most one per
// render frame interval), and HUD statistics (fps, frame index, latency).

import {
    ControlReply,
    FrameMessage,
    Mode,
    PoseSeven,
    ProtocolError,
    decodeFrame,
    getStatsMessage,
    parseReply,
    setModeMessage,
    setPoseMessage,
    updatePosesMessage,
} from './protocol';

export type ConnectionStatus = 'connecting' | 'connected' | 'closed' | 'error';

/** The subset of WebSocket the viewer touches; swappable in tests. */
export interface SocketLike {
    binaryType: string;
    onopen: (() => void) | null;
    onmessage: ((ev: { data: ArrayBuffer | string }) => void) | null;
    onclose: (() => void) | null;
    onerror: (() => void) | null;
    send(data: string): void;
    close(): void;
}

export interface ViewerOptions {
    url: string;
    renderFps?: number;
    reconnectDelayMs?: number;
    createSocket?: (url: string) => SocketLike;
    now?: () => number;
}

const FPS_WINDOW_MS = 2000;

export class Viewer {
    status: ConnectionStatus = 'closed';
    mode: Mode = 'color';
    lastError = '';
    frameIndex = -1;
    malformedFrames = 0;
    latencyMs: number | null = null; // set_pose send -> next frame arrival

    onFrame: ((frame: FrameMessage) => void) | null = null;
    onChange: (() => void) | null = null;
    onStats: ((reply: ControlReply) => void) | null = null;

    private ws: SocketLike | null = null;
    private closedByUser = false;
    private requestedMode: Mode | null = null;
    private pendingPose: PoseSeven | null = null;
    private lastPoseAt = -Infinity;
    private poseSentAt: number | null = null;
    private poseTimer: ReturnType<typeof setTimeout> | null = null;
    private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
    private frameTimes: number[] = [];

    constructor(private readonly opts: ViewerOptions) {}

    private get now(): number {
        return (this.opts.now ?? Date.now)();
    }

    private get poseIntervalMs(): number {
        return 1000 / (this.opts.renderFps ?? 15);
    }

    connect(): void {
        this.closedByUser = false;
        if (this.reconnectTimer !== null) {
            clearTimeout(this.reconnectTimer);
            this.reconnectTimer = null;
        }
        this.setStatus('connecting');
        const factory = this.opts.createSocket
            ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
        let ws: SocketLike;
        try {
            ws = factory(this.opts.url);
        } catch (err) {
            this.lastError = String(err);
            this.setStatus('error');
            this.scheduleReconnect();
            return;
        }
        ws.binaryType = 'arraybuffer';
        ws.onopen = () => this.setStatus('connected');
        ws.onmessage = (ev) => this.handleMessage(ev.data);
        ws.onerror = () => {
            this.lastError = 'websocket error';
            this.setStatus('error');
        };
        ws.onclose = () => {
            this.ws = null;
            if (!this.closedByUser) {
                this.setStatus('connecting');
                this.scheduleReconnect();
            } else {
                this.setStatus('closed');
            }
        };
        this.ws = ws;
    }

    close(): void {
        this.closedByUser = true;
        if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
        if (this.poseTimer !== null) clearTimeout(this.poseTimer);
        this.reconnectTimer = null;
        this.poseTimer = null;
        this.ws?.close();
        this.setStatus('closed');
    }

    private scheduleReconnect(): void {
        if (this.closedByUser || this.reconnectTimer !== null) return;
        const delay = this.opts.reconnectDelayMs ?? 1000;
        this.reconnectTimer = setTimeout(() => {
            this.reconnectTimer = null;
            this.connect();
        }, delay);
    }

    private setStatus(status: ConnectionStatus): void {
        this.status = status;
        this.onChange?.();
    }

    private handleMessage(data: ArrayBuffer | string): void {
        if (typeof data === 'string') {
            this.handleReply(data);
            return;
        }
        let frame: FrameMessage;
        try {
            frame = decodeFrame(data);
        } catch (err) {
            if (err instanceof ProtocolError) {
                this.malformedFrames += 1;
                this.onChange?.();
                return;
            }
            throw err;
        }
        const t = this.now;
        this.frameIndex = frame.frameIndex;
        this.frameTimes.push(t);
        while (this.frameTimes.length > 0 && this.frameTimes[0] < t - FPS_WINDOW_MS) {
            this.frameTimes.shift();
        }
        if (this.poseSentAt !== null) {
            this.latencyMs = t - this.poseSentAt;
            this.poseSentAt = null;
        }
        this.onFrame?.(frame);
        this.onChange?.();
    }

    private handleReply(text: string): void {
        let reply: ControlReply;
        try {
            reply = parseReply(text);
        } catch (err) {
            this.lastError = String(err);
            this.onChange?.();
            return;
        }
        if (!reply.ok) {
            this.lastError = reply.error ?? 'request rejected';
        } else if (reply.type === 'set_mode' && this.requestedMode !== null) {
            // HUD flips only once the server acknowledged the mode
            this.mode = this.requestedMode;
            this.requestedMode = null;
        } else if (reply.type === 'get_stats') {
            this.onStats?.(reply);
        }
        this.onChange?.();
    }

    /** Frames per second over a sliding window. */
    fps(): number {
        if (this.frameTimes.length < 2) return 0;
        const span = this.frameTimes[this.frameTimes.length - 1] - this.frameTimes[0];
        if (span <= 0) return 0;
        return ((this.frameTimes.length - 1) * 1000) / span;
    }

    /**
     * Queue a pose for sending. At most one set_pose goes out per render
     * frame interval; the newest pose wins while throttled.
     */
    sendPose(pose: PoseSeven): void {
        this.pendingPose = pose;
        const wait = this.lastPoseAt + this.poseIntervalMs - this.now;
        if (wait <= 0) {
            this.flushPose();
        } else if (this.poseTimer === null) {
            this.poseTimer = setTimeout(() => {
                this.poseTimer = null;
                this.flushPose();
            }, wait);
        }
    }

    private flushPose(): void {
        if (this.pendingPose === null || this.ws === null || this.status !== 'connected') {
            return;
        }
        const pose = this.pendingPose;
        this.pendingPose = null;
        this.lastPoseAt = this.now;
        this.poseSentAt = this.lastPoseAt;
        this.ws.send(setPoseMessage(pose));
    }

    setMode(mode: Mode): void {
        if (this.ws === null || this.status !== 'connected') return;
        this.requestedMode = mode;
        this.ws.send(setModeMessage(mode));
    }

    requestStats(): void {
        this.ws?.send(getStatsMessage());
    }

    updatePoses(updates: { id: number; pose: PoseSeven }[]): void {
        this.ws?.send(updatePosesMessage(updates));
    }
}
