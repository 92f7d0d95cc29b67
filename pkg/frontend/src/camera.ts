// First-person camera matching the server's conventions: camera-to-world
// pose, +z forward, +y down. Yaw spins about the world y axis, pitch about
// the camera x axis; roll is locked by construction.

import type { PoseSeven } from './protocol';

export type Vec3 = [number, number, number];

const PITCH_LIMIT = (89 * Math.PI) / 180;

const MOVE_KEYS: Record<string, Vec3> = {
    KeyW: [0, 0, 1],  // forward
    KeyS: [0, 0, -1],
    KeyA: [-1, 0, 0],
    KeyD: [1, 0, 0],
    KeyR: [0, -1, 0], // up (y-down world)
    KeyF: [0, 1, 0],
};

export class FpsCamera {
    position: Vec3 = [0, 0, 0];
    yaw = 0;
    pitch = 0;
    speed = 1.0;            // m/s
    sensitivity = 0.005;    // radians per pixel of drag

    private pressed = new Set<string>();

    keyDown(code: string): void {
        if (code in MOVE_KEYS) this.pressed.add(code);
    }

    keyUp(code: string): void {
        this.pressed.delete(code);
    }

    releaseAll(): void {
        this.pressed.clear();
    }

    /** Mouse drag: dx pans, dy tilts (drag up looks up). */
    drag(dx: number, dy: number): void {
        this.yaw += dx * this.sensitivity;
        this.pitch -= dy * this.sensitivity;
        this.pitch = Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, this.pitch));
    }

    /** Advance held-key motion by dt seconds; returns whether we moved. */
    update(dt: number): boolean {
        if (this.pressed.size === 0 || dt <= 0) return false;
        let mx = 0;
        let my = 0;
        let mz = 0;
        for (const code of this.pressed) {
            const [x, y, z] = MOVE_KEYS[code];
            mx += x;
            my += y;
            mz += z;
        }
        if (mx === 0 && my === 0 && mz === 0) return false;
        const r = this.rotation();
        const s = this.speed * dt;
        for (let i = 0; i < 3; i++) {
            this.position[i] += s * (r[i][0] * mx + r[i][1] * my + r[i][2] * mz);
        }
        return true;
    }

    /** Camera-to-world rotation, columns are the camera axes: Ry(yaw)*Rx(pitch). */
    rotation(): number[][] {
        const cy = Math.cos(this.yaw);
        const sy = Math.sin(this.yaw);
        const cp = Math.cos(this.pitch);
        const sp = Math.sin(this.pitch);
        return [
            [cy, sy * sp, sy * cp],
            [0, cp, -sp],
            [-sy, cy * sp, cy * cp],
        ];
    }

    /** Unit quaternion [qx, qy, qz, qw] of the rotation matrix. */
    quaternion(): [number, number, number, number] {
        const m = this.rotation();
        const trace = m[0][0] + m[1][1] + m[2][2];
        let qx: number, qy: number, qz: number, qw: number;
        if (trace > 0) {
            const s = Math.sqrt(trace + 1.0) * 2;
            qw = s / 4;
            qx = (m[2][1] - m[1][2]) / s;
            qy = (m[0][2] - m[2][0]) / s;
            qz = (m[1][0] - m[0][1]) / s;
        } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
            const s = Math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2;
            qw = (m[2][1] - m[1][2]) / s;
            qx = s / 4;
            qy = (m[0][1] + m[1][0]) / s;
            qz = (m[0][2] + m[2][0]) / s;
        } else if (m[1][1] > m[2][2]) {
            const s = Math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2;
            qw = (m[0][2] - m[2][0]) / s;
            qx = (m[0][1] + m[1][0]) / s;
            qy = s / 4;
            qz = (m[1][2] + m[2][1]) / s;
        } else {
            const s = Math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2;
            qw = (m[1][0] - m[0][1]) / s;
            qx = (m[0][2] + m[2][0]) / s;
            qy = (m[1][2] + m[2][1]) / s;
            qz = s / 4;
        }
        const n = Math.hypot(qx, qy, qz, qw);
        return [qx / n, qy / n, qz / n, qw / n];
    }

    poseSeven(): PoseSeven {
        return [...this.position, ...this.quaternion()];
    }
}
