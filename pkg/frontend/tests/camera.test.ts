import { describe, expect, it } from 'vitest';

import { FpsCamera } from '../src/camera';

const DEG = Math.PI / 180;

describe('FpsCamera', () => {
    it('does not move with nothing pressed', () => {
        const cam = new FpsCamera();
        expect(cam.update(1.0)).toBe(false);
        expect(cam.position).toEqual([0, 0, 0]);
    });

    it('forward key for 1 s at 1 m/s advances z by ~1 m in camera frame', () => {
        const cam = new FpsCamera();
        cam.keyDown('KeyW');
        for (let i = 0; i < 60; i++) cam.update(1 / 60);
        expect(cam.position[0]).toBeCloseTo(0, 9);
        expect(cam.position[1]).toBeCloseTo(0, 9);
        expect(cam.position[2]).toBeCloseTo(1, 9);
    });

    it('forward follows the yaw direction', () => {
        const cam = new FpsCamera();
        cam.yaw = 90 * DEG;
        cam.keyDown('KeyW');
        cam.update(1.0);
        expect(cam.position[0]).toBeCloseTo(1, 9);
        expect(cam.position[2]).toBeCloseTo(0, 9);
    });

    it('strafe is orthogonal to forward', () => {
        const cam = new FpsCamera();
        cam.yaw = 30 * DEG;
        cam.keyDown('KeyD');
        cam.update(1.0);
        const r = cam.rotation();
        const dot = cam.position[0] * r[0][2] + cam.position[1] * r[1][2] + cam.position[2] * r[2][2];
        expect(dot).toBeCloseTo(0, 9);
    });

    it('pitch clamps at 89 degrees', () => {
        const cam = new FpsCamera();
        cam.drag(0, -1e6); // drag far up
        expect(cam.pitch).toBeCloseTo(89 * DEG, 6);
        cam.drag(0, 2e6);
        expect(cam.pitch).toBeCloseTo(-89 * DEG, 6);
    });

    it('drag up looks up (y-down world: forward y goes negative)', () => {
        const cam = new FpsCamera();
        cam.drag(0, -100);
        const r = cam.rotation();
        expect(r[1][2]).toBeLessThan(0);
    });

    it('roll stays locked: the camera x axis is always horizontal', () => {
        const cam = new FpsCamera();
        for (const [yaw, pitch] of [[0.3, -0.8], [2.1, 0.5], [-1.2, 1.4]]) {
            cam.yaw = yaw;
            cam.pitch = pitch;
            const r = cam.rotation();
            expect(Math.abs(r[1][0])).toBeLessThan(1e-12);
        }
    });

    it('quaternion is unit length and matches the matrix', () => {
        const cam = new FpsCamera();
        cam.yaw = 0.7;
        cam.pitch = -0.4;
        const [qx, qy, qz, qw] = cam.quaternion();
        expect(Math.hypot(qx, qy, qz, qw)).toBeCloseTo(1, 12);
        // rebuild the rotation from the quaternion and compare
        const r = cam.rotation();
        const m = [
            [1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)],
            [2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)],
            [2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)],
        ];
        for (let i = 0; i < 3; i++) {
            for (let j = 0; j < 3; j++) {
                expect(m[i][j]).toBeCloseTo(r[i][j], 10);
            }
        }
    });

    it('poseSeven is position plus quaternion', () => {
        const cam = new FpsCamera();
        cam.position = [1, 2, 3];
        const pose = cam.poseSeven();
        expect(pose.slice(0, 3)).toEqual([1, 2, 3]);
        expect(pose.slice(3)).toEqual([0, 0, 0, 1]);
    });

    it('releaseAll stops motion', () => {
        const cam = new FpsCamera();
        cam.keyDown('KeyW');
        cam.releaseAll();
        expect(cam.update(1.0)).toBe(false);
    });
});
