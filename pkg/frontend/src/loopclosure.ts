// Loop-closure demo: rigidly shift every keyframe pose and later snap it
// back, showing that pose corrections land without re-fusing anything.

import type { PoseSeven } from './protocol';

export interface KeyframePose {
    id: number;
    pose: PoseSeven;
}

/** Translate every keyframe by `offset` (world frame); orientation untouched. */
export function shiftedPoses(
    poses: KeyframePose[],
    offset: [number, number, number],
): KeyframePose[] {
    return poses.map(({ id, pose }) => ({
        id,
        pose: [
            pose[0] + offset[0],
            pose[1] + offset[1],
            pose[2] + offset[2],
            pose[3], pose[4], pose[5], pose[6],
        ],
    }));
}

/** Alternates between jolting the map sideways and restoring it. */
export class LoopClosureDemo {
    private jolted = false;

    constructor(private readonly magnitude = 0.05) {}

    nextUpdates(poses: KeyframePose[]): KeyframePose[] {
        const sign = this.jolted ? -1 : 1;
        this.jolted = !this.jolted;
        return shiftedPoses(poses, [sign * this.magnitude, 0, 0]);
    }
}
