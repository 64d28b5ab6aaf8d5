"""
Bucket position and working radius from joint angles
====================================================

The linkage runs boom -> arm -> bucket in a vertical plane through the
slew axis.  Forward kinematics turns the three joint angles into tip
positions, the bucket-to-ground distance, and the slew radius that the
top view draws as the working circle.
"""

from avm import JointState, default_rig, forward_kinematics, overlay_payload

rig = default_rig()

# sweep a dig cycle: boom rises while the arm folds in
print(f"{'boom':>6} {'arm':>6} {'bucket':>7} | {'D_ground':>9} {'radius':>7}")
for step in range(7):
    t = step / 6.0
    joints = JointState(
        boom_deg=5.0 + 35.0 * t,
        arm_deg=-20.0 - 50.0 * t,
        bucket_deg=30.0 * t,
    )
    sol = forward_kinematics(rig.links, joints, rig.limits)
    print(f"{joints.boom_deg:6.1f} {joints.arm_deg:6.1f} {joints.bucket_deg:7.1f} | "
          f"{sol.ground_distance:9.3f} {sol.slew_radius:7.3f}")

# the overlay payload is the same numbers packaged for drawing:
# line segments in meters plus the readouts, all in the rig frame
joints = JointState(boom_deg=30.0, arm_deg=-60.0, bucket_deg=15.0)
payload = overlay_payload(forward_kinematics(rig.links, joints, rig.limits), rig.links)
print("\noverlay payload for boom 30 / arm -60 / bucket 15:")
for key, value in payload.to_dict().items():
    print(f"  {key}: {value}")
