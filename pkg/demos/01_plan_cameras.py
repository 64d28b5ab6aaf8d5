"""
Choosing lenses for a four-camera surround rig
==============================================

Each camera must show a given patch of ground on the top view.  Working
backward from that patch through the mount geometry gives the field of
view the lens needs, expressed as a sensor-size-to-focal-length ratio.
"""

import math

from avm import LensSpec, default_rig, min_k_over_f, planning_report

rig = default_rig()

# the required ratio per camera, from the display range each must cover
for name, mount, display in rig.planning_rows():
    ratio = min_k_over_f(display, mount)
    print(f"{name:>6}: needs K/f >= {ratio:.2f} "
          f"(mount {mount.height} m high, tilted {mount.tilt_deg} deg)")

# a 148-degree lens gives 2*tan(74 deg) of ratio to spend
lens = LensSpec(fov_deg=148.0)
print(f"\n148 deg lens provides K/f = {2 * math.tan(math.radians(74.0)):.2f}")

# the report object renders the same comparison as a table
report = planning_report(rig.planning_rows(), lens)
print()
print(report.to_text())
print("\nall cameras pass" if report.all_ok else "\nsome camera fails")
