#!/usr/bin/env python3
"""Writes the synthetic hand fixtures under data/hands.

Hand frame: +z is the approach direction, +x the principal closing axis and
the origin sits at the grasp center. Every finger is a box standing on the
palm; each fingertip ray starts on the finger's inner face and points toward
the closing axis. Collision meshes are unions of disjoint boxes.
"""

import json
import math
import os
import sys

PALM_Z = (-0.100, -0.065)
TIP_Z = 0.012


def box(lo, hi):
    v = [(hi[0] if i & 1 else lo[0], hi[1] if i & 2 else lo[1], hi[2] if i & 4 else lo[2]) for i in range(8)]
    quads = [(0, 4, 6, 2), (1, 3, 7, 5), (0, 1, 5, 4), (2, 6, 7, 3), (0, 2, 3, 1), (4, 5, 7, 6)]
    return v, quads


def write_obj(path, boxes):
    with open(path, "w") as f:
        base = 1
        for lo, hi in boxes:
            v, quads = box(lo, hi)
            for p in v:
                f.write("v %.6f %.6f %.6f\n" % p)
            for q in quads:
                f.write("f %d %d %d %d\n" % tuple(base + i for i in q))
            base += 8


def finger(x, y, rays_z=(0.0,), size=(0.014, 0.016), toward=None):
    """A finger centred at (x, y) whose rays aim at `toward` (default: the
    closing axis point (0, y) for side fingers)."""
    if toward is None:
        tx, ty = 0.0, y
    else:
        tx, ty = toward
    dx, dy = tx - x, ty - y
    n = math.hypot(dx, dy)
    dx, dy = dx / n, dy / n
    hx, hy = size[0] / 2, size[1] / 2
    # start on the box boundary facing the target
    s = min(hx / abs(dx) if abs(dx) > 1e-12 else 1e9, hy / abs(dy) if abs(dy) > 1e-12 else 1e9)
    ox, oy = x + s * dx, y + s * dy
    rays = [{"origin": [round(ox, 6), round(oy, 6), z], "direction": [round(dx, 9), round(dy, 9), 0.0]} for z in rays_z]
    lo = (x - hx, y - hy, PALM_Z[1])
    hi = (x + hx, y + hy, TIP_Z)
    return (lo, hi), rays


def radial(r, deg, **kw):
    a = math.radians(deg)
    return finger(r * math.cos(a), r * math.sin(a), toward=(0.0, 0.0), **kw)


def grasp_type(name, fingers, travel=0.11, palm_half=(0.07, 0.035)):
    boxes = [((-palm_half[0], -palm_half[1], PALM_Z[0]), (palm_half[0], palm_half[1], PALM_Z[1]))]
    rays = []
    for b, r in fingers:
        boxes.append(b)
        rays.extend(r)
    return {"name": name, "boxes": boxes, "rays": rays, "travel": travel}


def hands():
    dh3 = [
        grasp_type("parallel_narrow", [finger(0.055, 0.016), finger(0.055, -0.016), finger(-0.055, 0.0)]),
        grasp_type("parallel_wide", [finger(0.055, 0.035), finger(0.055, -0.035), finger(-0.055, 0.0)]),
        grasp_type("tripod", [radial(0.055, 0), radial(0.055, 120), radial(0.055, 240)]),
        grasp_type("pinch", [finger(0.045, 0.0, rays_z=(-0.006, 0.006), size=(0.012, 0.012)),
                             finger(-0.045, 0.0, rays_z=(-0.006, 0.006), size=(0.012, 0.012))], travel=0.09),
    ]
    allegro = []
    for spread in (0.012, 0.024):
        allegro.append(grasp_type("power_%d" % round(spread * 1000),
                                  [finger(0.055, spread), finger(0.055, -spread), finger(0.055, 3 * spread), finger(-0.055, 0.0)]))
    for spread in (0.015, 0.03):
        allegro.append(grasp_type("precision_%d" % round(spread * 1000),
                                  [finger(0.05, spread, size=(0.012, 0.012)), finger(0.05, -spread, size=(0.012, 0.012)),
                                   finger(-0.05, 0.0, size=(0.012, 0.012))]))
    allegro.append(grasp_type("tripod", [radial(0.055, 0), radial(0.055, 120), radial(0.055, 240)]))
    allegro.append(grasp_type("quad_sphere", [radial(0.055, a) for a in (0, 90, 180, 270)]))
    allegro.append(grasp_type("pinch", [finger(0.045, 0.0, rays_z=(-0.006, 0.006), size=(0.012, 0.012)),
                                        finger(-0.045, 0.0, rays_z=(-0.006, 0.006), size=(0.012, 0.012))], travel=0.09))
    allegro.append(grasp_type("lateral", [finger(0.05, 0.0, rays_z=(-0.008, 0.0, 0.008)), finger(-0.05, 0.0)]))
    allegro.append(grasp_type("wide_span", [finger(0.06, 0.03), finger(0.06, -0.03), finger(-0.06, 0.0)], travel=0.12))
    allegro.append(grasp_type("hook_pair", [finger(0.05, 0.012), finger(-0.05, -0.012)]))

    inspire = []
    for spread in (0.012, 0.02):
        inspire.append(grasp_type("power_%d" % round(spread * 1000),
                                  [finger(0.055, s * spread) for s in (-1.5, -0.5, 0.5, 1.5)] + [finger(-0.055, 0.0)]))
    inspire.append(grasp_type("precision_2", [finger(0.045, 0.0, rays_z=(-0.005, 0.005), size=(0.012, 0.012)),
                                              finger(-0.045, 0.0, rays_z=(-0.005, 0.005), size=(0.012, 0.012))], travel=0.09))
    inspire.append(grasp_type("precision_3", [finger(0.05, 0.012), finger(0.05, -0.012), finger(-0.05, 0.0)]))
    inspire.append(grasp_type("tripod", [radial(0.055, 0), radial(0.055, 120), radial(0.055, 240)]))
    inspire.append(grasp_type("five_sphere", [radial(0.06, a) for a in (0, 72, 144, 216, 288)]))
    inspire.append(grasp_type("lateral", [finger(0.05, 0.0, rays_z=(-0.008, 0.0, 0.008)), finger(-0.05, 0.0)]))
    inspire.append(grasp_type("wide_span", [finger(0.06, 0.035), finger(0.06, -0.035), finger(-0.06, 0.0)], travel=0.12))

    jaw = [grasp_type("parallel", [finger(0.05, 0.0, rays_z=(0.0,), size=(0.01, 0.03)),
                                   finger(-0.05, 0.0, rays_z=(0.0,), size=(0.01, 0.03))], travel=0.1)]
    # two rays per pad so a flat contact patch is not a single point
    for t in jaw:
        t["rays"] = [dict(r, origin=[r["origin"][0], y, r["origin"][2]]) for r in t["rays"] for y in (-0.008, 0.008)]
    return {"dh3": dh3, "allegro": allegro, "inspire": inspire, "parallel_jaw": jaw}


def main(out_dir):
    mesh_dir = os.path.join(out_dir, "meshes")
    os.makedirs(mesh_dir, exist_ok=True)
    for hand, types in hands().items():
        spec = {"name": hand, "tag": hand, "collision_voxel_size": 0.005, "grasp_types": []}
        for t in types:
            mesh_name = "%s_%s.obj" % (hand, t["name"])
            write_obj(os.path.join(mesh_dir, mesh_name), t["boxes"])
            spec["grasp_types"].append({
                "name": t["name"],
                "principal_closing_axis": [1.0, 0.0, 0.0],
                "approach_axis": [0.0, 0.0, 1.0],
                "max_close_travel": t["travel"],
                "collision_mesh": "meshes/" + mesh_name,
                "fingertip_rays": t["rays"],
            })
        with open(os.path.join(out_dir, hand + ".hand"), "w") as f:
            json.dump(spec, f, indent=2)
            f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "hands"))
