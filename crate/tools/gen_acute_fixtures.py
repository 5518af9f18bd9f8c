#!/usr/bin/env python3
"""Generate the structured triangular mesh fixtures under fixtures/.

The family tiles the unit square with congruent acute isoceles triangles
(base dx = 1/n on rows spaced dy = 0.8 dx, alternate rows offset by dx/2)
plus right triangles of half width along the two vertical walls. Every
circumcenter lies inside its cell or on a face shared with a triangle
whose circumcenter is strictly interior, so the family satisfies the
two-point flux orthogonality condition with positive center distances.
The congruent interior pattern is what gives the finite volume scheme
its second-order state and adjoint errors at the circumcenters; on
unstructured acute meshes the local truncation errors no longer cancel
and the scheme drops to first order.

Levels use n = 4, 8, 16, 32, 64, i.e. h = 1/4 ... 1/64.
"""
import os


def build(n):
    m = (5 * n) // 4  # dy = 0.8 dx keeps all interior triangles acute
    dx, dy = 1.0 / n, 1.0 / m
    pts = []
    rows = []
    for j in range(m + 1):
        y = j * dy
        if j % 2 == 0:
            xs = [i * dx for i in range(n + 1)]
        else:
            xs = [0.0] + [(i + 0.5) * dx for i in range(n)] + [1.0]
        row = []
        for x in xs:
            row.append(len(pts))
            pts.append((x, y))
        rows.append(row)
    tris = []
    for j in range(m):
        lo, hi = rows[j], rows[j + 1]
        if len(lo) > len(hi):
            lo, hi = hi, lo
        # lo has n+1 vertices on the grid, hi has n+2 with the offsets.
        tris.append((lo[0], hi[0], hi[1]))
        for i in range(n):
            tris.append((lo[i], hi[i + 1], lo[i + 1]))
            if i + 2 < len(hi):
                tris.append((lo[i + 1], hi[i + 1], hi[i + 2]))
        if rows[j] is not lo:
            # Restore a consistent orientation when the rows were swapped.
            tris[-(2 * n + 1):] = [(a, c, b) for a, b, c in tris[-(2 * n + 1):]]
    return pts, tris


def emit(pts, tris):
    faces = {}
    for ci, (a, b, c) in enumerate(tris):
        for u, v in ((a, b), (b, c), (c, a)):
            faces.setdefault((min(u, v), max(u, v)), []).append(ci)
    lines = ["cells %d %d %d" % (len(pts), len(faces), len(tris))]
    for x, y in pts:
        lines.append("v %.17g %.17g" % (x, y))
    for (u, v), cells in sorted(faces.items()):
        assert len(cells) in (1, 2)
        right = cells[1] if len(cells) == 2 else -1
        lines.append("f %d %d %d %d" % (u, v, cells[0], right))
    for a, b, c in tris:
        lines.append("c %d %d %d" % (a, b, c))
    return "\n".join(lines) + "\n"


def main():
    outdir = os.path.join(os.path.dirname(__file__), "..", "fixtures")
    os.makedirs(outdir, exist_ok=True)
    for level, n in enumerate([4, 8, 16, 32, 64]):
        pts, tris = build(n)
        path = os.path.join(outdir, "tri-acute-l%d.txt" % level)
        with open(path, "w") as fh:
            fh.write(emit(pts, tris))
        print("%s: %d cells, h=%.6f" % (path, len(tris), 1.0 / n))


if __name__ == "__main__":
    main()
