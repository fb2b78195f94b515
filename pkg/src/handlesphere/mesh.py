"""Antipodally symmetric triangulations of S^2 with circular holes.

The construction is fully deterministic and symmetric by construction:
every inserted vertex is mirrored through the origin exactly (floating
point negation is exact), so the discrete involution is an exact
permutation of the vertex set and maps the triangle set onto itself.

A holed mesh is built as
  1. a subdivided icosahedron at the requested background edge length,
  2. per hole: carve all background triangles near the hole center,
  3. insert the exact boundary circle at geodesic radius r_hole, graded
     rings through the attachment annulus up to R_hole, and geometrically
     growing rings out to the carve rim,
  4. stitch consecutive rings, and the last ring to the carve rim, with a
     zipper strip; mirror everything to the antipodal hole.

Every annulus ring is a mesh line, so no triangle straddles the metric
discontinuity at the attachment circle theta = R_hole.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import HandleGeometry, geodesic_distance

ICOSA_ARC = 1.1071487177940904  # arc edge length of the unit icosahedron


class MeshError(ValueError):
    pass


# ---------------------------------------------------------------------------
# icosphere


def icosahedron():
    p = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    tris = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return verts, tris


def subdivide(verts, tris):
    """One 4-to-1 refinement; midpoints are normalized edge sums, so the
    exact +/- pairing of a centrally symmetric mesh is preserved bitwise."""
    verts = list(map(np.asarray, verts))
    cache = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in cache:
            m = verts[i] + verts[j]
            m = m / np.linalg.norm(m)
            cache[key] = len(verts)
            verts.append(m)
        return cache[key]

    out = []
    for a, b, c in tris:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.asarray(verts), np.asarray(out, dtype=np.int64)


def icosphere(level: int):
    """Subdivided icosahedron: 10*4^level + 2 vertices, outward oriented."""
    verts, tris = icosahedron()
    for _ in range(level):
        verts, tris = subdivide(verts, tris)
    return verts, tris


def _key(v):
    """Bytes key for exact vertex lookup; adding 0.0 maps -0.0 to +0.0 so
    negation round-trips."""
    return (np.asarray(v) + 0.0).tobytes()


def build_pairing(verts: np.ndarray) -> np.ndarray:
    """Permutation pi with verts[pi[i]] == -verts[i] bitwise."""
    index = {_key(v): i for i, v in enumerate(verts)}
    pairing = np.empty(len(verts), dtype=np.int64)
    for i, v in enumerate(verts):
        j = index.get(_key(-v))
        if j is None:
            raise MeshError(f"vertex {i} has no exact antipodal partner")
        pairing[i] = j
    if np.any(pairing[pairing] != np.arange(len(verts))):
        raise MeshError("pairing is not an involution")
    if np.any(pairing == np.arange(len(verts))):
        raise MeshError("pairing has a fixed point")
    return pairing


# ---------------------------------------------------------------------------
# mesh container


@dataclass
class BoundaryLoop:
    center: np.ndarray        # hole center (unit vector)
    radius: float             # geodesic hole radius r_hole
    vertices: np.ndarray      # ordered cycle of vertex indices


@dataclass
class SphereMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    pairing: np.ndarray
    boundary_loops: list = field(default_factory=list)
    annulus_radii: list = field(default_factory=list)  # R_hole per loop

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edges(self):
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def euler_characteristic(self) -> int:
        e = {tuple(x) for x in self.edges()}
        return self.n_vertices - len(e) + self.n_triangles

    def boundary_edges(self):
        e = self.edges()
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def is_conforming(self) -> bool:
        e = self.edges()
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(np.all(counts <= 2))

    def min_angle(self) -> float:
        """Smallest triangle angle in degrees (ambient chordal triangles)."""
        v = self.vertices
        a, b, c = (v[self.triangles[:, k]] for k in range(3))
        angs = []
        for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
            u1 = q - p
            u2 = r - p
            cosang = np.sum(u1 * u2, axis=1) / (
                np.linalg.norm(u1, axis=1) * np.linalg.norm(u2, axis=1))
            angs.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
        return float(np.min(angs))

    def loop_partner(self, k: int) -> int:
        ck = -self.boundary_loops[k].center
        dots = [float(np.dot(lp.center, ck)) for lp in self.boundary_loops]
        return int(np.argmax(dots))

    def round_area(self) -> float:
        """Total area for geodesic triangles under the round metric
        (l'Huilier spherical excess)."""
        v = self.vertices
        a, b, c = (v[self.triangles[:, k]] for k in range(3))

        def arc(x, y):
            d = np.linalg.norm(np.cross(x, y), axis=1)
            return np.arctan2(d, np.sum(x * y, axis=1))

        A, B, C = arc(b, c), arc(c, a), arc(a, b)
        s = 0.5 * (A + B + C)
        t = np.sqrt(np.clip(
            np.tan(s / 2) * np.tan((s - A) / 2) * np.tan((s - B) / 2)
            * np.tan((s - C) / 2), 0.0, None))
        return float(np.sum(4.0 * np.arctan(t)))

    def save(self, path):
        lp = self.boundary_loops
        with open(path, "w") as f:
            f.write("SHM 1\n")
            f.write(f"{self.n_vertices} {self.n_triangles} {len(lp)}\n")
            for v in self.vertices:
                f.write(" ".join(f"{x:.17g}" for x in v) + "\n")
            for t in self.triangles:
                f.write(f"{t[0]} {t[1]} {t[2]}\n")
            for p in self.pairing:
                f.write(f"{p}\n")
            for loop, R in zip(lp, self.annulus_radii):
                f.write(" ".join(f"{x:.17g}" for x in loop.center)
                        + f" {loop.radius:.17g} {R:.17g}\n")
                f.write(" ".join(str(i) for i in loop.vertices) + "\n")

    @staticmethod
    def load(path) -> "SphereMesh":
        with open(path) as f:
            header = f.readline().strip()
            if header != "SHM 1":
                raise MeshError(f"not an SHM 1 file: {header!r}")
            nv, nf, nl = map(int, f.readline().split())
            verts = np.array([[float(x) for x in f.readline().split()]
                              for _ in range(nv)])
            tris = np.array([[int(x) for x in f.readline().split()]
                             for _ in range(nf)], dtype=np.int64)
            pairing = np.array([int(f.readline()) for _ in range(nv)],
                               dtype=np.int64)
            loops, radii = [], []
            for _ in range(nl):
                head = f.readline().split()
                center = np.array([float(x) for x in head[:3]])
                r, R = float(head[3]), float(head[4])
                idx = np.array([int(x) for x in f.readline().split()],
                               dtype=np.int64)
                loops.append(BoundaryLoop(center=center, radius=r,
                                          vertices=idx))
                radii.append(R)
        return SphereMesh(vertices=verts, triangles=tris, pairing=pairing,
                          boundary_loops=loops, annulus_radii=radii)


# ---------------------------------------------------------------------------
# hole carving and ring stitching


def _tangent_frame(c):
    ref = np.array([0.0, 0.0, 1.0]) if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = ref - np.dot(ref, c) * c
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return e1, e2


def _ring_points(c, e1, e2, theta, n, offset):
    psi = 2.0 * np.pi * (np.arange(n) + offset) / n
    return (np.cos(theta) * c[None, :]
            + np.sin(theta) * (np.cos(psi)[:, None] * e1[None, :]
                               + np.sin(psi)[:, None] * e2[None, :]))


def _angles_about(c, e1, e2, pts):
    x = pts @ e1
    y = pts @ e2
    return np.mod(np.arctan2(y, x), 2.0 * np.pi)


def _zip_rings(angles_a, ids_a, angles_b, ids_b):
    """Conforming triangle strip between two angularly ordered closed cycles.

    Returns triangles (a_i, b_j, ...) walking both cycles monotonically in
    unrolled angle; orientation is fixed by the caller.
    """
    na, nb = len(ids_a), len(ids_b)
    oa = np.argsort(angles_a)
    ob = np.argsort(angles_b)
    aa = angles_a[oa]
    bb = angles_b[ob]
    ia_ids = np.asarray(ids_a)[oa]
    ib_ids = np.asarray(ids_b)[ob]

    # align start of b to start of a
    j0 = int(np.argmin(np.abs(np.mod(bb - aa[0] + np.pi, 2 * np.pi) - np.pi)))
    bb = np.concatenate([bb[j0:], bb[:j0]])
    ib_ids = np.concatenate([ib_ids[j0:], ib_ids[:j0]])
    if bb[0] - aa[0] > np.pi:
        bb = bb.copy()
        bb[0] -= 2 * np.pi
    elif bb[0] - aa[0] < -np.pi:
        bb = bb.copy()
        bb[0] += 2 * np.pi
    # unroll monotonically
    aun = np.concatenate([aa, [aa[0] + 2 * np.pi]])
    bun = [bb[0]]
    for x in bb[1:]:
        while x < bun[-1]:
            x += 2 * np.pi
        bun.append(x)
    bun.append(bun[0] + 2 * np.pi)
    bun = np.asarray(bun)

    tris = []
    i = j = 0
    while i < na or j < nb:
        if i == na:
            adv_b = True
        elif j == nb:
            adv_b = False
        else:
            adv_b = bun[j + 1] <= aun[i + 1]
        if adv_b:
            tris.append((ia_ids[i % na], ib_ids[j % nb], ib_ids[(j + 1) % nb]))
            j += 1
        else:
            tris.append((ia_ids[i % na], ib_ids[j % nb], ia_ids[(i + 1) % na]))
            i += 1
    return tris


def _orient_outward(verts, tris):
    t = np.asarray(tris, dtype=np.int64)
    a, b, c = verts[t[:, 0]], verts[t[:, 1]], verts[t[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    flip = det < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t


def _ring_schedule(r_hole, R_hole, theta_stop, h_bg, loop_segments,
                   annulus_rings=4, growth=1.4):
    """Ring radii and vertex counts from the hole circle out to the rim.

    The attachment annulus [r_hole, R_hole] always gets `annulus_rings`
    geometric subintervals, so at least three rings lie strictly inside it;
    outside, radii grow geometrically with gaps capped at ~h_bg.
    """
    radii = list(r_hole * (R_hole / r_hole) ** (np.arange(annulus_rings + 1)
                                                / annulus_rings))
    radii[-1] = R_hole
    counts = [loop_segments]
    for k in range(1, len(radii)):
        gap = max(radii[k] - radii[k - 1], 1e-300)
        n = int(np.ceil(2.0 * np.pi * np.sin(radii[k]) / gap))
        n = int(np.clip(n, max(8, (counts[-1] + 1) // 2), 2 * counts[-1]))
        counts.append(n)
    theta = R_hole
    # grow the radial gaps geometrically, starting from the last annulus
    # gap, but never beyond ~1.3x the previous ring's azimuthal spacing,
    # so strip triangles keep a bounded aspect ratio
    gap = min(radii[-1] - radii[-2], 0.9 * h_bg)
    while True:
        spacing = 2.0 * np.pi * np.sin(theta) / counts[-1]
        gap = min(gap * growth, 0.9 * h_bg, 1.3 * spacing)
        if theta + gap >= theta_stop:
            break
        theta = theta + gap
        radii.append(theta)
        n = int(np.ceil(2.0 * np.pi * np.sin(theta) / gap))
        # keep adjacent ring counts within a factor 2 so strip triangles
        # stay well-shaped; never drop below 8
        n = int(np.clip(n, max(8, (counts[-1] + 1) // 2), 2 * counts[-1]))
        counts.append(n)
    return radii, counts


def build_mesh(holes, target_edge: float = 0.07, loop_segments: int = 16,
               smooth_iterations: int = 8) -> SphereMesh:
    """Antipodally symmetric triangulation of S^2 minus the caps of
    ``holes`` (a list of HandleGeometry; each contributes the cap around
    its center and around the antipode)."""
    if loop_segments < 8:
        raise MeshError("loop_segments must be >= 8")
    level = max(0, int(np.ceil(np.log2(ICOSA_ARC / target_edge))))
    verts_bg, tris_bg = icosphere(level)
    h_bg = ICOSA_ARC / 2 ** level

    if not holes:
        return SphereMesh(vertices=verts_bg, triangles=tris_bg,
                          pairing=build_pairing(verts_bg))

    centers = np.array([h.center.coords for h in holes])
    sym_centers = np.vstack([centers, -centers])
    R_holes = np.array([h.R_hole for h in holes])
    cuts = np.maximum(1.8 * R_holes + 2.0 * h_bg, 2.6 * h_bg)
    sym_cuts = np.concatenate([cuts, cuts])
    # disjointness of the carved disks, with a band of background between
    for i in range(len(sym_centers)):
        for j in range(i + 1, len(sym_centers)):
            d = geodesic_distance(sym_centers[i], sym_centers[j])
            if d < sym_cuts[i] + sym_cuts[j] + 3.0 * h_bg:
                raise MeshError(
                    f"holes {i % len(holes)} and {j % len(holes)} are too "
                    f"close for this background resolution "
                    f"(separation {d:.3f})")

    # carve: drop every background triangle with a vertex near a hole center
    vdist = np.full(len(verts_bg), np.inf)
    owner = np.full(len(verts_bg), -1)
    for k, (c, cut) in enumerate(zip(sym_centers, sym_cuts)):
        dots = np.clip(verts_bg @ c, -1, 1)
        dist = np.arccos(dots)
        close = dist < cut
        vdist[close] = np.minimum(vdist[close], dist[close])
        owner[close] = k
    inside = owner >= 0
    keep_tri = ~np.any(inside[tris_bg], axis=1)
    tris_kept = tris_bg[keep_tri]
    used = np.zeros(len(verts_bg), dtype=bool)
    used[tris_kept.ravel()] = True
    # a used vertex must never be carved for another hole's rim
    if np.any(used & inside):
        raise MeshError("carve regions interact; refine the background mesh")

    # rim cycles: boundary edges of the kept background, grouped per carve
    edge_count = {}
    for t in tris_kept:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (a, b) if a < b else (b, a)
            edge_count[key] = edge_count.get(key, 0) + 1
    rim_edges = [e for e, c in edge_count.items() if c == 1]
    rim_vert_ids = sorted({v for e in rim_edges for v in e})
    rim_owner = {}
    for v in rim_vert_ids:
        dots = sym_centers @ verts_bg[v]
        rim_owner[v] = int(np.argmax(dots))
    rims = {}
    for v, k in rim_owner.items():
        rims.setdefault(k, []).append(v)
    if len(rims) != len(sym_centers):
        raise MeshError("carving did not produce one rim per hole")

    new_verts = [verts_bg]
    n_total = len(verts_bg)
    tris_out = [tris_kept]
    loops = []
    annulus_radii = []

    # generator holes first; the antipodal side is an exact mirror
    for k, h in enumerate(holes):
        c = h.center.coords
        e1, e2 = _tangent_frame(c)
        rim_plus = np.asarray(rims[k], dtype=np.int64)
        rim_minus_set = {int(x) for x in rims[k + len(holes)]}

        theta_stop = min(np.arccos(np.clip(verts_bg[rim_plus] @ c, -1, 1)))
        radii, counts = _ring_schedule(h.r_hole, h.R_hole,
                                       theta_stop - 0.35 * h_bg, h_bg,
                                       loop_segments)
        ring_ids_plus = []
        ring_pts_all = []
        for kk, (th, n) in enumerate(zip(radii, counts)):
            pts = _ring_points(c, e1, e2, th, n, offset=0.5 * (kk % 2))
            ids = np.arange(n_total, n_total + n, dtype=np.int64)
            n_total += n
            ring_ids_plus.append(ids)
            ring_pts_all.append(pts)
        pts_plus = np.vstack(ring_pts_all)
        # mirrored vertices for the antipodal hole (exact negation)
        ids_off = n_total - len(pts_plus)
        ring_ids_minus = [ids + len(pts_plus) for ids in ring_ids_plus]
        n_total += len(pts_plus)
        new_verts.append(pts_plus)
        new_verts.append(-pts_plus)

        # strips between consecutive rings
        strip = []
        for a_ids, b_ids, (tha, na), (thb, nb) in zip(
                ring_ids_plus[:-1], ring_ids_plus[1:],
                zip(radii[:-1], counts[:-1]), zip(radii[1:], counts[1:])):
            ang_a = _angles_about(c, e1, e2,
                                  pts_plus[a_ids - ids_off])
            ang_b = _angles_about(c, e1, e2,
                                  pts_plus[b_ids - ids_off])
            strip.extend(_zip_rings(ang_a, a_ids, ang_b, b_ids))
        # last ring to rim
        last_ids = ring_ids_plus[-1]
        ang_last = _angles_about(c, e1, e2, pts_plus[last_ids - ids_off])
        ang_rim = _angles_about(c, e1, e2, verts_bg[rim_plus])
        strip.extend(_zip_rings(ang_last, last_ids, ang_rim, rim_plus))
        strip = np.asarray(strip, dtype=np.int64)
        tris_out.append(strip)
        # mirror the strip: +ring ids -> -ring ids; rim verts -> their
        # antipodal background partners (exact negations in the icosphere)
        mirror_map = {}
        for ap, am in zip(ring_ids_plus, ring_ids_minus):
            mirror_map.update(dict(zip(ap.tolist(), am.tolist())))
        bg_index = {_key(v): i for i, v in enumerate(verts_bg)}
        for v in rim_plus:
            j = bg_index.get(_key(-verts_bg[v]))
            if j is None or j not in rim_minus_set:
                raise MeshError("rim is not antipodally symmetric")
            mirror_map[int(v)] = j
        strip_m = np.vectorize(mirror_map.__getitem__)(strip)
        tris_out.append(strip_m)

        loops.append(BoundaryLoop(center=c.copy(), radius=h.r_hole,
                                  vertices=ring_ids_plus[0].copy()))
        annulus_radii.append(h.R_hole)
        loops.append(BoundaryLoop(center=-c, radius=h.r_hole,
                                  vertices=ring_ids_minus[0].copy()))
        annulus_radii.append(h.R_hole)

    vertices = np.vstack(new_verts)
    triangles = np.vstack(tris_out)
    # drop unused background vertices, remap indices
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not np.all(used[len(verts_bg):]):
        raise MeshError("internal: inserted ring vertex left unused")
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    vertices = vertices[used]
    triangles = remap[triangles]
    loops = [BoundaryLoop(center=lp.center, radius=lp.radius,
                          vertices=remap[lp.vertices]) for lp in loops]

    triangles = _orient_outward(vertices, triangles)
    mesh = SphereMesh(vertices=vertices, triangles=triangles,
                      pairing=build_pairing(vertices),
                      boundary_loops=loops, annulus_radii=annulus_radii)
    if smooth_iterations:
        _smooth(mesh, holes, h_bg, iterations=smooth_iterations)
        _flip_repair(mesh, holes)
    if not mesh.is_conforming():
        raise MeshError("triangulation is not conforming")
    return mesh


def _triangle_min_angle(v, tri):
    p, q, r = v[tri[0]], v[tri[1]], v[tri[2]]
    best = np.inf
    for a, b, c in ((p, q, r), (q, r, p), (r, p, q)):
        u1, u2 = b - a, c - a
        cosang = (u1 @ u2) / (np.linalg.norm(u1) * np.linalg.norm(u2))
        best = min(best, np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    return best


def _flip_repair(mesh, holes, target=25.0, max_passes=12):
    """Symmetric Delaunay-style edge flips around skinny triangles.

    Flips move no vertices, so circle radii and the attachment alignment
    are untouched; an edge is only flipped when it is interior, away from
    boundary loops and ring circles (the flipped pair must not straddle a
    hole's attachment radii), and the flip strictly improves the local
    minimum angle.  Every flip is applied simultaneously to the antipodal
    edge so the pairing remains exact.
    """
    v = mesh.vertices
    pi = mesh.pairing
    tris = [tuple(t) for t in mesh.triangles.tolist()]
    on_loop = np.zeros(len(v), dtype=bool)
    for lp in mesh.boundary_loops:
        on_loop[lp.vertices] = True
    sym_centers = np.vstack([[h.center.coords for h in holes],
                             [-h.center.coords for h in holes]])
    radii = np.concatenate([[(h.r_hole, h.R_hole) for h in holes]] * 2,
                           axis=0) if holes else np.zeros((0, 2))

    def straddles(quad):
        # the four vertices must stay on one side of every attachment circle
        for c, (r0, r1) in zip(sym_centers, radii):
            d = np.arccos(np.clip(v[list(quad)] @ c, -1, 1))
            for rad in (r0, r1):
                if d.min() < rad - 1e-12 < d.max():
                    return True
        return False

    for _ in range(max_passes):
        edge_tris = {}
        for ti, t in enumerate(tris):
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                edge_tris.setdefault((a, b) if a < b else (b, a),
                                     []).append(ti)
        bad = [ti for ti, t in enumerate(tris)
               if _triangle_min_angle(v, t) < target]
        if not bad:
            break
        tri_index = {tuple(sorted(t)): ti for ti, t in enumerate(tris)}
        flipped_any = False
        touched = set()
        for ti in bad:
            t = tris[ti]
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                e = (a, b) if a < b else (b, a)
                pair = edge_tris.get(e, [])
                if len(pair) != 2 or on_loop[a] or on_loop[b]:
                    continue
                t1, t2 = pair
                if t1 in touched or t2 in touched:
                    continue
                opp = []
                for tk in (t1, t2):
                    others = [x for x in tris[tk] if x not in e]
                    if len(others) != 1:
                        opp = None
                        break
                    opp.append(others[0])
                if not opp or opp[0] == opp[1]:
                    continue
                c3, d3 = opp
                quad = (a, b, c3, d3)
                if straddles(quad):
                    continue
                old = min(_triangle_min_angle(v, tris[t1]),
                          _triangle_min_angle(v, tris[t2]))
                new1, new2 = (c3, d3, a), (d3, c3, b)
                new = min(_triangle_min_angle(v, new1),
                          _triangle_min_angle(v, new2))
                if new <= old + 1e-9:
                    continue
                # locate the mirrored pair; skip if it is the same pair
                me = tuple(sorted((pi[a], pi[b])))
                mt1 = tri_index.get(tuple(sorted((pi[a], pi[b], pi[c3]))))
                mt2 = tri_index.get(tuple(sorted((pi[a], pi[b], pi[d3]))))
                if mt1 is None or mt2 is None or me == e:
                    continue
                if {mt1, mt2} & ({t1, t2} | touched):
                    continue
                for tk, nt in ((t1, new1), (t2, new2),
                               (mt1, (pi[c3], pi[d3], pi[a])),
                               (mt2, (pi[d3], pi[c3], pi[b]))):
                    tris[tk] = nt
                    touched.add(tk)
                flipped_any = True
                break
        if not flipped_any:
            break
    out = _orient_outward(v, np.array(tris, dtype=np.int64))
    mesh.triangles = out


def _smooth(mesh, holes, h_bg, iterations=8):
    """Symmetry-preserving tangential Laplacian smoothing of the free
    vertices (background vertices near the stitch; ring and loop vertices
    stay put so circle radii remain exact)."""
    n = mesh.n_vertices
    fixed = np.zeros(n, dtype=bool)
    # ring/loop vertices: everything within the structured disks; they may
    # slide along their circle (constant geodesic radius) but never change
    # radius, so loops stay exact and no triangle crosses an attachment
    # circle
    sym_centers = np.vstack([[h.center.coords for h in holes],
                             [-h.center.coords for h in holes]])
    R = np.concatenate([[h.R_hole for h in holes]] * 2)
    v = mesh.vertices
    ring_center = np.full(n, -1)
    ring_colat = np.zeros(n)
    for k, (c, Rh) in enumerate(zip(sym_centers, R)):
        cut = max(1.8 * Rh + 2.0 * h_bg, 2.6 * h_bg)
        dist = np.arccos(np.clip(v @ c, -1, 1))
        disk = dist < cut - 1.2 * h_bg
        fixed |= disk
        ring_center[disk] = k
        ring_colat[disk] = dist[disk]
    on_loop = np.zeros(n, dtype=bool)
    for loop in mesh.boundary_loops:
        on_loop[loop.vertices] = True
    # sliding the structured-ring vertices angularly turned out to degrade
    # the grading when iterated, so ring vertices stay put; skinny zipper
    # triangles are handled by the flip repair pass instead
    sliding = np.zeros(n, dtype=bool)
    # adjacency
    nbrs = [[] for _ in range(n)]
    for a, b, c3 in mesh.triangles:
        nbrs[a].extend((b, c3))
        nbrs[b].extend((a, c3))
        nbrs[c3].extend((a, b))
    nbrs = [np.unique(x) for x in nbrs]
    canon = np.arange(n) < mesh.pairing  # one representative per pair
    move = canon & ~fixed
    slide = canon & sliding
    for _ in range(iterations):
        newv = v.copy()
        for i in np.where(move)[0]:
            m = v[nbrs[i]].mean(axis=0)
            m /= np.linalg.norm(m)
            newv[i] = m
            newv[mesh.pairing[i]] = -m
        for i in np.where(slide)[0]:
            c = sym_centers[ring_center[i]]
            m = v[nbrs[i]].mean(axis=0)
            u = m - (m @ c) * c
            nu = np.linalg.norm(u)
            if nu < 1e-14:
                continue
            m = np.cos(ring_colat[i]) * c + np.sin(ring_colat[i]) * (u / nu)
            newv[i] = m
            newv[mesh.pairing[i]] = -m
        v = newv
    mesh.vertices = v


def pairing_check(mesh: SphereMesh) -> dict:
    """Report on the exactness of the discrete involution."""
    pi = mesh.pairing
    v = mesh.vertices
    dev = np.linalg.norm(v[pi] + v, axis=1)
    worst = int(np.argmax(dev))
    tri_set = {tuple(sorted(t)) for t in mesh.triangles.tolist()}
    tri_ok = all(tuple(sorted(pi[np.array(t)].tolist())) in tri_set
                 for t in mesh.triangles.tolist())
    loop_ok = True
    for k, lp in enumerate(mesh.boundary_loops):
        partner = mesh.loop_partner(k)
        img = set(pi[lp.vertices].tolist())
        loop_ok &= img == set(mesh.boundary_loops[partner].vertices.tolist())
    return {
        "max_vertex_deviation": float(dev.max()) if len(dev) else 0.0,
        "worst_vertex": worst,
        "triangles_paired": tri_ok,
        "loops_paired": loop_ok,
        "valid": bool(dev.max() <= 1e-10 and tri_ok and loop_ok),
    }


def fill_holes(mesh: SphereMesh):
    """Triangulate each hole with a fan around an added center vertex.

    Returns (filled SphereMesh, indices of the added centers).  The filled
    mesh supports harmonic extension of functions off the holed mesh; the
    original vertices keep their indices.
    """
    if not mesh.boundary_loops:
        return mesh, np.array([], dtype=np.int64)
    verts = [mesh.vertices]
    tris = [mesh.triangles]
    n = mesh.n_vertices
    centers = []
    for lp in mesh.boundary_loops:
        cid = n
        n += 1
        verts.append(lp.center[None, :])
        centers.append(cid)
        cyc = lp.vertices
        fan = [(cid, cyc[i], cyc[(i + 1) % len(cyc)])
               for i in range(len(cyc))]
        tris.append(np.asarray(fan, dtype=np.int64))
    vertices = np.vstack(verts)
    triangles = _orient_outward(vertices, np.vstack(tris))
    return SphereMesh(vertices=vertices, triangles=triangles,
                      pairing=build_pairing(vertices)), np.asarray(centers)


def glue_boundary(mesh: SphereMesh):
    """Quotient mesh identifying each boundary vertex with its antipodal
    partner (the discrete counterpart of attaching the handles).

    Returns (glued SphereMesh-like object without loops, projection) where
    projection maps old vertex indices to new ones.
    """
    n = mesh.n_vertices
    target = np.arange(n)
    for k, lp in enumerate(mesh.boundary_loops):
        partner = mesh.loop_partner(k)
        if partner < k:
            continue
        for v in lp.vertices:
            target[mesh.pairing[v]] = v
    # compress
    keep = target == np.arange(n)
    remap = -np.ones(n, dtype=np.int64)
    remap[keep] = np.arange(keep.sum())
    proj = remap[target]
    glued_tris = proj[mesh.triangles]
    glued_verts = mesh.vertices[keep]
    return SphereMesh(vertices=glued_verts, triangles=glued_tris,
                      pairing=np.arange(len(glued_verts))), proj
