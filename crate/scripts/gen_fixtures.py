#!/usr/bin/env python3
"""Regenerates the STEP fixture corpus under crates/core/tests/fixtures/.

Files are written in the layout Open CASCADE uses for AP214 exports
(product boilerplate, complex unit entities, one instance per line with
long records wrapped). Geometry is exact: polyhedra get planes and lines,
free-form fixtures get clamped B-spline surfaces whose control nets are
sampled from the reference-surface height functions.

Every closed shell is checked here before writing: each edge must be
traversed exactly once in each direction.

Usage: python3 scripts/gen_fixtures.py
"""

import math
import os
from collections import Counter

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")


def real(v):
    v = float(v)
    if v == 0:
        return "0."
    s = "%.12g" % v
    if "e" in s:
        mant, exp = s.split("e")
        if "." not in mant:
            mant += "."
        return "%sE%s" % (mant, exp)
    if "." not in s:
        s += "."
    return s


class Writer:
    def __init__(self, complex_bspline=False, wrap=True):
        self.lines = []
        self.next_id = 1
        self.complex_bspline = complex_bspline
        self.wrap = wrap
        self.points = {}

    def add(self, body):
        i = self.next_id
        self.next_id += 1
        self.lines.append((i, body))
        return i

    def reserve(self):
        i = self.next_id
        self.next_id += 1
        return i

    def put(self, i, body):
        self.lines.append((i, body))

    def point(self, p):
        key = tuple(round(c, 12) for c in p)
        if key not in self.points:
            self.points[key] = self.add("CARTESIAN_POINT('',(%s))" % ",".join(real(c) for c in p))
        return self.points[key]

    def direction(self, d):
        n = math.sqrt(sum(c * c for c in d))
        return self.add("DIRECTION('',(%s))" % ",".join(real(c / n) for c in d))

    def axis(self, origin, z, x):
        return self.add("AXIS2_PLACEMENT_3D('',#%d,#%d,#%d)" % (self.point(origin), self.direction(z), self.direction(x)))

    def line(self, a, b):
        d = [b[k] - a[k] for k in range(3)]
        length = math.sqrt(sum(c * c for c in d))
        vec = self.add("VECTOR('',#%d,%s)" % (self.direction(d), real(length)))
        return self.add("LINE('',#%d,#%d)" % (self.point(a), vec))

    def circle(self, center, normal, xdir, radius):
        return self.add("CIRCLE('',#%d,%s)" % (self.axis(center, normal, xdir), real(radius)))

    def plane(self, origin, normal, xdir):
        return self.add("PLANE('',#%d)" % self.axis(origin, normal, xdir))

    def cylinder(self, origin, axis_dir, xdir, radius):
        return self.add("CYLINDRICAL_SURFACE('',#%d,%s)" % (self.axis(origin, axis_dir, xdir), real(radius)))

    @staticmethod
    def clamped(n, degree):
        spans = n - degree
        knots = [real(k / spans) for k in range(spans + 1)]
        mults = [str(degree + 1)] + ["1"] * (spans - 1) + [str(degree + 1)]
        return "(%s)" % ",".join(mults), "(%s)" % ",".join(knots)

    def bspline_curve(self, pts, degree=3):
        degree = min(degree, len(pts) - 1)
        refs = "(%s)" % ",".join("#%d" % self.point(p) for p in pts)
        mults, knots = self.clamped(len(pts), degree)
        if self.complex_bspline:
            weights = "(%s)" % ",".join("1." for _ in pts)
            return self.add(
                "( BOUNDED_CURVE() B_SPLINE_CURVE(%d,%s,.UNSPECIFIED.,.F.,.F.) "
                "B_SPLINE_CURVE_WITH_KNOTS(%s,%s,.UNSPECIFIED.) CURVE() GEOMETRIC_REPRESENTATION_ITEM() "
                "RATIONAL_B_SPLINE_CURVE(%s) REPRESENTATION_ITEM('') )" % (degree, refs, mults, knots, weights)
            )
        return self.add(
            "B_SPLINE_CURVE_WITH_KNOTS('',%d,%s,.UNSPECIFIED.,.F.,.F.,%s,%s,.UNSPECIFIED.)"
            % (degree, refs, mults, knots)
        )

    def bspline_surface(self, net, du=3, dv=3):
        du = min(du, len(net) - 1)
        dv = min(dv, len(net[0]) - 1)
        rows = "(%s)" % ",".join("(%s)" % ",".join("#%d" % self.point(p) for p in row) for row in net)
        um, uk = self.clamped(len(net), du)
        vm, vk = self.clamped(len(net[0]), dv)
        if self.complex_bspline:
            weights = "(%s)" % ",".join("(%s)" % ",".join("1." for _ in row) for row in net)
            return self.add(
                "( BOUNDED_SURFACE() B_SPLINE_SURFACE(%d,%d,%s,.UNSPECIFIED.,.F.,.F.,.F.) "
                "B_SPLINE_SURFACE_WITH_KNOTS(%s,%s,%s,%s,.UNSPECIFIED.) GEOMETRIC_REPRESENTATION_ITEM() "
                "RATIONAL_B_SPLINE_SURFACE(%s) REPRESENTATION_ITEM('') SURFACE() )"
                % (du, dv, rows, um, vm, uk, vk, weights)
            )
        return self.add(
            "B_SPLINE_SURFACE_WITH_KNOTS('',%d,%d,%s,.UNSPECIFIED.,.F.,.F.,.F.,%s,%s,%s,%s,.UNSPECIFIED.)"
            % (du, dv, rows, um, vm, uk, vk)
        )

    def render(self, name, data_lines=None):
        out = [
            "ISO-10303-21;",
            "HEADER;",
            "FILE_DESCRIPTION(('Open CASCADE Model'),'2;1');",
            "FILE_NAME('%s','2025-06-01T12:00:00',('Author'),(''),\n  'Open CASCADE STEP processor 7.7','Open CASCADE 7.7','Unknown');" % name,
            "FILE_SCHEMA(('AUTOMOTIVE_DESIGN { 1 0 10303 214 1 1 1 1 }'));",
            "ENDSEC;",
            "DATA;",
        ]
        for i, body in sorted(self.lines) if data_lines is None else data_lines:
            text = "#%d = %s;" % (i, body)
            if self.wrap and len(text) > 78:
                text = wrap(text)
            out.append(text)
        out += ["ENDSEC;", "END-ISO-10303-21;", ""]
        return "\n".join(out)


def wrap(text):
    """Breaks before ',#' and ',(' once a line passes 72 columns."""
    out, line = [], ""
    i = 0
    while i < len(text):
        ch = text[i]
        line += ch
        if ch == "," and len(line) > 72 and i + 1 < len(text) and text[i + 1] in "#(":
            out.append(line)
            line = "  "
        i += 1
    out.append(line)
    return "\n".join(out)


def boilerplate(w, items, representation="ADVANCED_BREP_SHAPE_REPRESENTATION"):
    """Product structure and units around a list of representation items."""
    app = w.add("APPLICATION_CONTEXT('core data for automotive mechanical design processes')")
    w.add("APPLICATION_PROTOCOL_DEFINITION('international standard','automotive_design',2000,#%d)" % app)
    pctx = w.add("PRODUCT_CONTEXT('',#%d,'mechanical')" % app)
    product = w.add("PRODUCT('Open CASCADE STEP translator 7.7 1','Open CASCADE STEP translator 7.7 1','',(#%d))" % pctx)
    form = w.add("PRODUCT_DEFINITION_FORMATION('','',#%d)" % product)
    dctx = w.add("PRODUCT_DEFINITION_CONTEXT('part definition',#%d,'design')" % app)
    pdef = w.add("PRODUCT_DEFINITION('design','',#%d,#%d)" % (form, dctx))
    shape = w.add("PRODUCT_DEFINITION_SHAPE('','',#%d)" % pdef)
    length = w.add("( LENGTH_UNIT() NAMED_UNIT(*) SI_UNIT(.MILLI.,.METRE.) )")
    angle = w.add("( NAMED_UNIT(*) PLANE_ANGLE_UNIT() SI_UNIT($,.RADIAN.) )")
    solid_angle = w.add("( NAMED_UNIT(*) SI_UNIT($,.STERADIAN.) SOLID_ANGLE_UNIT() )")
    unc = w.add(
        "UNCERTAINTY_MEASURE_WITH_UNIT(LENGTH_MEASURE(1.E-07),#%d,'distance_accuracy_value','confusion accuracy')" % length
    )
    ctx = w.add(
        "( GEOMETRIC_REPRESENTATION_CONTEXT(3) GLOBAL_UNCERTAINTY_ASSIGNED_CONTEXT((#%d)) "
        "GLOBAL_UNIT_ASSIGNED_CONTEXT((#%d,#%d,#%d)) REPRESENTATION_CONTEXT('Context #1','3D Context with UNIT and UNCERTAINTY') )"
        % (unc, length, angle, solid_angle)
    )
    origin = w.axis((0, 0, 0), (0, 0, 1), (1, 0, 0))
    rep = w.add("%s('',(#%d,%s),#%d)" % (representation, origin, ",".join("#%d" % i for i in items), ctx))
    w.add("SHAPE_DEFINITION_REPRESENTATION(#%d,#%d)" % (shape, rep))


# --- B-rep assembly -------------------------------------------------------


def sub(a, b):
    return [a[k] - b[k] for k in range(3)]


def cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def newell(loop):
    n = [0.0, 0.0, 0.0]
    for i, p in enumerate(loop):
        q = loop[(i + 1) % len(loop)]
        n[0] += (p[1] - q[1]) * (p[2] + q[2])
        n[1] += (p[2] - q[2]) * (p[0] + q[0])
        n[2] += (p[0] - q[0]) * (p[1] + q[1])
    return n


def check_closed(faces):
    directed = Counter()
    for face in faces:
        for loop in face["loops"]:
            for i, a in enumerate(loop):
                b = loop[(i + 1) % len(loop)]
                directed[(a, b)] += 1
    for (a, b), n in directed.items():
        assert n == 1 and directed[(b, a)] == 1, "edge %s-%s not closed" % (a, b)


def orient_convex(loops):
    """Reverses loops of a convex solid whose Newell normal points inward."""
    pts = [p for loop in loops for p in loop]
    centroid = [sum(p[k] for p in pts) / len(pts) for k in range(3)]
    out = []
    for loop in loops:
        fc = [sum(p[k] for p in loop) / len(loop) for k in range(3)]
        n = newell(loop)
        if sum(n[k] * (fc[k] - centroid[k]) for k in range(3)) < 0:
            loop = list(reversed(loop))
        out.append(loop)
    return out


def build_solid(w, faces, edge_geometry=None):
    """faces: dicts with 'loops' (coordinate-tuple loops, first is outer) and
    optional 'surface' (callable w -> surface id). edge_geometry maps an
    undirected (a, b) key (a < b) to a callable w, a, b -> curve id running
    a to b. Returns the MANIFOLD_SOLID_BREP id."""
    check_closed(faces)
    edge_geometry = edge_geometry or {}
    vertices = {}
    edges = {}

    def vertex(p):
        if p not in vertices:
            vertices[p] = w.add("VERTEX_POINT('',#%d)" % w.point(p))
        return vertices[p]

    def edge(a, b):
        key = (min(a, b), max(a, b))
        if key not in edges:
            s, e = key
            make = edge_geometry.get(key, lambda w, s, e: w.line(s, e))
            curve = make(w, s, e)
            edges[key] = w.add("EDGE_CURVE('',#%d,#%d,#%d,.T.)" % (vertex(s), vertex(e), curve))
        return edges[key], (a, b) == key

    face_ids = []
    for face in faces:
        bounds = []
        for li, loop in enumerate(face["loops"]):
            oes = []
            for i, a in enumerate(loop):
                b = loop[(i + 1) % len(loop)]
                ec, forward = edge(a, b)
                oes.append(w.add("ORIENTED_EDGE('',*,*,#%d,%s)" % (ec, ".T." if forward else ".F.")))
            el = w.add("EDGE_LOOP('',(%s))" % ",".join("#%d" % o for o in oes))
            kind = "FACE_OUTER_BOUND" if li == 0 else "FACE_BOUND"
            bounds.append(w.add("%s('',#%d,.T.)" % (kind, el)))
        if "surface" in face:
            surf = face["surface"](w)
        else:
            outer = face["loops"][0]
            n = newell(outer)
            surf = w.plane(outer[0], n, sub(outer[1], outer[0]))
        face_ids.append(w.add("ADVANCED_FACE('',(%s),#%d,.T.)" % (",".join("#%d" % b for b in bounds), surf)))
    shell = w.add("CLOSED_SHELL('',(%s))" % ",".join("#%d" % f for f in face_ids))
    return w.add("MANIFOLD_SOLID_BREP('',#%d)" % shell)


def box_faces(x0, y0, z0, x1, y1, z1):
    c = lambda i, j, k: ((x0, x1)[i], (y0, y1)[j], (z0, z1)[k])
    v = [c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0), c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)]
    quads = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (2, 3, 7, 6), (0, 4, 7, 3), (1, 2, 6, 5)]
    return [{"loops": [[v[i] for i in q]]} for q in quads]


def prism_faces(polygon, h):
    """Extrudes a counter-clockwise xy polygon from z=0 to z=h."""
    bot = [(x, y, 0.0) for x, y in polygon]
    top = [(x, y, float(h)) for x, y in polygon]
    faces = [{"loops": [list(reversed(bot))]}, {"loops": [top]}]
    n = len(polygon)
    for i in range(n):
        j = (i + 1) % n
        faces.append({"loops": [[bot[i], bot[j], top[j], top[i]]]})
    return faces


def solid_file(name, faces, edge_geometry=None, complex_bspline=False, wrap=True):
    w = Writer(complex_bspline=complex_bspline, wrap=wrap)
    solid = build_solid(w, faces, edge_geometry)
    boilerplate(w, [solid])
    return w.render(name)


# --- free-form geometry ---------------------------------------------------


def lerp(a, b, t):
    return tuple(a[k] + (b[k] - a[k]) * t for k in range(3))


def straight_bspline(w, a, b, n=4):
    return w.bspline_curve([lerp(a, b, i / (n - 1)) for i in range(n)])


def flat_net(corners, n=4):
    """Bilinear n x n net over a planar quad (p00, p10, p11, p01)."""
    p00, p10, p11, p01 = corners
    net = []
    for i in range(n):
        u = i / (n - 1)
        a, b = lerp(p00, p10, u), lerp(p01, p11, u)
        net.append([lerp(a, b, j / (n - 1)) for j in range(n)])
    return net


def height_net(fn, span, n, dz=0.0):
    net = []
    for i in range(n):
        x = (i / (n - 1) - 0.5) * span
        net.append([(x, (j / (n - 1) - 0.5) * span, fn(x, (j / (n - 1) - 0.5) * span) + dz) for j in range(n)])
    return net


def saddle(curv):
    return lambda x, y: curv * (x * x - y * y)


def gaussian(h, span):
    return lambda x, y: h * math.exp(-(x * x + y * y) / ((span / 3) ** 2))


def wave(a, lam):
    return lambda x, y: a * math.sin(2 * math.pi * x / lam)


def ripple(a, k, d):
    return lambda x, y: a * math.sin(k * math.hypot(x, y)) * math.exp(-d * math.hypot(x, y))


def boundary_rows(net):
    """Four boundary control polygons of a net, as (start, end, points)."""
    n = len(net)
    rows = [
        [net[i][0] for i in range(n)],
        [net[n - 1][j] for j in range(n)],
        [net[i][n - 1] for i in range(n)],
        [net[0][j] for j in range(n)],
    ]
    return rows


def curve_along(rows):
    """Edge geometry map: any edge whose endpoints match a row's ends gets a
    B-spline through that row, oriented start to end."""
    table = {}
    for row in rows:
        a, b = tuple(row[0]), tuple(row[-1])
        key = (min(a, b), max(a, b))
        pts = row if a == key[0] else list(reversed(row))
        table[key] = (lambda pts: lambda w, s, e: w.bspline_curve(pts))(pts)
    return table


def face_file(name, fn, span, n=6, complex_bspline=False):
    """A single free-form face in an open shell, as a surface export."""
    w = Writer(complex_bspline=complex_bspline)
    net = height_net(fn, span, n)
    surf = w.bspline_surface(net)
    corners = [tuple(net[0][0]), tuple(net[n - 1][0]), tuple(net[n - 1][n - 1]), tuple(net[0][n - 1])]
    geo = curve_along(boundary_rows(net))
    verts = {p: w.add("VERTEX_POINT('',#%d)" % w.point(p)) for p in corners}
    oes = []
    for i, a in enumerate(corners):
        b = corners[(i + 1) % 4]
        key = (min(a, b), max(a, b))
        curve = geo[key](w, *key)
        ec = w.add("EDGE_CURVE('',#%d,#%d,#%d,.T.)" % (verts[key[0]], verts[key[1]], curve))
        oes.append(w.add("ORIENTED_EDGE('',*,*,#%d,%s)" % (ec, ".T." if (a, b) == key else ".F.")))
    loop = w.add("EDGE_LOOP('',(%s))" % ",".join("#%d" % o for o in oes))
    bound = w.add("FACE_OUTER_BOUND('',#%d,.T.)" % loop)
    face = w.add("ADVANCED_FACE('',(#%d),#%d,.T.)" % (bound, surf))
    shell = w.add("OPEN_SHELL('',(#%d))" % face)
    model = w.add("SHELL_BASED_SURFACE_MODEL('',(#%d))" % shell)
    boilerplate(w, [model], "MANIFOLD_SURFACE_SHAPE_REPRESENTATION")
    return w.render(name)


def plate_file(name, fn, span, thickness=2.0, n=6, complex_bspline=False):
    """A height field thickened into a closed solid: B-spline top and bottom,
    ruled B-spline sides, straight vertical edges."""
    top = height_net(fn, span, n, thickness / 2)
    bot = height_net(fn, span, n, -thickness / 2)
    T = lambda i, j: tuple(top[i][j])
    B = lambda i, j: tuple(bot[i][j])
    m = n - 1
    faces = [
        {"loops": [[T(0, 0), T(m, 0), T(m, m), T(0, m)]], "surface": lambda w: w.bspline_surface(top)},
        {"loops": [[B(0, 0), B(0, m), B(m, m), B(m, 0)]], "surface": lambda w: w.bspline_surface(bot)},
    ]
    geo = {}
    geo.update(curve_along(boundary_rows(top)))
    geo.update(curve_along(boundary_rows(bot)))
    sides = [
        ((0, 0), (m, 0), [bot[i][0] for i in range(n)], [top[i][0] for i in range(n)]),
        ((m, 0), (m, m), [bot[m][j] for j in range(n)], [top[m][j] for j in range(n)]),
        ((m, m), (0, m), [bot[i][m] for i in range(m, -1, -1)], [top[i][m] for i in range(m, -1, -1)]),
        ((0, m), (0, 0), [bot[0][j] for j in range(m, -1, -1)], [top[0][j] for j in range(m, -1, -1)]),
    ]
    for (a, b, brow, trow) in sides:
        loop = [B(*a), B(*b), T(*b), T(*a)]
        faces.append({"loops": [loop], "surface": (lambda net: lambda w: w.bspline_surface(net, 3, 1))([brow, trow])})
    return solid_file(name, faces, geo, complex_bspline)


# --- special cases --------------------------------------------------------


def cylinder_file(name, r=5.0, h=10.0):
    """Seam and circle edges wrapped in SEAM_CURVE / SURFACE_CURVE."""
    w = Writer()
    cyl = w.cylinder((0, 0, 0), (0, 0, 1), (1, 0, 0), r)
    top_plane = w.plane((0, 0, h), (0, 0, 1), (1, 0, 0))
    bot_plane = w.plane((0, 0, 0), (0, 0, -1), (1, 0, 0))
    vt = w.add("VERTEX_POINT('',#%d)" % w.point((r, 0, h)))
    vb = w.add("VERTEX_POINT('',#%d)" % w.point((r, 0, 0)))
    ct = w.circle((0, 0, h), (0, 0, 1), (1, 0, 0), r)
    cb = w.circle((0, 0, 0), (0, 0, 1), (1, 0, 0), r)
    seam_line = w.line((r, 0, 0), (r, 0, h))
    sc_t = w.add("SURFACE_CURVE('',#%d,(#%d,#%d),.CURVE_3D.)" % (ct, top_plane, cyl))
    sc_b = w.add("SURFACE_CURVE('',#%d,(#%d,#%d),.CURVE_3D.)" % (cb, bot_plane, cyl))
    seam = w.add("SEAM_CURVE('',#%d,(#%d,#%d),.PCURVE_S1.)" % (seam_line, cyl, cyl))
    e_top = w.add("EDGE_CURVE('',#%d,#%d,#%d,.T.)" % (vt, vt, sc_t))
    e_bot = w.add("EDGE_CURVE('',#%d,#%d,#%d,.T.)" % (vb, vb, sc_b))
    e_seam = w.add("EDGE_CURVE('',#%d,#%d,#%d,.T.)" % (vb, vt, seam))

    def face(uses, surf):
        oes = [w.add("ORIENTED_EDGE('',*,*,#%d,%s)" % (e, ".T." if f else ".F.")) for e, f in uses]
        loop = w.add("EDGE_LOOP('',(%s))" % ",".join("#%d" % o for o in oes))
        bound = w.add("FACE_OUTER_BOUND('',#%d,.T.)" % loop)
        return w.add("ADVANCED_FACE('',(#%d),#%d,.T.)" % (bound, surf))

    f_top = face([(e_top, True)], top_plane)
    f_bot = face([(e_bot, False)], bot_plane)
    f_side = face([(e_bot, True), (e_seam, True), (e_top, False), (e_seam, False)], cyl)
    shell = w.add("CLOSED_SHELL('',(#%d,#%d,#%d))" % (f_top, f_side, f_bot))
    solid = w.add("MANIFOLD_SOLID_BREP('',#%d)" % shell)
    boilerplate(w, [solid])
    return w.render(name)


def two_cubes_file(name):
    w = Writer()
    a = build_solid(w, box_faces(0, 0, 0, 1, 1, 1))
    b = build_solid(w, box_faces(3, 0, 0, 5, 2, 2))
    boilerplate(w, [a, b])
    return w.render(name)


def holed_block_faces():
    P = lambda x, y, z: (float(x), float(y), float(z))
    outer = [(0, 0), (3, 0), (3, 3), (0, 3)]
    hole = [(1, 1), (2, 1), (2, 2), (1, 2)]
    faces = [
        {"loops": [[P(x, y, 1) for x, y in outer], [P(x, y, 1) for x, y in reversed(hole)]]},
        {"loops": [[P(x, y, 0) for x, y in reversed(outer)], [P(x, y, 0) for x, y in hole]]},
    ]
    for poly, sign in ((outer, 1), (hole, -1)):
        for i in range(4):
            a, b = poly[i], poly[(i + 1) % 4]
            if sign < 0:
                a, b = b, a
            faces.append({"loops": [[P(a[0], a[1], 0), P(b[0], b[1], 0), P(b[0], b[1], 1), P(a[0], a[1], 1)]]})
    return faces


def shuffled_renumbered(text, seed=7):
    """Same model with ids permuted and instances reordered."""
    import random
    import re

    head, rest = text.split("DATA;\n", 1)
    body, tail = rest.split("ENDSEC;\nEND-ISO", 1)
    stmts = [s.strip() for s in body.split(";\n") if s.strip()]
    ids = [int(re.match(r"#(\d+)", s).group(1)) for s in stmts]
    rng = random.Random(seed)
    new_ids = list(range(100, 100 + 3 * len(ids), 3))
    rng.shuffle(new_ids)
    mapping = dict(zip(ids, new_ids))
    stmts = [re.sub(r"#(\d+)", lambda m: "#%d" % mapping[int(m.group(1))], s) for s in stmts]
    rng.shuffle(stmts)
    return head + "DATA;\n" + "".join(s + ";\n" for s in stmts) + "ENDSEC;\nEND-ISO" + tail


def main():
    corpus = os.path.join(ROOT, "corpus")
    invalid = os.path.join(ROOT, "invalid")
    os.makedirs(corpus, exist_ok=True)
    os.makedirs(invalid, exist_ok=True)
    files = {}

    cube = box_faces(0, 0, 0, 10, 10, 10)
    files["cube.step"] = solid_file("cube", cube, wrap=False)
    files["cube_renumbered.step"] = shuffled_renumbered(files["cube.step"])
    files["box_offset.step"] = solid_file("box_offset", box_faces(-5, 2, 1, 15, 22, 6))

    top = [f for f in cube if all(p[2] == 10 for p in f["loops"][0])][0]
    corners = top["loops"][0]

    def with_bspline_top(faces):
        out = []
        for f in faces:
            if f is top:
                f = dict(f, surface=lambda w: w.bspline_surface(flat_net([corners[0], corners[1], corners[2], corners[3]])))
            out.append(f)
        return out

    top_edges = {}
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        top_edges[(min(a, b), max(a, b))] = lambda w, s, e: straight_bspline(w, s, e)
    files["cube_bspline_top.step"] = solid_file("cube_bspline_top", with_bspline_top(cube))
    files["cube_bspline_edges.step"] = solid_file("cube_bspline_edges", with_bspline_top(cube), top_edges)
    files["cube_bspline_complex.step"] = solid_file(
        "cube_bspline_complex", with_bspline_top(cube), top_edges, complex_bspline=True
    )
    # One trimmed B-spline edge on an otherwise plain cube.
    a, b = corners[0], corners[1]
    key = (min(a, b), max(a, b))
    trimmed = {
        key: lambda w, s, e: w.add(
            "TRIMMED_CURVE('',#%d,(PARAMETER_VALUE(0.)),(PARAMETER_VALUE(1.)),.T.,.PARAMETER.)" % straight_bspline(w, s, e)
        )
    }
    files["cube_trimmed_edge.step"] = solid_file("cube_trimmed_edge", cube, trimmed)

    tetra = orient_convex([
        [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)],
        [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)],
        [(0.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)],
        [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)],
    ])
    files["tetrahedron.step"] = solid_file("tetrahedron", [{"loops": [l]} for l in tetra])
    apex = (5.0, 5.0, 8.0)
    base = [(0.0, 0.0, 0.0), (10.0, 0.0, 0.0), (10.0, 10.0, 0.0), (0.0, 10.0, 0.0)]
    pyramid = orient_convex([base] + [[base[i], base[(i + 1) % 4], apex] for i in range(4)])
    files["pyramid.step"] = solid_file("pyramid", [{"loops": [l]} for l in pyramid])
    ax = [(1.0, 0, 0), (-1.0, 0, 0)]
    ay = [(0, 1.0, 0), (0, -1.0, 0)]
    az = [(0, 0, 1.0), (0, 0, -1.0)]
    octa = orient_convex([[x, y, z] for x in ax for y in ay for z in az])
    files["octahedron.step"] = solid_file("octahedron", [{"loops": [l]} for l in octa])

    files["triangular_prism.step"] = solid_file("triangular_prism", prism_faces([(0, 0), (4, 0), (0, 3)], 5))
    hexagon = [(10 * math.cos(k * math.pi / 3), 10 * math.sin(k * math.pi / 3)) for k in range(6)]
    files["hexagonal_prism.step"] = solid_file("hexagonal_prism", prism_faces(hexagon, 4))
    l_profile = [(0, 0), (40, 0), (40, 5), (5, 5), (5, 30), (0, 30)]
    l_bracket = prism_faces(l_profile, 20)
    files["l_bracket.step"] = solid_file("l_bracket", l_bracket)
    # Outer vertical face of the long leg as a bilinear B-spline patch.
    side = l_bracket[2]
    p = side["loops"][0]
    l_bspline = [dict(f) for f in l_bracket]
    l_bspline[2] = dict(side, surface=lambda w: w.bspline_surface(flat_net([p[0], p[1], p[2], p[3]], 2), 1, 1))
    files["l_bracket_bspline_side.step"] = solid_file("l_bracket_bspline_side", l_bspline)
    files["holed_block.step"] = solid_file("holed_block", holed_block_faces())
    files["two_cubes.step"] = two_cubes_file("two_cubes")
    files["cylinder.step"] = cylinder_file("cylinder")

    files["saddle_face.step"] = face_file("saddle_face", saddle(0.004), 50)
    files["gaussian_face.step"] = face_file("gaussian_face", gaussian(7, 100), 100)
    files["wave_face.step"] = face_file("wave_face", wave(3, 25), 50)
    files["ripple_face.step"] = face_file("ripple_face", ripple(2, 0.3, 0.02), 60, complex_bspline=True)
    files["gaussian_plate.step"] = plate_file("gaussian_plate", gaussian(7, 100), 100)
    files["saddle_plate_complex.step"] = plate_file("saddle_plate_complex", saddle(0.004), 50, complex_bspline=True)

    for name, text in files.items():
        with open(os.path.join(corpus, name), "w") as f:
            f.write(text)

    # Invalid inputs for CLI and runner tests.
    c = files["cube.step"]
    lines = c.split("\n")
    shell_line = next(i for i, l in enumerate(lines) if "CLOSED_SHELL" in l)
    first_face = lines[shell_line].split("(#")[1].split(",")[0]
    missing = list(lines)
    missing[shell_line] = lines[shell_line].replace("(#%s," % first_face, "(")
    missing = [l for l in missing if not l.startswith("#%s = " % first_face)]
    invalid_files = {
        "cube_missing_face.step": "\n".join(missing),
        "cube_open_shell.step": c.replace("CLOSED_SHELL", "OPEN_SHELL"),
        "corrupt.step": c[: len(c) // 2],
    }
    for name, text in invalid_files.items():
        with open(os.path.join(invalid, name), "w") as f:
            f.write(text)
    print("wrote %d corpus files, %d invalid files" % (len(files), len(invalid_files)))


if __name__ == "__main__":
    main()
