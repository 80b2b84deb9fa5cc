"""Constructive CPWL approximation pipeline on the unit square.

The square is partitioned into 2^N x 2^N dyadic cells.  Each cell gets a
rational rotation aligned with the local curvature eigenframe, a rotated
inner grid whose pitch is chosen so that all cells subdivide their
boundaries at one common spacing, and a self-similar transition band that
glues the rotated grid to the cell boundary.  The union of the per-cell
triangulations is conforming by construction, verified in exact rational
arithmetic.  Interpolating a smooth field on these meshes drives its CPWL
energy to the smooth energy as the band level K grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from ._delaunay import delaunay
from .errors import HstvError, MeshError, PlanError
from .fields import SmoothField, htv_quadrature
from .htv import htv_cpwl
from .mesh import CpwlFunction, Triangulation, min_angle
from .schatten import Mat2, schatten_norm, sym_eigen_frame

Coord = tuple[Fraction, Fraction]


# -- rational angles -----------------------------------------------------------


@dataclass(frozen=True)
class RationalAngle:
    """Angle in (0, pi/2) \\ {pi/4} with rational tangent q/p, gcd(p, q) = 1.

    The rotation by this angle has rational entries after scaling by
    sqrt(p^2 + q^2), which is what keeps all constructed mesh vertices
    rational.
    """

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise HstvError("p and q must be positive")
        if self.p == self.q:
            raise HstvError("angle pi/4 is excluded")
        if math.gcd(self.p, self.q) != 1:
            raise HstvError(f"({self.p}, {self.q}) not coprime")

    @property
    def theta(self) -> float:
        return math.atan2(self.q, self.p)

    def rotation(self) -> Mat2:
        r = math.hypot(self.p, self.q)
        return Mat2(self.p / r, -self.q / r, self.q / r, self.p / r)

    def reduced(self) -> tuple[int, int, bool]:
        """(p~, q~, reflected) with q~ > p~: angles below pi/4 are realized
        by building the mirror-image cell and reflecting it back."""
        if self.q > self.p:
            return self.p, self.q, False
        return self.q, self.p, True


def _rotation_distance(p: int, q: int, theta_hat: float) -> float:
    # Schatten-1 distance between the two rotations: 4 |sin((theta - theta_hat)/2)|.
    return 4.0 * abs(math.sin(0.5 * (math.atan2(q, p) - theta_hat)))


def rational_angle_approx(theta_hat: float, eps: float) -> RationalAngle:
    """Smallest Stern-Brocot node whose rotation is eps-close to theta_hat.

    Walks mediants toward tan(theta_hat) and returns the first admissible
    node (coprime, not pi/4) whose rotation matrix is within eps of the
    target in Schatten-1 norm.  Such a node always exists because rational
    angles are dense.
    """
    if not (0.0 <= theta_hat < 0.5 * math.pi):
        raise HstvError(f"theta_hat must lie in [0, pi/2), got {theta_hat}")
    if not eps > 0:
        raise HstvError("eps must be positive")
    lo_q, lo_p = 0, 1   # tan = 0
    hi_q, hi_p = 1, 0   # tan = inf
    for _ in range(200_000):
        q, p = lo_q + hi_q, lo_p + hi_p
        if q != p and _rotation_distance(p, q, theta_hat) <= eps:
            return RationalAngle(p, q)
        if theta_hat <= math.atan2(q, p):
            hi_q, hi_p = q, p
        else:
            lo_q, lo_p = q, p
    raise HstvError(f"no rational angle within eps={eps} of {theta_hat} found")


# -- per-square frames ---------------------------------------------------------


@dataclass
class SquareFrame:
    """Dyadic cell of the partition plus its local curvature frame."""

    index: int
    ix: int
    iy: int
    x0: Fraction
    y0: Fraction
    side: Fraction
    center: tuple[float, float]
    diag: tuple[float, float]
    angle: RationalAngle
    deviation: float


_TIE_ANGLE = RationalAngle(2, 1)


def build_frames(fld: SmoothField, N: int, samples_per_square: int = 9) -> list[SquareFrame]:
    """One frame per dyadic square of level N.

    The diagonal entries come from the curvature at the square center; the
    rational angle approximates the eigenframe angle within 1/max(N, 1).
    Isotropic centers (equal eigenvalues) take a fixed arbitrary angle.
    The recorded deviation is the max Schatten-1 distance between the
    rotated curvature and the diagonal over a samples^2 lattice.
    """
    if N < 0:
        raise HstvError("N must be >= 0")
    if samples_per_square < 2:
        raise HstvError("samples_per_square must be >= 2")
    side = Fraction(1, 2**N)
    eps = 1.0 / max(N, 1)
    frames = []
    for iy in range(2**N):
        for ix in range(2**N):
            x0 = ix * side
            y0 = iy * side
            cx = float(x0 + side / 2)
            cy = float(y0 + side / 2)
            hess = fld.hess(cx, cy)
            diag, theta_hat = sym_eigen_frame(hess, tol=1e-8)
            d1, d2 = diag.m11, diag.m22
            if abs(d1 - d2) <= 1e-12 * max(1.0, abs(d1), abs(d2)):
                angle = _TIE_ANGLE
            else:
                angle = rational_angle_approx(theta_hat, eps)
            rot = angle.rotation()
            dev = 0.0
            step = float(side) / (samples_per_square - 1)
            for i in range(samples_per_square):
                for j in range(samples_per_square):
                    x = float(x0) + i * step
                    y = float(y0) + j * step
                    m = rot.transpose() @ fld.hess(x, y) @ rot
                    dev = max(dev, schatten_norm(m - diag, 1))
            frames.append(
                SquareFrame(
                    index=iy * 2**N + ix,
                    ix=ix,
                    iy=iy,
                    x0=x0,
                    y0=y0,
                    side=side,
                    center=(cx, cy),
                    diag=(d1, d2),
                    angle=angle,
                    deviation=dev,
                )
            )
    return frames


# -- mesh plans ----------------------------------------------------------------


@dataclass
class SquarePlan:
    """Everything needed to triangulate one cell: reduced angle pair, grid
    counts and the exact rational lattice step vectors."""

    frame: SquareFrame
    pp: int            # reduced pair, qq > pp
    qq: int
    reflected: bool
    m: int             # boundary intervals per cell side (= side / spacing)
    n: int             # inner-grid steps along the long leg (= m * pp / qq)
    m0: int            # m / 2^K: building-block subdivision count
    n0: int            # n / 2^K
    hv: Coord          # lattice step along the rotated x-axis, |hv| = pitch
    hw: Coord          # lattice step along the rotated y-axis


@dataclass
class MeshPlan:
    N: int
    K: int
    mode: str
    spacing: Fraction          # common boundary spacing shared by all cells
    squares: list[SquarePlan]


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def plan_mesh(frames: Sequence[SquareFrame], N: int, K: int, mode: str = "lcm") -> MeshPlan:
    """Choose per-cell grid pitches so all cell boundaries subdivide at one
    common spacing.

    mode="paper" uses the product of the other cells' reduced denominators,
    mode="lcm" (default) the least common multiple of all of them; both keep
    the alignment invariants exact, the lcm variant just keeps pitches sane
    when many distinct angles are present.
    """
    if not frames:
        raise PlanError("no frames")
    if K < 0:
        raise PlanError("K must be >= 0")
    if mode not in ("paper", "lcm"):
        raise PlanError("mode must be 'paper' or 'lcm'")
    reduced = [f.angle.reduced() for f in frames]
    qs = [qq for (_, qq, _) in reduced]
    if mode == "paper":
        m0_all = 1
        for q in qs:
            m0_all *= q
    else:
        m0_all = _lcm(qs)
    spacing = Fraction(1, (1 << (N + K)) * m0_all)
    if spacing < Fraction(1, 1 << 40):
        raise PlanError(
            f"boundary spacing {spacing} below 2^-40: angle denominators {qs} "
            f"({mode} combination = {m0_all}) make the grid unrealizably fine"
        )
    if (m0_all << K) > 4096:
        raise PlanError(
            f"{m0_all << K} boundary intervals per cell side: plan too fine to "
            f"realize (angle denominators {qs}, K={K})"
        )
    squares = []
    for frame, (pp, qq, refl) in zip(frames, reduced):
        if frame.side != Fraction(1, 1 << N):
            raise PlanError(f"frame {frame.index} has side {frame.side}, expected 2^-{N}")
        m0 = m0_all
        if m0 * pp % qq:
            raise PlanError(f"pitch count {m0}*{pp}/{qq} not integral")
        n0 = m0 * pp // qq
        m = m0 << K
        n = n0 << K
        r2 = pp * pp + qq * qq
        hv = (spacing * qq * pp / r2, spacing * qq * qq / r2)
        hw = (-spacing * qq * qq / r2, spacing * qq * pp / r2)
        # Alignment invariants, exact: pitch/sin(theta) = spacing, and the
        # cell corners sit on the rotated lattice.
        assert (spacing * qq) ** 2 == r2 * (hv[0] ** 2 + hv[1] ** 2)
        assert n * hv[0] - m * hw[0] == frame.side and n * hv[1] - m * hw[1] == 0
        assert m * hv[0] + n * hw[0] == 0 and m * hv[1] + n * hw[1] == frame.side
        squares.append(
            SquarePlan(
                frame=frame, pp=pp, qq=qq, reflected=refl,
                m=m, n=n, m0=m0, n0=n0, hv=hv, hw=hw,
            )
        )
    return MeshPlan(N=N, K=K, mode=mode, spacing=spacing, squares=squares)


# -- the transition-band building block ----------------------------------------


_master_cache: dict[tuple[int, int, int], tuple[list[Coord], list[tuple[int, int, int]]]] = {}


def _band_master(pp: int, qq: int, m0: int) -> tuple[list[Coord], list[tuple[int, int, int]]]:
    """Triangulated building block for the top edge of the canonical unit cell.

    The block is the right triangle with hypotenuse from A=(0,1) to B=(1,1)
    and right-angle vertex E inside the cell.  Its boundary vertices are
    fixed: hypotenuse points at the common spacing, leg points at the grid
    pitch.  The interior triangulation is the Delaunay triangulation of
    that boundary point set (deterministic, flat-angle-free).
    """
    key = (pp, qq, m0)
    if key in _master_cache:
        return _master_cache[key]
    r2 = pp * pp + qq * qq
    if m0 * pp % qq:
        raise PlanError("inconsistent master counts")
    n0 = m0 * pp // qq
    s0 = Fraction(1, m0)
    hv = (s0 * qq * pp / r2, s0 * qq * qq / r2)
    hw = (-s0 * qq * qq / r2, s0 * qq * pp / r2)
    a = (Fraction(0), Fraction(1))
    e = (a[0] - m0 * hw[0], a[1] - m0 * hw[1])
    b = (e[0] + n0 * hv[0], e[1] + n0 * hv[1])
    assert b == (Fraction(1), Fraction(1))
    pts: list[Coord] = [(Fraction(i, m0), Fraction(1)) for i in range(m0 + 1)]
    pts += [(a[0] - j * hw[0], a[1] - j * hw[1]) for j in range(1, m0)]
    pts.append(e)
    pts += [(e[0] + j * hv[0], e[1] + j * hv[1]) for j in range(1, n0)]
    tris = delaunay(pts)
    area2 = Fraction(0)
    for i, j, k in tris:
        (ax, ay), (bx, by), (cx, cy) = pts[i], pts[j], pts[k]
        area2 += (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    expected2 = abs(
        (b[0] - a[0]) * (e[1] - a[1]) - (b[1] - a[1]) * (e[0] - a[0])
    )
    if area2 != expected2:
        raise MeshError("building-block triangulation does not tile the block")
    _master_cache[key] = (pts, tris)
    return pts, tris


def _rotator(t: int, cx: Fraction, cy: Fraction):
    """Rotation by -t * 90 degrees about (cx, cy), exact on rationals."""
    if t == 0:
        return lambda x, y: (x, y)
    if t == 1:
        return lambda x, y: (cx + (y - cy), cy - (x - cx))
    if t == 2:
        return lambda x, y: (2 * cx - x, 2 * cy - y)
    return lambda x, y: (cx - (y - cy), cy + (x - cx))


def _square_local_mesh(sp: SquarePlan, K: int) -> tuple[list[Coord], list[tuple[int, int, int]]]:
    """Vertices and CCW triangles of one cell's triangulation (exact).

    Raises MeshError unless the inner lattice cells and the band copies tile
    the cell area exactly, so a successful return certifies the tiling.
    """
    frame = sp.frame
    x0, y0, side = frame.x0, frame.y0, frame.side
    x1, y1 = x0 + side, y0 + side
    cx, cy = x0 + side / 2, y0 + side / 2
    copies = 1 << K
    csize = side / copies  # hypotenuse length of one band copy

    master_pts, master_tris = _band_master(sp.pp, sp.qq, sp.m0)

    verts: list[Coord] = []
    vid: dict[Coord, int] = {}
    vid_lattice: dict[tuple[int, int], int] = {}

    def get_vid(ptx: Fraction, pty: Fraction) -> int:
        key = (ptx, pty)
        i = vid.get(key)
        if i is None:
            i = len(verts)
            vid[key] = i
            verts.append(key)
        return i

    tris: list[tuple[int, int, int]] = []

    # Grid coordinates of a point: integer lattice of the rotated grid.
    sq = sp.hv[0] ** 2 + sp.hv[1] ** 2  # = pitch^2, rational

    def grid_coords(ptx: Fraction, pty: Fraction) -> tuple[Fraction, Fraction]:
        dx, dy = ptx - x0, pty - y0
        return (
            (dx * sp.hv[0] + dy * sp.hv[1]) / sq,
            (dx * sp.hw[0] + dy * sp.hw[1]) / sq,
        )

    # Band copies: 4 families (top, right, bottom, left) x 2^K scaled copies.
    band_tris_grid: list[tuple[int, int, int, int, int, int]] = []
    area_band2 = Fraction(0)
    e_idx = 2 * sp.m0  # position of the right-angle vertex in master_pts
    for t in range(4):
        rot = _rotator(t, cx, cy)
        for j in range(copies):
            mapped: list[int] = []
            for px, py in master_pts:
                wx = x0 + csize * (j + px)
                wy = y1 + csize * (py - 1)
                wx, wy = rot(wx, wy)
                i = get_vid(wx, wy)
                mapped.append(i)
                # Band vertices on the rotated lattice share ids with the
                # inner grid; register them under their integer coordinates.
                gu, gv = grid_coords(wx, wy)
                if gu.denominator == 1 and gv.denominator == 1:
                    vid_lattice[(int(gu), int(gv))] = i
            for a, b, c in master_tris:
                tris.append((mapped[a], mapped[b], mapped[c]))
            # grid-space right triangle of this copy for the cell exclusion test
            gc = []
            for pi in (0, sp.m0, e_idx):
                gu, gv = grid_coords(*verts[mapped[pi]])
                if gu.denominator != 1 or gv.denominator != 1:
                    raise MeshError("band corner off the rotated lattice")
                gc.extend((int(gu), int(gv)))
            band_tris_grid.append(tuple(gc))
            area_band2 += abs(
                (verts[mapped[sp.m0]][0] - verts[mapped[0]][0])
                * (verts[mapped[e_idx]][1] - verts[mapped[0]][1])
                - (verts[mapped[sp.m0]][1] - verts[mapped[0]][1])
                * (verts[mapped[e_idx]][0] - verts[mapped[0]][0])
            )

    # Inner cells: rotated-lattice squares inside the cell and clear of the band.
    m, n = sp.m, sp.n
    us = np.arange(0, n + m + 1, dtype=np.int64)
    vs = np.arange(-m, n + 1, dtype=np.int64)
    uu = us[:, None]
    vv = vs[None, :]
    # Quadrilateral (cell) corners in grid coordinates, CCW.
    quad = [(0, 0), (n, -m), (n + m, n - m), (m, n)]
    inside = np.ones((len(us), len(vs)), dtype=bool)
    for (qa_u, qa_v), (qb_u, qb_v) in zip(quad, quad[1:] + quad[:1]):
        inside &= (qb_u - qa_u) * (vv - qa_v) - (qb_v - qa_v) * (uu - qa_u) >= 0
    cell_ok = inside[:-1, :-1] & inside[1:, :-1] & inside[:-1, 1:] & inside[1:, 1:]

    ci = us[:-1][:, None]
    cj = vs[:-1][None, :]
    band_overlap = np.zeros_like(cell_ok)
    for au, av, bu, bv, eu, ev in band_tris_grid:
        bx0, bx1 = min(au, bu, eu), max(au, bu, eu)
        by0, by1 = min(av, bv, ev), max(av, bv, ev)
        box = (ci + 1 > bx0) & (ci < bx1) & (cj + 1 > by0) & (cj < by1)
        # open halfplane on E's side of the hypotenuse AB
        ha = -(bv - av)
        hb = bu - au
        sgn = 1 if (ha * eu + hb * ev) > (ha * au + hb * av) else -1
        ha *= sgn
        hb *= sgn
        hc = ha * au + hb * av
        best = ha * ci + hb * cj + max(ha, 0) + max(hb, 0)
        band_overlap |= box & (best > hc)
    inner = cell_ok & ~band_overlap

    # Exact tiling check: inner cells + band copies must cover the cell.
    n_inner = int(inner.sum())
    if Fraction(n_inner) * sq + area_band2 / 2 != side * side:
        raise MeshError(
            "inner cells and transition band do not tile the cell exactly "
            f"(got {Fraction(n_inner) * sq + area_band2 / 2}, want {side * side})"
        )

    # Emit inner vertices and the standard split along the (v - w) diagonal.
    iu_list, jv_list = np.nonzero(inner)
    mult_hv = [(u * sp.hv[0], u * sp.hv[1]) for u in range(0, n + m + 2)]
    mult_hw = {v: (v * sp.hw[0], v * sp.hw[1]) for v in range(-m, n + 2)}

    def lattice_vid(u: int, v: int) -> int:
        key = (u, v)
        i = vid_lattice.get(key)
        if i is None:
            av, bv_ = mult_hv[u], mult_hw[v]
            i = get_vid(x0 + av[0] + bv_[0], y0 + av[1] + bv_[1])
            vid_lattice[key] = i
        return i

    for iu, jv in zip(iu_list.tolist(), jv_list.tolist()):
        u = int(us[iu])
        v = int(vs[jv])
        p00 = lattice_vid(u, v)
        p10 = lattice_vid(u + 1, v)
        p01 = lattice_vid(u, v + 1)
        p11 = lattice_vid(u + 1, v + 1)
        tris.append((p00, p10, p01))
        tris.append((p10, p11, p01))

    if sp.reflected:
        # Mirror across the anti-diagonal of the cell; orientation flips.
        verts = [(x0 + (y1 - py), y1 - (px - x0)) for px, py in verts]
        tris = [(a, c, b) for a, b, c in tris]

    return verts, tris


def triangulate_square(frame: SquareFrame, plan: MeshPlan) -> Triangulation:
    """Conforming triangulation of one cell of the plan."""
    for sp in plan.squares:
        if sp.frame is frame or sp.frame.index == frame.index:
            if sp.frame.angle != frame.angle or sp.frame.x0 != frame.x0:
                raise PlanError("frame does not match the plan")
            verts, tris = _square_local_mesh(sp, plan.K)
            return Triangulation(verts, tris)
    raise PlanError(f"frame {frame.index} not in plan")


def assemble_global(plan: MeshPlan) -> Triangulation:
    """Union of all cell triangulations as one conforming mesh.

    Vertices on shared cell boundaries are matched exactly (rational
    coordinates); any spacing mismatch surfaces as a MeshError.
    """
    all_verts: list[Coord] = []
    shared: dict[Coord, int] = {}
    all_tris: list[tuple[int, int, int]] = []
    for sp in plan.squares:
        verts, tris = _square_local_mesh(sp, plan.K)
        frame = sp.frame
        x0, y0 = frame.x0, frame.y0
        x1, y1 = x0 + frame.side, y0 + frame.side
        local_to_global = np.empty(len(verts), dtype=np.int64)
        for i, (px, py) in enumerate(verts):
            on_boundary = px == x0 or px == x1 or py == y0 or py == y1
            if on_boundary:
                g = shared.get((px, py))
                if g is None:
                    g = len(all_verts)
                    shared[(px, py)] = g
                    all_verts.append((px, py))
            else:
                g = len(all_verts)
                all_verts.append((px, py))
            local_to_global[i] = g
        for a, b, c in tris:
            all_tris.append(
                (int(local_to_global[a]), int(local_to_global[b]), int(local_to_global[c]))
            )
    try:
        mesh = Triangulation(all_verts, all_tris)
    except MeshError as exc:
        raise MeshError(f"cell boundaries do not match: {exc}") from exc
    # Each cell's tiling was verified exactly in _square_local_mesh, so the
    # total area is the sum of the cell areas.
    mesh._trust_area(sum((sp.frame.side ** 2 for sp in plan.squares), Fraction(0)))
    if not mesh.covers_bbox_exactly():
        raise MeshError("assembled mesh does not tile the domain: boundary mismatch")
    return mesh


# -- interpolation and experiments ---------------------------------------------


def interpolate(fld: SmoothField, mesh: Triangulation) -> CpwlFunction:
    """CPWL interpolant: vertex values are exact field evaluations."""
    fv = mesh.float_vertices
    vals = np.asarray(fld.eval(fv[:, 0], fv[:, 1]), dtype=float)
    return CpwlFunction(mesh, vals)


def interpolation_error_estimate(fld: SmoothField, g: CpwlFunction) -> float:
    """Max |field - interpolant| sampled at triangle centroids and edge
    midpoints (cheap, location-free estimate of the sup error)."""
    fv = g.mesh.float_vertices
    tris = np.array(g.mesh.triangles, dtype=int)
    pa, pb, pc = fv[tris[:, 0]], fv[tris[:, 1]], fv[tris[:, 2]]
    za, zb, zc = (g.values[tris[:, i]] for i in range(3))
    worst = 0.0
    probes = [
        ((pa + pb + pc) / 3.0, (za + zb + zc) / 3.0),
        ((pa + pb) / 2.0, (za + zb) / 2.0),
        ((pb + pc) / 2.0, (zb + zc) / 2.0),
        ((pc + pa) / 2.0, (zc + za) / 2.0),
    ]
    for pts, gvals in probes:
        fvals = np.asarray(fld.eval(pts[:, 0], pts[:, 1]), dtype=float)
        worst = max(worst, float(np.max(np.abs(fvals - gvals))))
    return worst


@dataclass
class ExperimentRow:
    K: int
    vertices: int
    triangles: int
    min_angle: float
    sup_error: float
    htv_cpwl: float
    htv_reference: float


@dataclass
class ExperimentTable:
    rows: list[ExperimentRow]

    COLUMNS = ("K", "vertices", "triangles", "min_angle", "sup_error",
               "htv_cpwl", "htv_reference")

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            lines.append(
                f"{r.K},{r.vertices},{r.triangles},{r.min_angle!r},"
                f"{r.sup_error!r},{r.htv_cpwl!r},{r.htv_reference!r}"
            )
        return "\n".join(lines) + "\n"


def convergence_experiment(
    fld: SmoothField,
    N: int,
    K_range: Sequence[int],
    p=1,
    mode: str = "lcm",
    ref_resolution: int = 512,
    frames: Optional[list[SquareFrame]] = None,
    collect=None,
) -> ExperimentTable:
    """Interpolate the field on the level-K meshes and tabulate CPWL energy
    against the smooth quadrature reference."""
    ks = list(K_range)
    if not ks or any(b < a for a, b in zip(ks, ks[1:])):
        raise HstvError("K_range must be nonempty and ascending")
    if frames is None:
        frames = build_frames(fld, N)
    reference = htv_quadrature(fld, p, ref_resolution)
    rows = []
    for K in ks:
        plan = plan_mesh(frames, N, K, mode)
        mesh = assemble_global(plan)
        g = interpolate(fld, mesh)
        report = htv_cpwl(g, p)
        rows.append(
            ExperimentRow(
                K=K,
                vertices=mesh.n_vertices,
                triangles=mesh.n_triangles,
                min_angle=min_angle(mesh),
                sup_error=interpolation_error_estimate(fld, g),
                htv_cpwl=report.total,
                htv_reference=reference,
            )
        )
        if collect is not None:
            collect(K, plan, mesh, g)
    return ExperimentTable(rows)
