"""Extremality tests and decomposition of CPWL functions modulo affine maps.

A CPWL function (with unit energy, affine part quotiented out) is an extreme
point of the energy ball iff the only functions whose curvature lives on its
support are its own multiples; concretely, iff the nullspace of the
jump-vanishing constraints off that support is one-dimensional.  Non-extremal
functions are decomposed by greedy support reduction: each step subtracts a
multiple of an extremal direction chosen inside the current support with
jump signs aligned, which zeroes at least one support edge, never flips the
remaining signs, and therefore splits the energy additively.  The collected
coefficients sum to the input's energy, which is the discrete form of the
rigidity identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ExtremalError
from .htv import htv_cpwl, support_edges_by_jump
from .mesh import CpwlFunction, Edge, Triangulation

SUPPORT_REL_TOL = 1e-9


# -- linear structure of a mesh -------------------------------------------------


def _affine_basis(mesh: Triangulation) -> np.ndarray:
    """Orthonormal basis (V, 3) of the affine functions sampled at vertices."""
    fv = mesh.float_vertices
    a = np.stack([np.ones(len(fv)), fv[:, 0], fv[:, 1]], axis=1)
    q, _ = np.linalg.qr(a)
    return q


def _jump_operators(mesh: Triangulation) -> tuple[np.ndarray, np.ndarray]:
    """(full, normal) jump operators over interior edges in id order.

    full: (2E, V), rows are both components of the gradient jump across each
    edge; normal: (E, V), the jump projected on the fixed unit edge normal.
    Cached on the mesh object.
    """
    cached = getattr(mesh, "_jump_ops", None)
    if cached is not None:
        return cached
    fv = mesh.float_vertices
    tris = mesh.triangle_array
    nv = mesh.n_vertices
    # Per-triangle gradient coefficient stencils (2 x 3 each).
    pa, pb, pc = fv[tris[:, 0]], fv[tris[:, 1]], fv[tris[:, 2]]
    e1 = pb - pa
    e2 = pc - pa
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    gx = np.stack([(e1[:, 1] - e2[:, 1]) / det, e2[:, 1] / det, -e1[:, 1] / det], axis=1)
    gy = np.stack([(e2[:, 0] - e1[:, 0]) / det, -e2[:, 0] / det, e1[:, 0] / det], axis=1)

    edges = mesh.interior_edge_array
    tpairs = mesh.interior_tri_array
    n_edges = len(edges)
    full = np.zeros((2 * n_edges, nv))
    normal = np.zeros((n_edges, nv))
    for ei in range(n_edges):
        t1, t2 = int(tpairs[ei, 0]), int(tpairs[ei, 1])
        u, v = int(edges[ei, 0]), int(edges[ei, 1])
        dx = fv[v, 0] - fv[u, 0]
        dy = fv[v, 1] - fv[u, 1]
        ln = math.hypot(dx, dy)
        nux, nuy = -dy / ln, dx / ln
        for sign, t in ((1.0, t2), (-1.0, t1)):
            for slot in range(3):
                col = int(tris[t, slot])
                full[2 * ei, col] += sign * gx[t, slot]
                full[2 * ei + 1, col] += sign * gy[t, slot]
                normal[ei, col] += sign * (gx[t, slot] * nux + gy[t, slot] * nuy)
    mesh._jump_ops = (full, normal)
    return full, normal


# -- quotient representatives ----------------------------------------------------


@dataclass
class QuotientRep:
    """CPWL function with its best-fit affine part removed."""

    cpwl: CpwlFunction
    affine: tuple[float, float, float]

    @property
    def values(self) -> np.ndarray:
        return self.cpwl.values

    @property
    def mesh(self) -> Triangulation:
        return self.cpwl.mesh


def normalize_mod_affine(g: CpwlFunction) -> QuotientRep:
    """Remove the least-squares affine part of the vertex values.

    The energy is unchanged (affine shifts move all gradients equally), and
    the returned values are orthogonal to {1, x, y} at the vertices.
    """
    fv = g.mesh.float_vertices
    a = np.stack([np.ones(len(fv)), fv[:, 0], fv[:, 1]], axis=1)
    coef, *_ = np.linalg.lstsq(a, g.values, rcond=None)
    reduced = g.values - a @ coef
    q = _affine_basis(g.mesh)
    reduced = reduced - q @ (q.T @ reduced)
    return QuotientRep(g.with_values(reduced), tuple(float(c) for c in coef))


def _as_cpwl(g: Union[CpwlFunction, QuotientRep]) -> CpwlFunction:
    return g.cpwl if isinstance(g, QuotientRep) else g


# -- constrained spaces ----------------------------------------------------------


@dataclass
class JumpSpaceBasis:
    """Orthonormal basis of {h : jumps vanish on interior edges outside S},
    modulo affine functions."""

    mesh: Triangulation
    support: set[Edge]
    basis: np.ndarray  # (V, dim)
    dim: int


def constrained_space(mesh: Triangulation, support) -> JumpSpaceBasis:
    """Nullspace of the jump constraints on edges outside `support`.

    Constraints are both gradient-jump components per excluded edge; the
    nullspace is extracted by SVD with threshold 1e-10 times the largest
    singular value, inside the orthogonal complement of the affine span.
    """
    support_set = set(support.edges) if hasattr(support, "edges") else set(support)
    interior = mesh.interior_edges
    unknown = support_set.difference(interior)
    if unknown:
        raise ExtremalError(f"support contains non-interior edges: {sorted(unknown)[:3]}")
    full, _ = _jump_operators(mesh)
    rows = []
    for ei, e in enumerate(interior):
        if e not in support_set:
            rows.append(2 * ei)
            rows.append(2 * ei + 1)
    qa = _affine_basis(mesh)
    # Orthonormal basis of the affine complement.
    u, s, _ = np.linalg.svd(qa, full_matrices=True)
    comp = u[:, 3:]
    if not rows:
        basis = comp
    else:
        m = full[rows] @ comp
        _, sv, vt = np.linalg.svd(m, full_matrices=True)
        thr = 1e-10 * (sv[0] if len(sv) else 0.0)
        rank = int(np.sum(sv > thr))
        basis = comp @ vt[rank:].T
    return JumpSpaceBasis(mesh=mesh, support=support_set, basis=basis,
                          dim=basis.shape[1])


@dataclass
class ExtremalCertificate:
    space: JumpSpaceBasis
    witness: Optional[np.ndarray]  # vertex values of a non-span direction


def _support_or_raise(g: CpwlFunction, tol: float) -> set[Edge]:
    support = support_edges_by_jump(g, tol)
    if not support:
        raise ExtremalError("function is affine (zero energy): not on the unit sphere")
    return support


def is_extremal(g: Union[CpwlFunction, QuotientRep], tol: float = SUPPORT_REL_TOL
                ) -> tuple[bool, ExtremalCertificate]:
    """Extremality test: the constrained space of the support must be a line.

    The certificate carries the computed space; when the answer is False it
    also holds a witness direction inside the support that is not a multiple
    of g.
    """
    g = _as_cpwl(g)
    support = _support_or_raise(g, tol)
    space = constrained_space(g.mesh, support)
    if space.dim < 1:
        raise ExtremalError("numerical rank failure: g not inside its own constraint space")
    if space.dim == 1:
        return True, ExtremalCertificate(space, None)
    rep = normalize_mod_affine(g)
    gn = rep.values / np.linalg.norm(rep.values)
    resid = space.basis - np.outer(gn, gn @ space.basis)
    norms = np.linalg.norm(resid, axis=0)
    w = resid[:, int(np.argmax(norms))]
    return False, ExtremalCertificate(space, w / np.linalg.norm(w))


def perturbation_identity_check(g: Union[CpwlFunction, QuotientRep],
                                h: Union[CpwlFunction, QuotientRep],
                                tol: float = SUPPORT_REL_TOL) -> float:
    """|htv(g + eps h) + htv(g - eps h) - 2 htv(g)| for the canonical eps.

    eps is the ratio (smallest nonzero jump of g) / (largest jump of h); at
    that size the perturbation cannot flip any jump sign, so the identity
    must vanish whenever h's curvature lives inside g's support.  Returns 0
    for h = 0.
    """
    g = _as_cpwl(g)
    h = _as_cpwl(h)
    jumps_g = htv_cpwl(g).jumps
    norms_g = np.hypot(jumps_g[:, 0], jumps_g[:, 1])
    jumps_h = htv_cpwl(h).jumps
    norms_h = np.hypot(jumps_h[:, 0], jumps_h[:, 1])
    delta_cap = float(norms_h.max()) if len(norms_h) else 0.0
    if delta_cap <= 1e-300:
        return 0.0
    thr = tol * float(norms_g.max())
    nonzero = norms_g[norms_g > thr]
    if len(nonzero) == 0:
        raise ExtremalError("g has empty support")
    eps = float(nonzero.min()) / delta_cap
    total = htv_cpwl(g).total
    plus = htv_cpwl(g.with_values(g.values + eps * h.values)).total
    minus = htv_cpwl(g.with_values(g.values - eps * h.values)).total
    return abs(plus + minus - 2.0 * total)


# -- greedy support reduction ----------------------------------------------------


def support_reduce(g: Union[CpwlFunction, QuotientRep], tol: float = SUPPORT_REL_TOL
                   ) -> tuple[CpwlFunction, float, QuotientRep]:
    """One reduction step: (h, lambda, g - lambda h) with strictly smaller support.

    h is a unit direction from the constrained space of g's support that is
    not a multiple of g; lambda is the smallest-magnitude jump ratio over
    the support, which zeroes at least one edge and never flips the sign of
    any other jump.
    """
    g = _as_cpwl(g)
    extremal, cert = is_extremal(g, tol)
    if extremal:
        raise ExtremalError("input is extremal: nothing to reduce")
    h_vec = cert.witness
    mesh = g.mesh
    _, normal_op = _jump_operators(mesh)
    jn_g = normal_op @ g.values
    jn_h = normal_op @ h_vec
    support = cert.space.support
    interior = mesh.interior_edges
    h_thr = tol * float(np.abs(jn_h).max())
    lam = None
    for ei, e in enumerate(interior):
        if e in support and abs(jn_h[ei]) > h_thr:
            cand = jn_g[ei] / jn_h[ei]
            if lam is None or abs(cand) < abs(lam):
                lam = cand
    if lam is None:
        raise ExtremalError("witness has no usable jump inside the support")
    nxt = normalize_mod_affine(g.with_values(g.values - lam * h_vec))
    new_support = support_edges_by_jump(nxt.cpwl, tol)
    if not new_support < support:
        raise ExtremalError("support did not strictly decrease: numerical rank failure")
    return g.with_values(h_vec), float(lam), nxt


def find_extremal_in_support(g: Union[CpwlFunction, QuotientRep],
                             tol: float = SUPPORT_REL_TOL) -> QuotientRep:
    """Extremal direction with support inside g's, normalized to unit energy."""
    rep = normalize_mod_affine(_as_cpwl(g))
    max_steps = len(rep.mesh.interior_edges) + 2
    for _ in range(max_steps):
        extremal, _ = is_extremal(rep.cpwl, tol)
        if extremal:
            total = htv_cpwl(rep.cpwl).total
            return QuotientRep(rep.cpwl.with_values(rep.values / total), (0.0, 0.0, 0.0))
        _, _, rep = support_reduce(rep, tol)
    raise ExtremalError("support reduction did not terminate")


@dataclass
class Decomposition:
    """g = sum_i coefficients[i] * terms[i] + residual, all terms extremal
    with unit energy and support inside g's."""

    terms: list[QuotientRep]
    coefficients: list[float]
    residual: float           # energy of the unexplained remainder
    value_residual: float     # sup-norm of the remainder at vertices
    total: float              # energy of the input

    @property
    def coefficient_sum(self) -> float:
        return float(sum(self.coefficients))


def decompose(g: Union[CpwlFunction, QuotientRep], tol: float = 1e-8) -> Decomposition:
    """Write g (mod affine) as a nonnegative combination of extremal directions.

    Greedy peeling: find an extremal direction in the current support, then
    subtract the largest multiple that keeps every remaining jump on its
    original side of zero.  Each step zeroes at least one support edge, so
    the loop terminates, and because no sign ever flips the energies add up:
    the coefficient sum equals the input energy (rigidity).
    """
    g = _as_cpwl(g)
    rep0 = normalize_mod_affine(g)
    total = htv_cpwl(rep0.cpwl).total
    if total <= tol:
        raise ExtremalError("input is affine: nothing to decompose")
    mesh = rep0.mesh
    _, normal_op = _jump_operators(mesh)
    interior = mesh.interior_edges
    x = rep0.values.copy()
    terms: list[QuotientRep] = []
    coeffs: list[float] = []
    for _ in range(len(interior) + 2):
        current = htv_cpwl(rep0.cpwl.with_values(x)).total
        if current <= tol * max(1.0, total):
            break
        t = find_extremal_in_support(rep0.cpwl.with_values(x))
        jn_x = normal_op @ x
        jn_t = normal_op @ t.values
        t_thr = SUPPORT_REL_TOL * float(np.abs(jn_t).max())
        ratios = [jn_x[ei] / jn_t[ei] for ei in range(len(interior))
                  if abs(jn_t[ei]) > t_thr]
        pos = [r for r in ratios if r > 0]
        if not pos or min(pos) <= 0 or (min(ratios) < -tol * max(1.0, total)):
            raise ExtremalError(
                "jump signs of the extremal direction disagree with the input: "
                "numerical rank failure"
            )
        c = min(pos)
        terms.append(t)
        coeffs.append(float(c))
        x = x - c * t.values
    residual = htv_cpwl(rep0.cpwl.with_values(x)).total
    if residual > tol * max(1.0, total):
        raise ExtremalError(
            f"decomposition stalled: achieved energy residual {residual:.3e} > {tol:.1e}"
        )
    return Decomposition(
        terms=terms,
        coefficients=coeffs,
        residual=float(residual),
        value_residual=float(np.max(np.abs(x))) if len(x) else 0.0,
        total=float(total),
    )


def rigidity_check(f: Union[CpwlFunction, QuotientRep],
                   g: Union[CpwlFunction, QuotientRep],
                   total_tol: float = 1e-10, edge_tol: float = 1e-9) -> bool:
    """Verify that additivity of the totals forces per-edge additivity.

    Precondition (checked): htv(f + g) = htv(f) + htv(g) within total_tol.
    Returns True iff every interior edge splits its contribution additively
    within edge_tol.
    """
    f = _as_cpwl(f)
    g = _as_cpwl(g)
    if f.mesh is not g.mesh:
        raise ExtremalError("f and g must share a mesh")
    rf = htv_cpwl(f)
    rg = htv_cpwl(g)
    rs = htv_cpwl(f.with_values(f.values + g.values))
    if abs(rs.total - rf.total - rg.total) > total_tol * max(1.0, rf.total + rg.total):
        raise ExtremalError(
            "precondition failed: totals are not additive "
            f"({rs.total} vs {rf.total} + {rg.total})"
        )
    gap = np.abs(rs.contributions - rf.contributions - rg.contributions)
    return bool(np.all(gap <= edge_tol * max(1.0, rf.total + rg.total)))
