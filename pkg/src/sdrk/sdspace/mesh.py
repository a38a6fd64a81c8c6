"""Structured curvilinear quadrilateral meshes.

A mesh is a vectorized analytic mapping ``x(cell, xi, eta)`` from the
reference square [-1, 1]^2 plus face connectivity. The geometry used by the
residual is the tensor-product polynomial of degree p+1 interpolating the
mapping on symmetric nodes; with that choice the discrete metric identities
hold exactly and uniform states stay uniform on curved meshes.

Faces are numbered 0: xi = -1, 1: xi = +1, 2: eta = -1, 3: eta = +1.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConnectivityError
from .operator import lagrange_derivative_matrix, lagrange_matrix

# local corner ids (-,-), (+,-), (+,+), (-,+); each face runs along its free coordinate
_FACE_CORNERS = ((0, 3), (1, 2), (0, 1), (3, 2))
_CORNER_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_KEY_DIGITS = 9
CONFORM_TOL = 1e-10


def _keys(values):
    r = np.round(np.asarray(values, dtype=float), _KEY_DIGITS) + 0.0
    return [tuple(row) for row in r.reshape(-1, r.shape[-1])]


@dataclass(eq=False)
class QuadMesh:
    """Cells, connectivity and boundary tags.

    ``mapping(cells, xi, eta)`` broadcasts its arguments and returns an array
    of shape ``broadcast + (2,)``. ``canonical(xy)`` maps corner coordinates
    to identification keys, folding periodic images onto each other.
    """

    n_cells: int
    mapping: object
    canonical: object
    boundary_tag: object
    descriptor: dict
    rotational_periodicity: bool = False
    neighbor: np.ndarray = field(init=False)
    neighbor_face: np.ndarray = field(init=False)
    flip: np.ndarray = field(init=False)
    tags: np.ndarray = field(init=False)

    def __post_init__(self):
        self._geometry = {}
        self._connect()

    # -- connectivity -------------------------------------------------------
    def corners(self):
        c = np.arange(self.n_cells)[:, None]
        return self.mapping(c, _CORNER_REF[None, :, 0], _CORNER_REF[None, :, 1])

    def _connect(self):
        C = self.n_cells
        xy = self.corners()
        ckeys = _keys(self.canonical(xy.reshape(-1, 2)))
        ids = {}
        vid = np.array([ids.setdefault(k, len(ids)) for k in ckeys]).reshape(C, 4)
        self.vertex_ids = vid
        mids = self.mapping(np.arange(C)[:, None], np.array([[-1.0, 1.0, 0.0, 0.0]]),
                            np.array([[0.0, 0.0, -1.0, 1.0]]))
        # faces are identified by their (canonical) midpoints; vertex ids alone
        # are ambiguous on periodic meshes only two cells wide
        mkeys = _keys(self.canonical(mids.reshape(-1, 2)))
        owners = {}
        for c in range(C):
            for f in range(4):
                owners.setdefault(mkeys[4 * c + f], []).append((c, f))
        self.neighbor = np.full((C, 4), -1)
        self.neighbor_face = np.full((C, 4), -1)
        self.flip = np.zeros((C, 4), dtype=bool)
        self.tags = np.empty((C, 4), dtype=object)
        for key, faces in owners.items():
            if len(faces) > 2:
                raise ConnectivityError(f"face shared by {len(faces)} cells: {faces}")
            if len(faces) == 1:
                c, f = faces[0]
                self.tags[c, f] = self.boundary_tag(mids[c, f])
                continue
            (c1, f1), (c2, f2) = faces
            flipped = vid[c1, _FACE_CORNERS[f1][0]] != vid[c2, _FACE_CORNERS[f2][0]]
            same_place = np.allclose(mids[c1, f1], mids[c2, f2], atol=1e-9)
            tag = "interior" if same_place else "periodic"
            for (ca, fa), (cb, fb) in (((c1, f1), (c2, f2)), ((c2, f2), (c1, f1))):
                self.neighbor[ca, fa] = cb
                self.neighbor_face[ca, fa] = fb
                self.flip[ca, fa] = flipped
                self.tags[ca, fa] = tag

    @property
    def boundary_faces(self):
        return self.neighbor < 0

    # -- geometry -----------------------------------------------------------
    def geometry(self, op):
        g = self._geometry.get(op.p)
        if g is None:
            g = Geometry(self, op)
            self._geometry[op.p] = g
        return g


def _lobatto_like(q):
    """Chebyshev-Lobatto nodes: symmetric and containing both endpoints."""
    return -np.cos(np.pi * np.arange(q + 1) / q)


class Geometry:
    """Metric terms of a mesh at the solution and flux points of an operator."""

    def __init__(self, mesh, op):
        C = mesh.n_cells
        n = op.p + 1
        q = op.p + 1
        gn = _lobatto_like(q)
        cells = np.arange(C)[:, None, None]
        ctrl = mesh.mapping(cells, gn[None, :, None], gn[None, None, :])  # (C, q+1, q+1, 2)
        sol, flx = op.solution_points_1d, op.flux_points_1d

        def eval_at(xi, eta):
            Lx, Ly = lagrange_matrix(gn, xi), lagrange_matrix(gn, eta)
            Dx, Dy = lagrange_derivative_matrix(gn, xi), lagrange_derivative_matrix(gn, eta)
            pos = np.einsum("ak,bl,ckld->cabd", Lx, Ly, ctrl)
            dxi = np.einsum("ak,bl,ckld->cabd", Dx, Ly, ctrl)
            deta = np.einsum("ak,bl,ckld->cabd", Lx, Dy, ctrl)
            return pos, dxi, deta

        self._gn, self._ctrl, self._sol, self._flx = gn, ctrl, sol, flx
        self.x_sol, dxi_s, deta_s = eval_at(sol, sol)
        self.J = dxi_s[..., 0] * deta_s[..., 1] - dxi_s[..., 1] * deta_s[..., 0]
        self.x_fxi, _, deta_f = eval_at(flx, sol)
        self.x_feta, dxi_f, _ = eval_at(sol, flx)
        # contravariant area vectors of the mapped fluxes
        self.S_xi = np.stack([deta_f[..., 1], -deta_f[..., 0]], axis=-1)
        self.S_eta = np.stack([-dxi_f[..., 1], dxi_f[..., 0]], axis=-1)
        J_fxi = self._jac(eval_at(flx, sol))
        J_feta = self._jac(eval_at(sol, flx))
        jmin = min(self.J.min(), J_fxi.min(), J_feta.min())
        if not jmin > 0:
            raise ConnectivityError(f"non-positive Jacobian ({jmin:.3e}) in mesh")
        # reference-direction arc lengths and unit tangents at solution points
        lxi = np.linalg.norm(dxi_s, axis=-1)
        leta = np.linalg.norm(deta_s, axis=-1)
        self.h_xi, self.h_eta = 2.0 * lxi, 2.0 * leta
        self.e_xi = dxi_s / lxi[..., None]
        self.e_eta = deta_s / leta[..., None]

        # face traces (C, 4, n, .)
        self.x_face = np.stack([self.x_fxi[:, 0], self.x_fxi[:, -1],
                                self.x_feta[:, :, 0], self.x_feta[:, :, -1]], axis=1)
        area = np.stack([-self.S_xi[:, 0], self.S_xi[:, -1],
                         -self.S_eta[:, :, 0], self.S_eta[:, :, -1]], axis=1)
        self.area = np.linalg.norm(area, axis=-1)
        self.normal = area / self.area[..., None]

        k = np.arange(n)
        nb = np.where(mesh.boundary_faces, np.arange(C)[:, None], mesh.neighbor)
        nf = np.where(mesh.boundary_faces, np.arange(4)[None, :], mesh.neighbor_face)
        kk = np.where(mesh.flip[..., None], n - 1 - k, k)
        self.gather = ((nb * 4 + nf)[..., None] * n + kk).reshape(-1)
        self.n = n
        self._check_conforming(mesh)

    def contravariant(self, stream):
        """Mapped normal velocities from a streamfunction ``stream(x, y)``.

        For a = (d stream/dy, -d stream/dx) the mapped velocities are
        a.S_xi = d(stream)/d eta and a.S_eta = -d(stream)/d xi; taking both
        from one interpolant makes their discrete divergence vanish exactly.
        """
        gn, sol, flx = self._gn, self._sol, self._flx
        phi = stream(self._ctrl[..., 0], self._ctrl[..., 1])
        U_xi = np.einsum("ak,bl,ckl->cab", lagrange_matrix(gn, flx),
                         lagrange_derivative_matrix(gn, sol), phi)
        U_eta = -np.einsum("ak,bl,ckl->cab", lagrange_derivative_matrix(gn, sol),
                           lagrange_matrix(gn, flx), phi)
        return U_xi, U_eta

    @staticmethod
    def _jac(ev):
        _, a, b = ev
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    def _check_conforming(self, mesh):
        mask = mesh.tags == "interior"
        if not mask.any():
            return
        other = self.x_face.reshape(-1, 2)[self.gather].reshape(self.x_face.shape)
        gap = np.abs(other - self.x_face).max(axis=(-1, -2))
        worst = float(gap[mask].max())
        if worst > CONFORM_TOL:
            raise ConnectivityError(f"non-conforming interior faces (gap {worst:.3e})")

    def quadrature_weights(self, op):
        """J-weighted Gauss weights per solution point, shape (C, n, n)."""
        w = op.weights_1d
        return self.J * w[None, :, None] * w[None, None, :]


# ---------------------------------------------------------------------------
# generators


def _tagger(tags):
    if callable(tags):
        return tags
    return lambda xy: tags


def cartesian_mesh(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0, periodic=(True, True),
                   boundary="extrapolation"):
    """Uniform nx-by-ny box; cells are numbered row by row (x fastest)."""
    if nx < 1 or ny < 1 or not (x1 > x0 and y1 > y0):
        raise ValueError("invalid box")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    ii = np.arange(nx * ny) % nx
    jj = np.arange(nx * ny) // nx

    def mapping(c, xi, eta):
        c, xi, eta = np.broadcast_arrays(c, xi, eta)
        x = x0 + (ii[c] + 0.5 * (xi + 1.0)) * hx
        y = y0 + (jj[c] + 0.5 * (eta + 1.0)) * hy
        return np.stack([x, y], axis=-1)

    def canonical(xy):
        fx = np.round((xy[:, 0] - x0) / (x1 - x0), _KEY_DIGITS)
        fy = np.round((xy[:, 1] - y0) / (y1 - y0), _KEY_DIGITS)
        if periodic[0]:
            fx = fx % 1.0
        if periodic[1]:
            fy = fy % 1.0
        return np.column_stack([fx, fy])

    desc = {"kind": "cartesian", "nx": nx, "ny": ny, "box": [x0, x1, y0, y1],
            "periodic": [bool(periodic[0]), bool(periodic[1])]}
    return QuadMesh(nx * ny, mapping, canonical, _tagger(boundary), desc)


def annulus_mesh(nr, ntheta, r_inner, r_outer, theta0=0.0, theta1=0.5 * np.pi,
                 periodic=False, boundary="extrapolation"):
    """Polar sector; xi runs radially and eta counter-clockwise in angle.

    With ``periodic`` the two radial cuts are identified by rotation, which
    is exact for rotation-invariant scalar problems.
    """
    if not (0 < r_inner < r_outer) or not theta1 > theta0:
        raise ValueError("invalid annulus")
    hr, ht = (r_outer - r_inner) / nr, (theta1 - theta0) / ntheta
    ii = np.arange(nr * ntheta) % nr
    jj = np.arange(nr * ntheta) // nr

    def mapping(c, xi, eta):
        c, xi, eta = np.broadcast_arrays(c, xi, eta)
        r = r_inner + (ii[c] + 0.5 * (xi + 1.0)) * hr
        t = theta0 + (jj[c] + 0.5 * (eta + 1.0)) * ht
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def canonical(xy):
        r = np.round(np.hypot(xy[:, 0], xy[:, 1]), _KEY_DIGITS)
        f = np.round((np.arctan2(xy[:, 1], xy[:, 0]) - theta0) / (theta1 - theta0), _KEY_DIGITS)
        if periodic:
            f = f % 1.0
        return np.column_stack([r, f])

    desc = {"kind": "annulus", "nr": nr, "ntheta": ntheta, "r_inner": r_inner,
            "r_outer": r_outer, "theta": [theta0, theta1], "periodic": bool(periodic)}
    return QuadMesh(nr * ntheta, mapping, canonical, _tagger(boundary), desc,
                    rotational_periodicity=bool(periodic))


def disk_mesh(n_center, n_radial, radius=0.5, core=0.5, boundary="extrapolation"):
    """O-grid disk: a central square of half-width ``core*radius/sqrt(2)``
    split into n_center^2 cells, surrounded by four blended blocks of
    n_center x n_radial cells reaching the circle.
    """
    if n_center < 1 or n_radial < 1 or not 0 < core < 1:
        raise ValueError("invalid disk parameters")
    a = core * radius / np.sqrt(2.0)
    m, nr = n_center, n_radial
    n_core = m * m
    n_blk = m * nr
    cid = np.arange(n_core + 4 * n_blk)
    # block cells: radial index i (xi), tangential index j (eta)
    blk = (cid - n_core) // n_blk
    loc = (cid - n_core) % n_blk
    bi, bj = loc % nr, loc // nr
    ci, cj = cid % m, cid // m

    def mapping(c, xi, eta):
        c, xi, eta = np.broadcast_arrays(c, xi, eta)
        out = np.empty(c.shape + (2,))
        core_mask = c < n_core
        cc = c[core_mask]
        out[core_mask, 0] = -a + (ci[cc] + 0.5 * (xi[core_mask] + 1.0)) * (2 * a / m)
        out[core_mask, 1] = -a + (cj[cc] + 0.5 * (eta[core_mask] + 1.0)) * (2 * a / m)
        bm = ~core_mask
        cb = c[bm]
        s = (bi[cb] + 0.5 * (xi[bm] + 1.0)) / nr
        t = -1.0 + (bj[cb] + 0.5 * (eta[bm] + 1.0)) * (2.0 / m)
        px0, py0 = a * np.ones_like(t), a * t
        ang = 0.25 * np.pi * t
        px1, py1 = radius * np.cos(ang), radius * np.sin(ang)
        px = (1 - s) * px0 + s * px1
        py = (1 - s) * py0 + s * py1
        rot = 0.5 * np.pi * blk[cb]
        cr, sr = np.cos(rot), np.sin(rot)
        out[bm, 0] = cr * px - sr * py
        out[bm, 1] = sr * px + cr * py
        return out

    desc = {"kind": "disk", "n_center": m, "n_radial": nr, "radius": radius, "core": core}
    return QuadMesh(len(cid), mapping, lambda xy: xy, _tagger(boundary), desc)
