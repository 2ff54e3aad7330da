"""Coupled bulk-surface elliptic kernel and its eigenstructure.

A bulk field phi and a wall pair psi are treated as one unknown vector with
the trace constraint phi|_Gamma = sigma*psi eliminated: psi supplies the
ghost values of every wall-coupled bulk stencil.  The pair operator

    A(phi, psi) = (-lap phi, -kappa lapG psi + sigma dn phi)

then assembles to a symmetric positive-semidefinite matrix with respect to
the midpoint quadrature, and <A u, u> equals the discrete Dirichlet energy
||grad phi||^2 + kappa ||grad_G psi||^2 exactly (dn is the half-cell wall
flux adjoint to the ghost closure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (BulkField, ChannelGrid, WallPair, bulk_gradient_sq,
                   bulk_laplacian, surface_gradient_sq, surface_laplacian,
                   wall_flux)

_DENSE_LIMIT = 6000  # pair-vector size up to which eigensolves go dense


class SolverError(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# pair vector packing


def pair_size(grid: ChannelGrid) -> int:
    return grid.nx * grid.ny + 2 * grid.nx


def pack(phi: BulkField, psi: WallPair) -> np.ndarray:
    return np.concatenate([phi.ravel(), psi.bottom, psi.top])


def unpack(vec, grid: ChannelGrid):
    nb = grid.nx * grid.ny
    phi = vec[:nb].reshape(grid.nx, grid.ny).copy()
    psi = WallPair(vec[nb:nb + grid.nx].copy(), vec[nb + grid.nx:].copy())
    return phi, psi


def quadrature_weights(grid: ChannelGrid) -> np.ndarray:
    """Diagonal of the L^2 pair inner product (bulk hx*hy, wall hx)."""
    nb = grid.nx * grid.ny
    w = np.empty(pair_size(grid))
    w[:nb] = grid.hx * grid.hy
    w[nb:] = grid.hx
    return w


# ---------------------------------------------------------------------------
# stiffness assembly


def _cell_ids(grid):
    return np.arange(grid.nx * grid.ny).reshape(grid.nx, grid.ny)


def assemble_pair_stiffness(grid: ChannelGrid, kappa, sigma, *,
                            bulk_coeff=1.0, surf_scale=None,
                            face_mx=None, face_my=None,
                            wall_coef=None, surf_m=None):
    """Assemble the quadrature-weighted stiffness of the pair operator.

    With the defaults this is the form of A(phi,psi) above:
    u^T K u = ||grad phi||^2 + kappa ||grad_G psi||^2 on trace-eliminated
    pairs.  The optional per-face coefficient arrays generalize it to the
    mobility-weighted diffusion form of the Cahn-Hilliard step:

      face_mx   (nx, ny)   coefficient on vertical faces,
      face_my   (nx, ny-1) coefficient on interior horizontal faces,
      wall_coef WallPair   coefficient c on the wall coupling term
                           c*(phi_adj - sigma*psi)^2 * hx,
      surf_m    WallPair   coefficient on wall tangential faces.

    When wall_coef is None it defaults to the trace-elimination value
    2*bulk_coeff/hy (the half-cell gradient weight).
    """
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    nb = nx * ny
    n = pair_size(grid)
    cid = _cell_ids(grid)
    if surf_scale is None:
        surf_scale = kappa

    rows, cols, vals = [], [], []

    def add_edges(a_ids, b_ids, coef):
        """Quadratic form coef*(x_a - x_b)^2 for index arrays a, b."""
        rows.extend([a_ids, b_ids, a_ids, b_ids])
        cols.extend([a_ids, b_ids, b_ids, a_ids])
        vals.extend([coef, coef, -coef, -coef])

    # vertical faces: coeff * hy/hx per face
    mx = np.ones((nx, ny)) if face_mx is None else face_mx
    coef = (bulk_coeff * hy / hx) * mx
    add_edges(np.roll(cid, 1, axis=0).ravel(), cid.ravel(), coef.ravel())

    # interior horizontal faces: coeff * hx/hy per face
    my = np.ones((nx, ny - 1)) if face_my is None else face_my
    coef = (bulk_coeff * hx / hy) * my
    add_edges(cid[:, :-1].ravel(), cid[:, 1:].ravel(), coef.ravel())

    # wall coupling: c*hx * (phi_adj - sigma*psi)^2
    if wall_coef is None:
        wall_coef = WallPair(np.full(nx, 2.0 * bulk_coeff / hy),
                             np.full(nx, 2.0 * bulk_coeff / hy))
    for adj, pid, c in ((cid[:, 0], nb + np.arange(nx), wall_coef.bottom),
                        (cid[:, -1], nb + nx + np.arange(nx), wall_coef.top)):
        c = np.asarray(c, dtype=float) * hx
        rows.extend([adj, pid, adj, pid])
        cols.extend([adj, pid, pid, adj])
        vals.extend([c, sigma * sigma * c, -sigma * c, -sigma * c])

    # wall tangential faces: coeff / hx per face, each wall periodic
    for off, m in ((nb, None if surf_m is None else surf_m.bottom),
                   (nb + nx, None if surf_m is None else surf_m.top)):
        ids = off + np.arange(nx)
        c = (surf_scale / hx) * (np.ones(nx) if m is None else np.asarray(m))
        add_edges(np.roll(ids, 1), ids, c)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def apply_pair_operator(phi, psi, kappa, sigma, grid):
    """Matrix-free A(phi,psi) = (-lap phi, -kappa lapG psi + sigma dn phi)
    with ghost trace sigma*psi."""
    trace = sigma * psi
    a_bulk = -bulk_laplacian(phi, trace, grid)
    a_surf = -kappa * surface_laplacian(psi, grid) + sigma * wall_flux(phi, trace, grid)
    return a_bulk, a_surf


def pair_gradient_energy(phi, psi, kappa, sigma, grid):
    """||grad phi||^2 + kappa ||grad_G psi||^2 with the sigma-trace wall
    half-cells; equals <A(phi,psi), (phi,psi)> exactly."""
    return bulk_gradient_sq(phi, sigma * psi, grid) + \
        kappa * surface_gradient_sq(psi, grid)


# ---------------------------------------------------------------------------
# resolvent solve


def solve_coupled_elliptic(f: BulkField, g: WallPair, kappa, sigma,
                           grid: ChannelGrid, tol=1e-12, maxiter=None):
    """Solve phi - lap phi = f, psi - kappa lapG psi + sigma dn phi = g,
    phi|_Gamma = sigma psi, by conjugate gradients on the SPD trace-
    eliminated system."""
    if kappa <= 0 or sigma <= 0:
        raise ValueError("kappa and sigma must be positive")
    K = assemble_pair_stiffness(grid, kappa, sigma)
    w = quadrature_weights(grid)
    A = K + sp.diags(w)
    b = w * pack(f, g)
    precond = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, M=precond,
                      maxiter=maxiter or 40 * int(np.sqrt(A.shape[0])))
    if info != 0:
        res = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
        raise SolverError(f"coupled elliptic CG did not converge (info={info})",
                          residual=res)
    return unpack(x, grid)


# ---------------------------------------------------------------------------
# eigenpairs


@dataclass
class EigenPair:
    """One discrete eigenpair of the bulk-surface eigenvalue problem."""

    lam: float
    zeta: BulkField
    xi: WallPair

    def vector(self):
        return pack(self.zeta, self.xi)


def bulk_surface_eigenpairs(k, alpha, grid: ChannelGrid):
    """The k smallest eigenpairs of -lap zeta = lam zeta,
    -lapG xi + alpha dn zeta = lam xi, zeta|_Gamma = alpha xi.

    Pairs are orthonormal in the pair L^2 product; the kernel pair is fixed
    to the exact constant (alpha, 1)/sqrt(alpha^2|Omega| + |Gamma|).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = pair_size(grid)
    if k > min(n, 64):
        raise ValueError(f"k={k} exceeds the eigenpair cap min({n}, 64)")
    K = assemble_pair_stiffness(grid, kappa=1.0, sigma=alpha)
    w = quadrature_weights(grid)
    rw = 1.0 / np.sqrt(w)
    if n <= _DENSE_LIMIT:
        Asym = (K.multiply(rw[:, None])).multiply(rw[None, :]).toarray()
        Asym = 0.5 * (Asym + Asym.T)
        lams, vecs = np.linalg.eigh(Asym)
        lams, vecs = lams[:k], vecs[:, :k]
    else:
        Asym = sp.diags(rw) @ K @ sp.diags(rw)
        lams, vecs = spla.eigsh(Asym, k=k, sigma=-1e-8, which="LM")
        order = np.argsort(lams)
        lams, vecs = lams[order], vecs[:, order]
    vecs = vecs * rw[:, None]  # back to W-orthonormal coordinates

    pairs = []
    for i in range(k):
        zeta, xi = unpack(vecs[:, i], grid)
        pairs.append(EigenPair(float(lams[i]), zeta, xi))

    # replace the kernel pair by its exact constant representative
    if pairs and abs(pairs[0].lam) < 1e-8:
        norm = np.sqrt(alpha ** 2 * grid.area + grid.wall_length)
        pairs[0] = EigenPair(0.0,
                             np.full((grid.nx, grid.ny), alpha / norm),
                             WallPair.full(grid, 1.0 / norm))
    return pairs


# ---------------------------------------------------------------------------
# chain rule residual


def _as_pair(state):
    if hasattr(state, "phi") and hasattr(state, "psi"):
        return state.phi, state.psi
    phi, psi = state
    return phi, psi


def chain_rule_residual(trajectory, kappa, sigma, dt, grid: ChannelGrid):
    """Max defect of d/dt [1/2||grad phi||^2 + kappa/2 ||grad_G psi||^2]
    = <(dphi/dt, dpsi/dt), A(phi,psi)> along a trace-compatible trajectory,
    with central time differences at the interior time levels."""
    states = [(_as_pair(s)) for s in trajectory]
    if len(states) < 3:
        raise ValueError("chain-rule residual needs at least 3 time levels")

    def energy(phi, psi):
        return 0.5 * pair_gradient_energy(phi, psi, kappa, sigma, grid)

    vol, hx = grid.hx * grid.hy, grid.hx
    worst = 0.0
    for m in range(1, len(states) - 1):
        phi_m, psi_m = states[m]
        phi_p, psi_p = states[m + 1]
        phi_q, psi_q = states[m - 1]
        dE = (energy(phi_p, psi_p) - energy(phi_q, psi_q)) / (2.0 * dt)
        dphi = (phi_p - phi_q) / (2.0 * dt)
        dpsi = (psi_p - psi_q) * (1.0 / (2.0 * dt))
        a_bulk, a_surf = apply_pair_operator(phi_m, psi_m, kappa, sigma, grid)
        rhs = np.sum(dphi * a_bulk) * vol + \
            (np.sum(dpsi.bottom * a_surf.bottom) +
             np.sum(dpsi.top * a_surf.top)) * hx
        worst = max(worst, abs(dE - rhs))
    return worst
