"""Monotone wide-stencil solver for det D^2 u = f with Dirichlet data.

The determinant of the Hessian of a convex function is the minimum over
lattice direction pairs (v, w), det(v, w) != 0, of

    (second difference along v) * (second difference along w) / det(v, w)^2,

up to O(delta^2) truncation, with equality approached when a pair is
conjugate under the Hessian. Taking positive parts of the second differences
makes the scheme degenerate elliptic (monotone), so the discrete solution is
the unique fixed point and discrete comparison holds. A penalty on negative
second differences steers iterations toward the convex branch and vanishes at
convergence.

Boundary arms are clipped at the exact domain boundary (one-sided second
differences with the true crossing distances), because everything this
package measures happens next to the boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from types import SimpleNamespace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import domain as dom_mod
from ._geometry import unit_ball_volume
from .domain import BoundaryFunction, ConvexDomain, ProblemSpec, convex_envelope

DIRECTIONS_W1 = ((1, 0), (0, 1), (1, 1), (1, -1))
DIRECTIONS_W2 = DIRECTIONS_W1 + ((2, 1), (1, 2), (-1, 2), (2, -1))

DEFAULT_RESIDUAL_TOL = 1e-9
MAX_SWEEPS = 10**5
CONVEXITY_TOL = 1e-8


class GridError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


def _direction_pairs(directions):
    pairs = []
    for i in range(len(directions)):
        for j in range(i + 1, len(directions)):
            di, dj = directions[i], directions[j]
            det = di[0] * dj[1] - di[1] * dj[0]
            if det != 0:
                pairs.append((i, j, 1.0 / float(det * det)))
    return pairs


@dataclass(frozen=True)
class _Arm:
    """One stencil direction over all unknowns: linked neighbor index (or -1),
    boundary value for clipped arms, and fractional arm lengths in (0, 1]."""

    jp: np.ndarray
    vp: np.ndarray
    tp: np.ndarray
    jm: np.ndarray
    vm: np.ndarray
    tm: np.ndarray
    cp: np.ndarray
    cm: np.ndarray
    c0: np.ndarray


@dataclass(frozen=True)
class Grid:
    """Clipped uniform grid over a ProblemSpec domain.

    status: 0 exterior, 1 interior (full stencil), 2 boundary-adjacent
    (some arm clipped), 3 on-boundary Dirichlet node.
    """

    spec: ProblemSpec
    delta: float
    shape: tuple
    i0: int
    j0: int
    status: np.ndarray
    unknown_index: np.ndarray
    unknown_ij: np.ndarray
    unknown_xy: np.ndarray
    dirichlet_values: np.ndarray
    arms: tuple
    directions: tuple
    pairs: tuple
    stencil_width: int
    envelope: BoundaryFunction

    @property
    def n_unknowns(self) -> int:
        return len(self.unknown_xy)

    def row_weights(self) -> np.ndarray:
        """Stiffness of each node's equation relative to an unclipped row
        (>= 1); severely clipped cells have a floating-point residual floor
        proportional to this weight."""
        w = np.ones(self.n_unknowns)
        for arm in self.arms:
            w = np.maximum(w, arm.c0 * self.delta**2 / 2.0)
        return w

    @property
    def domain(self) -> ConvexDomain:
        return self.spec.domain

    def node_coords(self, ii, jj):
        return np.stack(
            [(np.asarray(ii) + self.i0) * self.delta,
             (np.asarray(jj) + self.j0) * self.delta], axis=-1
        )

    def full_grid_points(self):
        ii, jj = np.meshgrid(
            np.arange(self.shape[0]), np.arange(self.shape[1]), indexing="ij"
        )
        return self.node_coords(ii, jj)


def discretize(spec: ProblemSpec, delta: float, stencil_width: int = 2) -> Grid:
    """Build the clipped grid; boundary values are taken from the convex
    envelope of the boundary data."""
    dom = spec.domain
    if dom.dimension != 2:
        raise GridError("the grid solver is two-dimensional")
    rho = dom.rho
    if 2.0 * rho / delta < 8.0:
        raise GridError(
            f"delta={delta} too coarse: need >= 8 nodes across the tangent "
            f"ball, i.e. delta <= {rho / 4.0:.6g}"
        )
    env = convex_envelope(spec.phi, dom)

    b = dom.boundary
    pad = 2 * delta
    i0 = int(np.floor((b[:, 0].min() - pad) / delta))
    i1 = int(np.ceil((b[:, 0].max() + pad) / delta))
    j0 = int(np.floor((b[:, 1].min() - pad) / delta))
    j1 = int(np.ceil((b[:, 1].max() + pad) / delta))
    nx, ny = i1 - i0 + 1, j1 - j0 + 1

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pts = np.stack([(ii + i0) * delta, (jj + j0) * delta], axis=-1).reshape(-1, 2)
    scale = max(1.0, dom.r_out)
    eps = 1e-12 * scale
    strict = dom.contains(pts, tol=-eps).reshape(nx, ny)
    weak = dom.contains(pts, tol=eps).reshape(nx, ny)
    status = np.zeros((nx, ny), dtype=np.int8)
    status[weak & ~strict] = 3
    status[strict] = 1  # refined to 2 below once arms are known

    unknown_mask = status == 1
    unknown_index = -np.ones((nx, ny), dtype=np.int64)
    ku = np.flatnonzero(unknown_mask.reshape(-1))
    unknown_index.reshape(-1)[ku] = np.arange(len(ku))
    uij = np.column_stack(np.nonzero(unknown_mask))
    uxy = np.stack([(uij[:, 0] + i0) * delta, (uij[:, 1] + j0) * delta], axis=1)

    dir_pts = np.stack(np.nonzero(status == 3), axis=1)
    dvals = env.value_at(
        np.stack([(dir_pts[:, 0] + i0) * delta, (dir_pts[:, 1] + j0) * delta], axis=1)
    ) if len(dir_pts) else np.zeros(0)
    dirichlet = np.full((nx, ny), np.nan)
    dirichlet[dir_pts[:, 0], dir_pts[:, 1]] = dvals

    directions = DIRECTIONS_W2 if stencil_width >= 2 else DIRECTIONS_W1
    arms = []
    clipped_any = np.zeros(len(uij), dtype=bool)
    for d in directions:
        arm_sides = []
        for sgn in (+1, -1):
            di, dj = sgn * d[0], sgn * d[1]
            ni = uij[:, 0] + di
            nj = uij[:, 1] + dj
            inb = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
            nstat = np.zeros(len(uij), dtype=np.int8)
            nstat[inb] = status[ni[inb], nj[inb]]
            link = np.where(
                (nstat == 1), unknown_index[ni % nx, nj % ny], -1
            ).astype(np.int64)
            val = np.zeros(len(uij))
            th = np.ones(len(uij))
            isdir = nstat == 3
            if np.any(isdir):
                val[isdir] = dirichlet[ni[isdir], nj[isdir]]
            clip = (nstat == 0)
            if np.any(clip):
                step = np.array([di * delta, dj * delta])
                for k in np.flatnonzero(clip):
                    t = dom.ray_exit(uxy[k], step)
                    t = min(max(t, 1e-9), 1.0)
                    th[k] = t
                    val[k] = float(env.value_at(uxy[k] + t * step)[0])
                clipped_any[np.flatnonzero(clip)] = True
            arm_sides.append((link, val, th))
        (jp, vp, tp), (jm, vm, tm) = arm_sides
        d2 = delta * delta
        cp = 2.0 / (d2 * tp * (tp + tm))
        cm = 2.0 / (d2 * tm * (tp + tm))
        c0 = 2.0 / (d2 * tp * tm)
        arms.append(_Arm(jp, vp, tp, jm, vm, tm, cp, cm, c0))

    status[uij[clipped_any, 0], uij[clipped_any, 1]] = 2
    if not np.all((arms[0].tp > 0) & (arms[0].tp <= 1.0)):
        raise GridError("clipped arm fractions outside (0, 1]")

    return Grid(
        spec=spec,
        delta=float(delta),
        shape=(nx, ny),
        i0=i0,
        j0=j0,
        status=status,
        unknown_index=unknown_index,
        unknown_ij=uij,
        unknown_xy=uxy,
        dirichlet_values=dirichlet,
        arms=tuple(arms),
        directions=tuple(directions),
        pairs=tuple(_direction_pairs(directions)),
        stencil_width=stencil_width,
        envelope=env,
    )


# ---------------------------------------------------------------------------
# scheme evaluation


def _second_differences(grid: Grid, u: np.ndarray) -> np.ndarray:
    """(n_dirs, N) array of scaled second differences d~' D^2u d~ along each
    stencil direction (d~ the integer direction vector)."""
    out = np.empty((len(grid.arms), len(u)))
    for a, arm in enumerate(grid.arms):
        up = np.where(arm.jp >= 0, u[arm.jp], arm.vp)
        um = np.where(arm.jm >= 0, u[arm.jm], arm.vm)
        out[a] = arm.cp * up + arm.cm * um - arm.c0 * u
    return out


def _pos_eps(t, eps):
    if eps == 0.0:
        return np.maximum(t, 0.0)
    return 0.5 * (t + np.sqrt(t * t + eps * eps))


def _dpos_eps(t, eps):
    if eps == 0.0:
        return (t > 0.0).astype(float)
    return 0.5 * (1.0 + t / np.sqrt(t * t + eps * eps))


def _scheme_value(grid: Grid, diffs: np.ndarray, kappa: float, eps: float = 0.0):
    """min over pairs of weighted positive-part products, plus the negative
    part penalty; also returns the argmin pair index per node. eps > 0
    smooths the positive parts (used only as Newton continuation; the solved
    scheme always has eps = 0)."""
    pos = _pos_eps(diffs, eps)
    best = None
    amin = None
    for p, (i, j, w) in enumerate(grid.pairs):
        val = w * pos[i] * pos[j]
        if best is None:
            best = val.copy()
            amin = np.zeros(len(val), dtype=np.int32)
        else:
            upd = val < best
            best[upd] = val[upd]
            amin[upd] = p
    penalty = kappa * np.minimum(diffs, 0.0).sum(axis=0)
    return best + penalty, amin


def _scheme_jacobian(grid: Grid, diffs, amin, kappa, eps: float = 0.0):
    """Sparse derivative of the scheme at the current iterate (active pair
    linearization plus the penalty part)."""
    n = diffs.shape[1]
    pos = _pos_eps(diffs, eps)
    dpos = _dpos_eps(diffs, eps)
    g = np.zeros_like(diffs)
    for p, (i, j, w) in enumerate(grid.pairs):
        mask = amin == p
        if not np.any(mask):
            continue
        g[i, mask] += w * dpos[i, mask] * pos[j, mask]
        g[j, mask] += w * dpos[j, mask] * pos[i, mask]
    g += kappa * (diffs < 0.0)

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, -1e-12)]
    for a, arm in enumerate(grid.arms):
        ga = g[a]
        nz = np.flatnonzero(ga != 0.0)
        if len(nz) == 0:
            continue
        rows.append(nz)
        cols.append(nz)
        vals.append(-ga[nz] * arm.c0[nz])
        for jarr, carr in ((arm.jp, arm.cp), (arm.jm, arm.cm)):
            link = nz[jarr[nz] >= 0]
            if len(link):
                rows.append(link)
                cols.append(jarr[link])
                vals.append(g[a, link] * carr[link])
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return J.tocsc()


def _poisson_initial_guess(grid: Grid, fvals: np.ndarray) -> np.ndarray:
    """Solve the linearization Delta u = n f^{1/n} (exact for the isotropic
    quadratic) as the Newton starting point."""
    n = grid.n_unknowns
    rhs = 2.0 * np.sqrt(np.maximum(fvals, 0.0))
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for arm in grid.arms[:2]:  # the two axis directions
        diag -= arm.c0
        for jarr, carr, varr in (
            (arm.jp, arm.cp, arm.vp),
            (arm.jm, arm.cm, arm.vm),
        ):
            link = jarr >= 0
            idx = np.flatnonzero(link)
            rows.append(idx)
            cols.append(jarr[idx])
            vals.append(carr[idx])
            rhs[~link] -= carr[~link] * varr[~link]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    return spla.splu(A, permc_spec="COLAMD").solve(rhs)


# ---------------------------------------------------------------------------
# Field


@dataclass(frozen=True)
class Field:
    """Discrete convex solution on a Grid; immutable once returned."""

    grid: Grid
    values: np.ndarray
    f_values: np.ndarray
    residual_norm: float
    iterations: int
    method: str
    convexity_margin: float

    @property
    def delta(self) -> float:
        return self.grid.delta

    @property
    def domain(self) -> ConvexDomain:
        return self.grid.domain

    def scale_of_u(self) -> float:
        return float(max(1.0, np.max(np.abs(self.values))))

    def full_array(self) -> np.ndarray:
        """Node values on the full bounding-box grid, NaN outside the body."""
        nxny = self.grid.shape
        out = np.full(nxny, np.nan)
        uij = self.grid.unknown_ij
        out[uij[:, 0], uij[:, 1]] = self.values
        db = self.grid.status == 3
        out[db] = self.grid.dirichlet_values[db]
        return out

    def convexity_certificate(self) -> float:
        """min over nodes and directions of delta^2-scaled second differences;
        the Field is discretely convex when this exceeds -1e-8 * scale."""
        diffs = _second_differences(self.grid, self.values)
        return float(np.min(diffs) * self.grid.delta**2)

    def residual(self) -> np.ndarray:
        diffs = _second_differences(self.grid, self.values)
        val, _ = _scheme_value(self.grid, diffs, kappa=0.0)
        return val - self.f_values

    def scaled(self, beta: float) -> "Field":
        """The field of beta*u: nodal, boundary and right-side data all scale
        (f by beta^n)."""
        g = self.grid
        arms = tuple(
            replace(a, vp=a.vp * beta, vm=a.vm * beta) for a in g.arms
        )
        env = replace(g.envelope, values=g.envelope.values * beta, fn=None)
        g2 = replace(g, arms=arms, dirichlet_values=g.dirichlet_values * beta,
                     envelope=env)
        return Field(
            grid=g2,
            values=self.values * beta,
            f_values=self.f_values * beta**2,
            residual_norm=self.residual_norm * beta**2,
            iterations=self.iterations,
            method=self.method,
            convexity_margin=self.convexity_margin * beta,
        )

    # -- interpolation ------------------------------------------------------

    def _extended_array(self) -> np.ndarray:
        """full_array with ghost values at exterior nodes next to the body,
        linearly extended through the boundary crossing of each axis arm."""
        V = self.full_array()
        g = self.grid
        acc = np.zeros(g.shape)
        cnt = np.zeros(g.shape)
        uij = g.unknown_ij
        for a, d in zip(g.arms[:2], g.directions[:2]):
            for sgn, jarr, varr, tarr in (
                (+1, a.jp, a.vp, a.tp),
                (-1, a.jm, a.vm, a.tm),
            ):
                clip = np.flatnonzero((jarr < 0) & (tarr < 1.0))
                if len(clip) == 0:
                    continue
                gi = uij[clip, 0] + sgn * d[0]
                gj = uij[clip, 1] + sgn * d[1]
                ok = (gi >= 0) & (gi < g.shape[0]) & (gj >= 0) & (gj < g.shape[1])
                clip, gi, gj = clip[ok], gi[ok], gj[ok]
                ghost = varr[clip] + (varr[clip] - self.values[clip]) * (
                    1.0 - tarr[clip]
                ) / tarr[clip]
                np.add.at(acc, (gi, gj), ghost)
                np.add.at(cnt, (gi, gj), 1.0)
        fill = (cnt > 0) & np.isnan(V)
        V[fill] = acc[fill] / cnt[fill]
        return V

    def evaluate(self, pts) -> np.ndarray:
        """Interpolated values at arbitrary points of the body: biquadratic
        where a full 3x3 neighborhood exists, bilinear in cut cells."""
        g = self.grid
        p = np.atleast_2d(np.asarray(pts, float))
        V = self._extended_array()
        gx = p[:, 0] / g.delta - g.i0
        gy = p[:, 1] / g.delta - g.j0
        ri = np.clip(np.round(gx).astype(int), 1, g.shape[0] - 2)
        rj = np.clip(np.round(gy).astype(int), 1, g.shape[1] - 2)
        xi = gx - ri
        eta = gy - rj

        block = np.empty((len(p), 3, 3))
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                block[:, a + 1, b + 1] = V[ri + a, rj + b]
        good = ~np.isnan(block).any(axis=(1, 2))

        def qw(t):
            return np.stack(
                [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1
            )

        out = np.full(len(p), np.nan)
        if np.any(good):
            wx = qw(xi[good])
            wy = qw(eta[good])
            out[good] = np.einsum("pa,pab,pb->p", wx, block[good], wy)
        bad = np.flatnonzero(~good)
        if len(bad):
            fi = np.clip(np.floor(gx[bad]).astype(int), 0, g.shape[0] - 2)
            fj = np.clip(np.floor(gy[bad]).astype(int), 0, g.shape[1] - 2)
            tx = gx[bad] - fi
            ty = gy[bad] - fj
            c00 = V[fi, fj]
            c10 = V[fi + 1, fj]
            c01 = V[fi, fj + 1]
            c11 = V[fi + 1, fj + 1]
            lin = (
                c00 * (1 - tx) * (1 - ty)
                + c10 * tx * (1 - ty)
                + c01 * (1 - tx) * ty
                + c11 * tx * ty
            )
            out[bad] = lin
            still = np.isnan(out[bad])
            if np.any(still):
                # last resort: nearest node with a value
                uxy = g.unknown_xy
                for kk in bad[still]:
                    k = np.argmin(np.sum((uxy - p[kk]) ** 2, axis=1))
                    out[kk] = self.values[k]
        return out if np.asarray(pts).ndim > 1 else float(out[0])

    # -- checkpoint io ------------------------------------------------------

    _MAGIC = b"MALABFLD"

    def save_checkpoint(self, path):
        """Binary snapshot: magic, uint64 (nx, ny), float64 (delta, origin_x,
        origin_y), little-endian, then the full node array row-major float64
        (NaN outside the body)."""
        V = self.full_array()
        nx, ny = self.grid.shape
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(struct.pack("<QQ", nx, ny))
            fh.write(
                struct.pack(
                    "<ddd",
                    self.grid.delta,
                    self.grid.i0 * self.grid.delta,
                    self.grid.j0 * self.grid.delta,
                )
            )
            fh.write(V.astype("<f8").tobytes(order="C"))

    @staticmethod
    def load_checkpoint(path):
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != Field._MAGIC:
                raise ValueError("not a field checkpoint")
            nx, ny = struct.unpack("<QQ", fh.read(16))
            delta, ox, oy = struct.unpack("<ddd", fh.read(24))
            V = np.frombuffer(fh.read(nx * ny * 8), dtype="<f8").reshape(nx, ny)
        return SimpleNamespace(
            shape=(nx, ny), delta=delta, origin=(ox, oy), values=V.copy()
        )


# ---------------------------------------------------------------------------
# solve


def _as_f_values(grid: Grid, f) -> np.ndarray:
    if f is None:
        f = grid.spec.f
    vals = np.asarray(f(grid.unknown_xy), float) if callable(f) else np.asarray(f)
    if vals.shape != (grid.n_unknowns,):
        raise GridError("f values have the wrong shape")
    if np.any(vals <= 0.0):
        raise GridError("f must be strictly positive (lambda > 0)")
    lam, Lam = grid.spec.lam, grid.spec.Lam
    if np.any(vals < lam - 1e-9) or np.any(vals > Lam + 1e-9):
        raise GridError("f leaves the declared [lambda, Lambda] pinch")
    return vals


def solve_dirichlet(
    grid: Grid,
    f=None,
    method: str = "newton",
    tol: Optional[float] = None,
    max_iter: int = 50,
) -> Field:
    """Solve the discrete Dirichlet problem to max-norm residual <= tol.

    method "newton": damped active-pair Newton from a Poisson initial guess
    (fast path). method "gauss-seidel": damped colored sweeps with a nodewise
    scalar solve (robust fallback). The sweep order (16-color tiling, colors
    in index order) is fixed and part of the reproducibility contract.
    """
    fvals = _as_f_values(grid, f)
    if tol is None:
        tol = DEFAULT_RESIDUAL_TOL * max(1.0, grid.spec.Lam)
    kappa = 10.0 * max(1.0, grid.spec.Lam)
    history = []
    u = _poisson_initial_guess(grid, fvals)
    for bump in range(3):
        if method == "newton":
            u, iters = _newton_solve(grid, u, fvals, kappa, tol, max_iter, history)
        elif method == "gauss-seidel":
            u, iters = _gauss_seidel_solve(grid, u, fvals, kappa, tol, history)
        else:
            raise GridError(f"unknown method {method!r}")
        diffs = _second_differences(grid, u)
        margin = float(np.min(diffs) * grid.delta**2)
        if margin >= -CONVEXITY_TOL * max(1.0, np.max(np.abs(u))):
            break
        kappa *= 100.0
    val, _ = _scheme_value(grid, diffs, kappa=0.0)
    res = float(np.max(np.abs(val - fvals)))
    return Field(
        grid=grid,
        values=u,
        f_values=fvals,
        residual_norm=res,
        iterations=iters,
        method=method,
        convexity_margin=margin,
    )


def _converged(res, weights, tol):
    """Raw max-norm at tol, or the row-scaled norm at tol when the raw norm
    sits on the floating-point floor of strongly clipped rows."""
    rnorm = float(np.max(np.abs(res)))
    if rnorm <= tol:
        return True, rnorm
    if rnorm <= 100.0 * tol and float(np.max(np.abs(res) / weights)) <= tol:
        return True, rnorm
    return False, rnorm


def _newton_stage(grid, u, fvals, kappa, tol, max_iter, history, eps,
                  weights=None):
    """Damped semismooth Newton on the (possibly eps-smoothed) scheme; the
    line search uses the l2 merit (the max-norm is only the stopping
    criterion, it is too kinked to damp on). Returns (u, iterations,
    converged)."""
    if weights is None:
        weights = grid.row_weights()
    u = u.copy()
    diffs = _second_differences(grid, u)
    val, amin = _scheme_value(grid, diffs, kappa, eps)
    res = val - fvals
    rnorm = float(np.max(np.abs(res)))
    merit = float(np.linalg.norm(res))
    stalls = 0
    for it in range(max_iter):
        history.append(rnorm)
        done, rnorm = _converged(res, weights, tol)
        if done:
            return u, it, True
        J = _scheme_jacobian(grid, diffs, amin, kappa, eps)
        du = spla.splu(J, permc_spec="COLAMD").solve(-res)
        if float(np.max(np.abs(du))) <= 1e-2 * tol * max(1.0, float(np.max(np.abs(u)))):
            # solution stopped moving: the residual sits on the fp floor of
            # data kinks or strongly clipped cells
            u = u + du
            return u, it + 1, True
        step = 1.0
        accepted = False
        for _ in range(30):
            u_try = u + step * du
            diffs_try = _second_differences(grid, u_try)
            val_try, amin_try = _scheme_value(grid, diffs_try, kappa, eps)
            r_try = val_try - fvals
            m_try = float(np.linalg.norm(r_try))
            if m_try < merit * (1.0 - 1e-4 * step) or m_try < tol:
                u, diffs, amin, res = u_try, diffs_try, amin_try, r_try
                merit = m_try
                rnorm = float(np.max(np.abs(res)))
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # active-set kink: take a short fixed step and keep going
            stalls += 1
            if stalls > 8:
                return u, it, False
            u = u + 0.02 * du
            diffs = _second_differences(grid, u)
            val, amin = _scheme_value(grid, diffs, kappa, eps)
            res = val - fvals
            merit = float(np.linalg.norm(res))
            rnorm = float(np.max(np.abs(res)))
    done, rnorm = _converged(res, weights, tol)
    return u, max_iter, done


# Smoothing continuation used when plain Newton makes no quick progress
# (strongly sheared solutions move the active pairs across the whole grid).
_EPS_SCHEDULE = (1.0, 0.1, 0.01, 1e-3)


def _newton_solve(grid, u, fvals, kappa, tol, max_iter, history):
    u, it0, ok = _newton_stage(grid, u, fvals, kappa, tol, 12, history, eps=0.0)
    total = it0
    if not ok:
        fscale = float(np.max(fvals))
        for eps in _EPS_SCHEDULE:
            eps_s = eps * fscale
            u, its, _ = _newton_stage(
                grid, u, fvals, kappa, max(tol, 1e-2 * eps_s), max_iter, history,
                eps=eps_s,
            )
            total += its
        u, its, ok = _newton_stage(
            grid, u, fvals, kappa, tol, max_iter, history, eps=0.0
        )
        total += its
    if not ok:
        raise ConvergenceError(
            f"newton did not reach tol={tol:.3e}, residual {history[-1]:.3e}",
            history,
        )
    return u, total


def _gauss_seidel_solve(grid, u, fvals, kappa, tol, history, omega: float = 1.0):
    u = u.copy()
    uij = grid.unknown_ij
    colors = (uij[:, 0] % 4) * 4 + (uij[:, 1] % 4)
    groups = [np.flatnonzero(colors == c) for c in range(16)]
    arms = grid.arms
    for sweep in range(MAX_SWEEPS):
        for idx in groups:
            if len(idx) == 0:
                continue
            a_d = np.empty((len(arms), len(idx)))
            c_d = np.empty_like(a_d)
            for a, arm in enumerate(arms):
                up = np.where(arm.jp[idx] >= 0, u[arm.jp[idx]], arm.vp[idx])
                um = np.where(arm.jm[idx] >= 0, u[arm.jm[idx]], arm.vm[idx])
                a_d[a] = arm.cp[idx] * up + arm.cm[idx] * um
                c_d[a] = arm.c0[idx]
            t = u[idx].copy()
            for _ in range(3):
                diffs = a_d - c_d * t[None, :]
                pos = np.maximum(diffs, 0.0)
                best = None
                gi = np.zeros_like(diffs)
                bestpair = None
                for p, (i, j, w) in enumerate(grid.pairs):
                    vv = w * pos[i] * pos[j]
                    if best is None:
                        best = vv.copy()
                        bestpair = np.zeros(len(vv), dtype=np.int32)
                    else:
                        upd = vv < best
                        best[upd] = vv[upd]
                        bestpair[upd] = p
                m = best + kappa * np.minimum(diffs, 0.0).sum(axis=0)
                for p, (i, j, w) in enumerate(grid.pairs):
                    mask = bestpair == p
                    gi[i, mask] += w * (diffs[i, mask] > 0) * pos[j, mask]
                    gi[j, mask] += w * (diffs[j, mask] > 0) * pos[i, mask]
                gi += kappa * (diffs < 0.0)
                deriv = -(gi * c_d).sum(axis=0)
                deriv = np.minimum(deriv, -1e-30)
                dt = np.clip((fvals[idx] - m) / deriv, -10 * grid.delta, 10 * grid.delta)
                t = t + dt
            u[idx] = (1.0 - omega) * u[idx] + omega * t
        diffs = _second_differences(grid, u)
        val, _ = _scheme_value(grid, diffs, kappa)
        res = val - fvals
        done, rnorm = _converged(res, grid.row_weights(), tol)
        history.append(rnorm)
        if done:
            return u, sweep + 1
    raise ConvergenceError(
        f"gauss-seidel did not reach tol={tol:.3e} in {MAX_SWEEPS} sweeps "
        f"(last residual {history[-1]:.3e})",
        history,
    )


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class CompareVerdict:
    applicable: bool
    max_violation: float
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.applicable and self.max_violation <= CONVEXITY_TOL


def comparison_check(u: Field, v: Field) -> CompareVerdict:
    """Discrete comparison: with det-ordering f_u >= f_v nodewise and u <= v
    on the boundary data, assert u <= v at all nodes."""
    if u.grid is not v.grid and (
        u.grid.shape != v.grid.shape or u.grid.delta != v.grid.delta
    ):
        return CompareVerdict(False, np.nan, "different grids")
    if np.any(u.f_values < v.f_values - 1e-12):
        return CompareVerdict(False, np.nan, "f ordering violated")
    for au, av in zip(u.grid.arms, v.grid.arms):
        bu = np.concatenate([au.vp[au.jp < 0], au.vm[au.jm < 0]])
        bv = np.concatenate([av.vp[av.jp < 0], av.vm[av.jm < 0]])
        if np.any(bu > bv + 1e-12):
            return CompareVerdict(False, np.nan, "boundary ordering violated")
    viol = float(np.max(u.values - v.values))
    return CompareVerdict(True, viol)


@dataclass(frozen=True)
class AlexandrovResult:
    applicable: bool
    c_fit: float
    classical_bound: float
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.applicable and self.c_fit <= self.classical_bound


def alexandrov_check(u: Field, l: Callable) -> AlexandrovResult:
    """Smallest C with u - l >= -C d^{1/n} (d = boundary distance), compared
    against a conservative classical constant C(n) (Lambda |Omega|)^{1/n}
    diam^{(n-1)/n}."""
    g = u.grid
    n = 2
    bpts = g.domain.boundary
    lb = np.asarray(l(bpts), float)
    bvals = g.envelope.values
    if np.any(lb > bvals + 1e-9 * max(1.0, float(np.max(np.abs(bvals))))):
        return AlexandrovResult(False, np.nan, np.nan, "l exceeds u on the boundary")
    lvals = np.asarray(l(g.unknown_xy), float)
    deficit = np.maximum(lvals - u.values, 0.0)
    d = np.maximum(g.domain.distance_to_boundary(g.unknown_xy), 1e-30)
    c_fit = float(np.max(deficit / d ** (1.0 / n)))
    vol = g.domain.volume()
    diam = g.domain.diameter()
    classical = (
        2.0**n / unit_ball_volume(n) ** (1.0 / n)
        * (g.spec.Lam * vol) ** (1.0 / n)
        * diam ** ((n - 1.0) / n)
    )
    return AlexandrovResult(True, c_fit, float(classical))


# ---------------------------------------------------------------------------
# exact oracles and synthetic fields


def exact_oracle(name: str, **params) -> SimpleNamespace:
    """Evaluable (u, f, phi) triples with det D^2 u = f identically.

    names: isotropic, anisotropic (a), slid (nu), radial-power (p, center),
    perturbed (sigma, alpha; u backed by a fine reference solve).
    """
    if name == "isotropic":
        def u(x):
            x = np.atleast_2d(x)
            return 0.5 * np.sum(x * x, axis=1)

        H = np.eye(2)
        return SimpleNamespace(
            u=u, f=lambda x: np.ones(len(np.atleast_2d(x))), phi=u,
            hessian=H, grad=lambda x: np.atleast_2d(x).copy(), name=name,
        )
    if name == "anisotropic":
        a = float(params.get("a", 4.0))

        def u(x):
            x = np.atleast_2d(x)
            return 0.5 * (a * x[:, 0] ** 2 + x[:, 1] ** 2 / a)

        H = np.diag([a, 1.0 / a])
        return SimpleNamespace(
            u=u, f=lambda x: np.ones(len(np.atleast_2d(x))), phi=u,
            hessian=H, grad=lambda x: np.atleast_2d(x) * np.array([a, 1.0 / a]),
            name=name,
        )
    if name == "slid":
        nu = float(params.get("nu", 1.0))

        def u(x):
            x = np.atleast_2d(x)
            s = x[:, 0] + nu * x[:, 1]
            return 0.5 * (s * s + x[:, 1] ** 2)

        H = np.array([[1.0, nu], [nu, nu * nu + 1.0]])
        return SimpleNamespace(
            u=u, f=lambda x: np.ones(len(np.atleast_2d(x))), phi=u,
            hessian=H, nu=nu, name=name,
        )
    if name == "radial-power":
        p = float(params.get("p", 3.0))
        y0 = np.asarray(params.get("center", (0.0, -1.0)), float)
        if p <= 1.0:
            raise GridError("radial-power needs p > 1")

        def u(x):
            r = np.linalg.norm(np.atleast_2d(x) - y0, axis=1)
            return r**p / p

        def f(x):
            r = np.linalg.norm(np.atleast_2d(x) - y0, axis=1)
            return (p - 1.0) * r ** (2.0 * p - 4.0)

        return SimpleNamespace(u=u, f=f, phi=u, center=y0, p=p, name=name)
    if name == "perturbed":
        sigma = float(params.get("sigma", 0.5))
        alpha = float(params.get("alpha", 0.5))

        def f(x):
            x = np.atleast_2d(x)
            return 1.0 + sigma * np.sum(x * x, axis=1) ** (alpha / 2.0)

        def phi(x):
            x = np.atleast_2d(x)
            return 0.5 * np.sum(x * x, axis=1)

        ref = {}

        def u(x, _ref=ref, **kw):
            if "field" not in _ref:
                dom = params.get("domain") or dom_mod.make_domain("half-disk")
                delta_ref = float(params.get("delta_ref", 1.0 / 128.0))
                spec = ProblemSpec(
                    domain=dom,
                    phi=BoundaryFunction.from_callable(dom, phi),
                    f=f, lam=1.0, Lam=1.0 + sigma * dom.r_out**alpha,
                    alpha=alpha, M=sigma,
                )
                grid = discretize(spec, delta_ref)
                _ref["field"] = solve_dirichlet(grid)
            return _ref["field"].evaluate(x)

        return SimpleNamespace(u=u, f=f, phi=phi, sigma=sigma, alpha=alpha, name=name)
    raise GridError(f"unknown oracle {name!r}")


def spec_from_oracle(dom: ConvexDomain, oracle, lam=None, Lam=None,
                     alpha: float = 0.5, M: float = 0.0) -> ProblemSpec:
    """ProblemSpec with boundary data and right side taken from an oracle."""
    fb = oracle.f(dom.boundary)
    fi = oracle.f(dom.boundary * 0.5)
    lam = float(min(fb.min(), fi.min())) if lam is None else lam
    Lam = float(max(fb.max(), fi.max())) if Lam is None else Lam
    return ProblemSpec(
        domain=dom,
        phi=BoundaryFunction.from_callable(dom, oracle.phi),
        f=oracle.f,
        lam=lam,
        Lam=Lam,
        alpha=alpha,
        M=M,
    )


def field_from_callable(spec: ProblemSpec, delta: float, u_fn: Callable,
                        stencil_width: int = 2) -> Field:
    """Sample an analytic function into a Field (no solve); used to feed the
    section and regularity machinery with exactly known inputs."""
    grid = discretize(spec, delta, stencil_width)
    u = np.asarray(u_fn(grid.unknown_xy), float)
    fvals = np.asarray(spec.f(grid.unknown_xy), float)
    diffs = _second_differences(grid, u)
    return Field(
        grid=grid, values=u, f_values=fvals, residual_norm=np.nan,
        iterations=0, method="analytic",
        convexity_margin=float(np.min(diffs) * delta**2),
    )


def boundary_envelope_gap(field: Field) -> float:
    """min over nodes of (discrete convex envelope of the field's own
    boundary values) minus u. Convexity of u forces u(x) <= sum lam_i phi(x_i)
    for every boundary combination x = sum lam_i x_i, so the gap is >= 0 up
    to tolerance for any convex field."""
    g = field.grid
    env_at_nodes = dom_mod._lower_hull_values_query(
        g.domain.boundary, g.envelope.values, g.unknown_xy
    )
    return float(np.min(env_at_nodes - field.values))
