"""Pointwise boundary regularity measurements.

The quantitative content of second-order boundary regularity is the decay of
best-quadratic sup-norm residuals R(r) = sup_{B_r} |u - l - P| across dyadic
scales: a slope 2 + alpha of log R against log r is a pointwise C^{2,alpha}
certificate. This module measures tangent planes, fits per-scale quadratic
models (sup-norm refined), rescales sections to unit size, and bounds second
and third derivatives in the flat-boundary model region.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np

from .domain import BoundaryFunction, ConvexDomain, ProblemSpec
from .sections import SlidingMap, localization_constants, section
from .solver import Field, discretize
from ._geometry import convex_hull_2d

SUPPORT_TOL = 1e-6
MIN_FIT_NODES = 30
LAWSON_ROUNDS = 5


class RegularityError(RuntimeError):
    pass


class SupportError(RegularityError):
    pass


@dataclass(frozen=True)
class QuadraticModel:
    """l(x) + P(x) with l = value + p.(x - x0), P = (x - x0)' H (x - x0) / 2."""

    x0: np.ndarray
    value: float
    p: np.ndarray
    H: np.ndarray
    meta: dict = dfield(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.H, float)
        if not np.allclose(H, H.T, atol=0.0):
            raise RegularityError("Hessian of a quadratic model must be symmetric")

    @property
    def gamma(self) -> float:
        """Normal component of the slope."""
        return float(self.p[-1])

    def det_hessian(self) -> float:
        return float(np.linalg.det(self.H))

    def hessian_norm(self) -> float:
        return float(np.linalg.norm(self.H, 2))

    def affine(self, pts) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.x0
        return self.value + rel @ self.p

    def __call__(self, pts) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.x0
        return self.value + rel @ self.p + 0.5 * np.einsum(
            "pi,ij,pj->p", rel, self.H, rel
        )

    def unimodular(self, f0: float) -> "QuadraticModel":
        """Adjust the normal-normal entry so det H = f0 (the paper-style
        normalization of the limit model)."""
        H = self.H.copy()
        cof = H[0, 0]
        if abs(cof) < 1e-14:
            raise RegularityError("cannot renormalize: vanishing tangential entry")
        H[-1, -1] += (f0 - np.linalg.det(H)) / cof
        return QuadraticModel(self.x0, self.value, self.p.copy(), H,
                              dict(self.meta, unimodular=True))


# ---------------------------------------------------------------------------
# tangent plane


def tangent_plane(field: Field, x0) -> QuadraticModel:
    """Supporting plane of the solution at the (normalized) origin.

    Tangential slope comes from the boundary data along the chain; the normal
    slope is the inner-normal difference quotient extrapolated over
    t in {2 delta, 4 delta, 8 delta} (two-level Richardson, the error
    estimate is recorded in meta). The result must support the field:
    min(u - l) >= -1e-6 * scale."""
    g = field.grid
    x0 = np.asarray(x0, float)
    if np.linalg.norm(x0) > 1e-9 * max(1.0, g.domain.r_out):
        raise RegularityError("tangent planes are taken at the normalized origin")
    chain = g.domain.boundary
    bvals = g.envelope.values
    r = np.linalg.norm(chain, axis=1)
    i0 = int(np.argmin(r))
    value0 = float(bvals[i0])

    w = max(4 * field.delta, 4 * np.partition(r, 4)[4])
    near = (r <= w) & (np.abs(chain[:, 0]) > 1e-14)
    if np.count_nonzero(near) >= 2:
        A = chain[near, 0][:, None]
        slope_t, *_ = np.linalg.lstsq(A, bvals[near] - value0, rcond=None)
        p_t = float(slope_t[0])
    else:
        p_t = 0.0

    d = field.delta

    def ray_quotient(t):
        return (float(field.evaluate(np.array([[0.0, t]]))[0]) - value0) / t

    g2, g4, g8 = ray_quotient(2 * d), ray_quotient(4 * d), ray_quotient(8 * d)
    gamma = 2.0 * g2 - g4
    gamma_err = abs(gamma - (2.0 * g4 - g8))

    model = QuadraticModel(
        x0=np.zeros(2),
        value=value0,
        p=np.array([p_t, gamma]),
        H=np.zeros((2, 2)),
        meta={"gamma_error": gamma_err, "quotients": (g2, g4, g8)},
    )
    deficit = float(np.min(field.values - model.affine(g.unknown_xy)))
    scale = field.scale_of_u()
    if deficit < -SUPPORT_TOL * scale:
        raise SupportError(
            f"plane fails to support the solution by {-deficit:.3e} "
            f"(> {SUPPORT_TOL:g} * scale): solution insufficiently resolved "
            "near the base point"
        )
    return model


# ---------------------------------------------------------------------------
# quadratic fitting


def _boundary_expansion(field: Field, r: float):
    """Quadratic fits of the boundary chart x_n = q(x') and of the boundary
    data near the origin: returns (p1, p2, q2) with
    data ~ value0 + p1 x' + p2 x'^2 / 2, chart ~ q2 x'^2 / 2."""
    g = field.grid
    chain = g.domain.boundary
    bvals = g.envelope.values
    rr = np.linalg.norm(chain, axis=1)
    w = max(min(r, g.domain.rho / 2), 6 * field.delta)
    near = rr <= w
    x1 = chain[near, 0]
    xn = chain[near, 1]
    v = bvals[near]
    i0 = int(np.argmin(rr))
    v0 = float(bvals[i0])
    A = np.column_stack([x1, 0.5 * x1**2])
    coef, *_ = np.linalg.lstsq(A, v - v0, rcond=None)
    qcoef, *_ = np.linalg.lstsq((0.5 * x1**2)[:, None], xn, rcond=None)
    return v0, float(coef[0]), float(coef[1]), float(qcoef[0])


def _fit_points(field: Field, r: float):
    """Fit points in B_r, Omega-closure: interior unknowns plus on-boundary
    grid nodes (which carry exact data values)."""
    g = field.grid
    xy = g.unknown_xy
    sel = np.linalg.norm(xy, axis=1) <= r
    pts = [xy[sel]]
    vals = [field.values[sel]]
    bmask = g.status == 3
    if np.any(bmask):
        bij = np.column_stack(np.nonzero(bmask))
        bxy = np.stack(
            [(bij[:, 0] + g.i0) * g.delta, (bij[:, 1] + g.j0) * g.delta], axis=1
        )
        bsel = np.linalg.norm(bxy, axis=1) <= r
        if np.any(bsel):
            pts.append(bxy[bsel])
            vals.append(g.dirichlet_values[bij[bsel, 0], bij[bsel, 1]])
    return np.vstack(pts), np.concatenate(vals)


def fit_quadratic(field: Field, x0, r: float, constraint: str = "free",
                  tangent: Optional[QuadraticModel] = None):
    """Best quadratic model of the solution on B_r, sup norm.

    constraint "free": all five coefficients open (Lawson-reweighted least
    squares approximating the minimax).

    constraint "boundary-matched": the model class of the improvement
    iteration. The tangential part is pinned to the boundary-data expansion
    (p1 and H11 follow from the data and chart fits, coupled linearly to the
    normal slope) and the normal-normal coefficient is eliminated by the
    determinant normalization det H = f(x0); the two remaining parameters
    (normal slope, mixed entry) minimize the sup residual directly.

    Returns (QuadraticModel, sup_residual)."""
    pts, uv = _fit_points(field, r)
    if len(pts) < MIN_FIT_NODES:
        raise RegularityError(
            f"underdetermined fit: {len(pts)} nodes in B_{r:g}"
        )
    x1, x2 = pts[:, 0], pts[:, 1]
    g = field.grid

    if constraint == "free":
        chain = g.domain.boundary
        i0 = int(np.argmin(np.linalg.norm(chain, axis=1)))
        v0 = float(g.envelope.values[i0])
        target = uv - v0
        cols = np.column_stack([x1, x2, 0.5 * x1**2, x1 * x2, 0.5 * x2**2])
        wts = np.ones(len(target))
        coef = None
        for _ in range(1 + LAWSON_ROUNDS):
            Ws = np.sqrt(wts)[:, None]
            coef, *_ = np.linalg.lstsq(cols * Ws, target * Ws[:, 0], rcond=None)
            res = target - cols @ coef
            wts = wts * (np.abs(res) + 1e-15)
            wts /= wts.sum()
        p1, gam, h11, h12, h22 = coef
        model = QuadraticModel(
            np.zeros(2), v0, np.array([p1, gam]),
            np.array([[h11, h12], [h12, h22]]),
        )
        return model, float(np.max(np.abs(target - cols @ coef)))

    if constraint != "boundary-matched":
        raise RegularityError(f"unknown constraint {constraint!r}")

    v0, p1b, p2b, q2 = _boundary_expansion(field, r)
    f0 = float(np.asarray(g.spec.f(np.zeros((1, 2))), float)[0])
    base = uv - v0 - p1b * x1

    def assemble(gam, h12):
        h11 = p2b - gam * q2
        if h11 <= 1e-12:
            return None
        h22 = (f0 + h12 * h12) / h11
        return h11, h22

    def residual_of(params):
        gam, h12 = params
        hh = assemble(gam, h12)
        if hh is None:
            return 1e300
        h11, h22 = hh
        res = base - gam * x2 - 0.5 * h11 * x1**2 - h12 * x1 * x2 \
            - 0.5 * h22 * x2**2
        return float(np.max(np.abs(res)))

    # linear least-squares warm start with h22 free, then direct sup-norm
    # minimization over the two genuinely free parameters
    cols = np.column_stack([x2 - 0.5 * q2 * x1**2, x1 * x2, 0.5 * x2**2])
    coef, *_ = np.linalg.lstsq(cols, base - 0.5 * p2b * x1**2, rcond=None)
    from scipy.optimize import minimize

    start = np.array([coef[0], coef[1]])
    opt = minimize(
        residual_of, start, method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
    )
    gam, h12 = opt.x
    h11, h22 = assemble(gam, h12)
    model = QuadraticModel(
        np.zeros(2), v0, np.array([p1b, gam]),
        np.array([[h11, h12], [h12, h22]]),
        meta={"unimodular": True, "f0": f0},
    )
    return model, float(opt.fun)


# ---------------------------------------------------------------------------
# exponent measurement


@dataclass(frozen=True)
class RegularityReport:
    scales: np.ndarray
    residuals: np.ndarray
    gammas: np.ndarray
    hessians: np.ndarray
    slope: float
    alpha_est: float
    c_est: float
    gamma_drift: np.ndarray
    hessian_drift: np.ndarray
    low_confidence: bool
    constraint: str

    def as_text(self) -> str:
        """key: value lines, then a CSV block of per-scale residuals."""
        lines = [
            f"slope: {self.slope!r}",
            f"alpha_est: {self.alpha_est!r}",
            f"c_est: {self.c_est!r}",
            f"low_confidence: {self.low_confidence}",
            f"constraint: {self.constraint}",
            f"scales: {len(self.scales)}",
            "",
            "r,residual,gamma,hessian_norm",
        ]
        for i, r in enumerate(self.scales):
            hn = float(np.linalg.norm(self.hessians[i], 2))
            lines.append(f"{r!r},{self.residuals[i]!r},{self.gammas[i]!r},{hn!r}")
        return "\n".join(lines) + "\n"


def _floor_anchored_scales(field: Field, n: int, ratio: float):
    """The n finest resolvable scales, geometric with the given ratio."""
    lo = 2.0 * field.delta
    hi = field.domain.rho
    r = lo
    while r < hi:
        if len(_fit_points(field, r)[0]) >= MIN_FIT_NODES:
            break
        r *= 1.05
    return [r * ratio**k for k in range(n - 1, -1, -1)]


def c2alpha_exponent(field: Field, x0, r0: float = 0.5, m_max: int = 8,
                     constraint: str = "boundary-matched",
                     min_scales: int = 5, ladder: str = "power") -> RegularityReport:
    """Fit per-scale best quadratics and regress the sup-residual decay:
    slope s gives alpha_est = s - 2. Re-fitting per scale mirrors the
    standard improvement iteration; the model drift across scales is recorded
    (it should decay like the residual ratio).

    ladder "power" uses r = r0^m, m = 1..m_max above the resolution floor;
    ladder "floor" anchors min_scales geometric scales (ratio 4/3) at the
    floor, reading the finest resolved regime (the exponent is an r -> 0
    limit, so coarse scales carry pre-asymptotic bias)."""
    if ladder == "floor":
        rs = _floor_anchored_scales(field, max(min_scales, 5), 4.0 / 3.0)
    elif ladder == "power":
        rs = [r0**m for m in range(1, m_max + 1)]
    else:
        raise RegularityError(f"unknown ladder mode {ladder!r}")
    scales, residuals, gammas, hessians = [], [], [], []
    for r in rs:
        try:
            model, res = fit_quadratic(field, x0, r, constraint)
        except RegularityError:
            continue
        scales.append(r)
        residuals.append(res)
        gammas.append(model.gamma)
        hessians.append(model.H)
    if len(scales) < 2:
        raise RegularityError("no usable scales above the resolution floor")
    scales_a = np.asarray(scales)
    res_a = np.asarray(residuals)
    slope = float(np.polyfit(np.log(scales_a), np.log(np.maximum(res_a, 1e-300)), 1)[0])
    c_est = float(np.max(res_a / scales_a**slope))
    gam_a = np.asarray(gammas)
    hes_a = np.asarray(hessians)
    gdrift = np.abs(np.diff(gam_a))
    hdrift = np.array(
        [np.linalg.norm(hes_a[i + 1] - hes_a[i], 2) for i in range(len(hes_a) - 1)]
    )
    low = len(scales) < min_scales or bool(np.any(np.diff(res_a) > 0.0))
    return RegularityReport(
        scales=scales_a,
        residuals=res_a,
        gammas=gam_a,
        hessians=hes_a,
        slope=slope,
        alpha_est=slope - 2.0,
        c_est=c_est,
        gamma_drift=gdrift,
        hessian_drift=hdrift,
        low_confidence=low,
        constraint=constraint,
    )


# ---------------------------------------------------------------------------
# rescaling a section to unit size


@dataclass(frozen=True)
class RescaledSection:
    field: Field
    h: float
    slide: SlidingMap
    scale: float
    k_in: float
    k_out: float

    def holder_seminorm(self, alpha: float) -> float:
        """sup |f_h - f_h(0)| / |x|^alpha over the rescaled grid nodes."""
        xy = self.field.grid.unknown_xy
        fv = self.field.f_values
        f0 = fv[int(np.argmin(np.linalg.norm(xy, axis=1)))]
        r = np.linalg.norm(xy, axis=1)
        m = r > 1e-12
        return float(np.max(np.abs(fv[m] - f0) / r[m] ** alpha))


def rescale_section(field: Field, x0, h: float, tangent=None,
                    delta_new: Optional[float] = None) -> RescaledSection:
    """u_h(y) = (u - l)(sqrt(h) A^{-1} y) / h on a unit-scale grid over the
    slid, normalized section: the level-1 section of u_h is the normalized
    image of the level-h section, the right side is f(sqrt(h) A^{-1} y)."""
    loc = localization_constants(field, x0, h, tangent)
    amap = SlidingMap(loc.nu)
    s = np.sqrt(h)
    St = loc.slid_section
    hull1 = St.hull / s

    # synthetic domain for the unit section, exact polygon kernel
    from .domain import _PolygonKernel, _inscribed_tangent_ball_radius

    hull1 = convex_hull_2d(hull1)
    kernel1 = _PolygonKernel(hull1)
    rho_in = _inscribed_tangent_ball_radius(hull1, kernel1)
    r_out = float(np.linalg.norm(hull1, axis=1).max())
    dom2 = ConvexDomain(
        dimension=2, boundary=_upsample_loop(hull1, 512), rho_in=rho_in,
        r_out=r_out, rho=min(rho_in, 1.0 / r_out),
        kernel=kernel1, kind="rescaled-section",
    )

    def u_h(y):
        y = np.atleast_2d(y)
        x = amap.inverse().apply(y) * s
        base = field.evaluate(x)
        if tangent is not None:
            base = base - np.asarray(tangent(x), float)
        return base / h

    phi2 = BoundaryFunction.from_callable(dom2, u_h)
    f_base = field.grid.spec.f

    def f2(y):
        y = np.atleast_2d(y)
        return np.asarray(f_base(amap.inverse().apply(y) * s), float)

    spec2 = ProblemSpec(
        domain=dom2, phi=phi2, f=f2,
        lam=field.grid.spec.lam, Lam=field.grid.spec.Lam,
        alpha=field.grid.spec.alpha, M=field.grid.spec.M,
    )
    if delta_new is None:
        delta_new = min(field.delta / s, dom2.rho / 8.0)
    grid2 = discretize(spec2, delta_new, field.grid.stencil_width)
    vals = u_h(grid2.unknown_xy)
    from .solver import _second_differences

    f2v = f2(grid2.unknown_xy)
    fld2 = Field(
        grid=grid2, values=vals, f_values=f2v, residual_norm=np.nan,
        iterations=0, method="rescaled",
        convexity_margin=float(
            np.min(_second_differences(grid2, vals)) * delta_new**2
        ),
    )
    return RescaledSection(
        field=fld2, h=float(h), slide=amap, scale=float(s),
        k_in=loc.k_in, k_out=loc.k_out,
    )


def _upsample_loop(verts: np.ndarray, n: int) -> np.ndarray:
    seg = np.roll(verts, -1, axis=0) - verts
    lens = np.linalg.norm(seg, axis=1)
    per = lens.sum()
    pts = []
    for i in range(len(verts)):
        k = max(1, int(round(n * lens[i] / per)))
        t = np.arange(k) / k
        pts.append(verts[i] + t[:, None] * seg[i])
    return np.vstack(pts)


# ---------------------------------------------------------------------------
# flat-boundary region derivative statistics


@dataclass(frozen=True)
class PogorelovStats:
    applicable: bool
    reason: str = ""
    k: float = np.nan
    region_nodes: int = 0
    eig_min: float = np.nan
    eig_max: float = np.nan
    functional_max: float = np.nan
    functional_argmax: Optional[np.ndarray] = None
    functional_at_interior: bool = False
    third_derivative_bound: float = np.nan
    data_pinch: float = np.nan


def pogorelov_region_bounds(field: Field, k: float, c0: Optional[float] = None
                            ) -> PogorelovStats:
    """Second-derivative statistics on the sublevel region {u < k^2/16} of a
    flat-boundary model problem (f = 1, quadratic data pinch on the flat
    part): discrete Hessian eigenvalue range, the maximum of
    log(k^2/4 - u) + log u_ii + u_i^2/2 over {u < k^2/4} with its location,
    and a five-point third-derivative bound on B^+_{c0}."""
    g = field.grid
    if np.max(np.abs(field.f_values - 1.0)) > 1e-6:
        return PogorelovStats(False, "right side is not identically 1")
    chain = g.domain.boundary
    flat = np.abs(chain[:, 1]) <= 1e-9 * max(1.0, g.domain.r_out)
    if np.count_nonzero(flat) < 8:
        return PogorelovStats(False, "no flat boundary part at x_n = 0")
    x1 = chain[flat, 0]
    pv = g.envelope.values[flat]
    m = np.abs(x1) > 1e-9
    ratios = pv[m] / x1[m] ** 2
    if np.min(ratios) <= 1e-12:
        return PogorelovStats(False, "boundary data lacks a quadratic pinch")
    pinch = float(min(np.min(ratios), 1.0 / np.max(ratios)))

    if c0 is None:
        c0 = k / 4.0
    V = field.full_array()
    d2 = field.delta**2
    nx, ny = g.shape
    region = np.zeros((nx, ny), bool)
    uij = g.unknown_ij
    region[uij[:, 0], uij[:, 1]] = field.values < k**2 / 16.0
    fregion = np.zeros((nx, ny), bool)
    fregion[uij[:, 0], uij[:, 1]] = field.values < k**2 / 4.0

    # core nodes: centered stencils stay in the region
    def erode(mask):
        c = mask.copy()
        c[1:-1, :] &= mask[2:, :] & mask[:-2, :]
        c[:, 1:-1] &= mask[:, 2:] & mask[:, :-2]
        c[[0, -1], :] = False
        c[:, [0, -1]] = False
        c[1:-1, 1:-1] &= (
            mask[2:, 2:] & mask[2:, :-2] & mask[:-2, 2:] & mask[:-2, :-2]
        )
        return c

    core = erode(region)
    if np.count_nonzero(core) < 8:
        return PogorelovStats(False, "region too small for Hessian statistics")
    I, J = np.nonzero(core)
    uxx = (V[I + 1, J] + V[I - 1, J] - 2 * V[I, J]) / d2
    uyy = (V[I, J + 1] + V[I, J - 1] - 2 * V[I, J]) / d2
    uxy = (V[I + 1, J + 1] + V[I - 1, J - 1] - V[I + 1, J - 1] - V[I - 1, J + 1]) / (
        4 * d2
    )
    tr = uxx + uyy
    disc = np.sqrt(np.maximum((uxx - uyy) ** 2 + 4 * uxy**2, 0.0))
    eig_min = float(np.min((tr - disc) / 2))
    eig_max = float(np.max((tr + disc) / 2))

    # the monitored expression, per coordinate, on the larger sublevel set
    fcore = erode(fregion)
    If, Jf = np.nonzero(fcore)
    dd = 2 * field.delta
    ux = (V[If + 1, Jf] - V[If - 1, Jf]) / dd
    uy = (V[If, Jf + 1] - V[If, Jf - 1]) / dd
    uxx_f = (V[If + 1, Jf] + V[If - 1, Jf] - 2 * V[If, Jf]) / d2
    uyy_f = (V[If, Jf + 1] + V[If, Jf - 1] - 2 * V[If, Jf]) / d2
    cap = k**2 / 4.0 - V[If, Jf]
    ok = cap > 0
    func = np.full(len(If), -np.inf)
    for uii, ui in ((uxx_f, ux), (uyy_f, uy)):
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = np.log(cap) + np.log(np.maximum(uii, 1e-300)) + 0.5 * ui**2
        cand[~ok] = -np.inf
        func = np.maximum(func, cand)
    imax = int(np.argmax(func))
    arg = np.array([(If[imax] + g.i0) * field.delta, (Jf[imax] + g.j0) * field.delta])
    inner = erode(fcore)
    at_interior = bool(inner[If[imax], Jf[imax]])

    # third differences on B^+_{c0}
    core2 = erode(core)
    I2, J2 = np.nonzero(core2)
    xy2 = np.stack([(I2 + g.i0) * field.delta, (J2 + g.j0) * field.delta], axis=1)
    inb = np.linalg.norm(xy2, axis=1) <= c0
    I2, J2 = I2[inb], J2[inb]
    third = np.nan
    if len(I2) >= 4:
        d3 = 2 * field.delta**3
        uxxx = (V[I2 + 2, J2] - 2 * V[I2 + 1, J2] + 2 * V[I2 - 1, J2] - V[I2 - 2, J2]) / d3
        uyyy = (V[I2, J2 + 2] - 2 * V[I2, J2 + 1] + 2 * V[I2, J2 - 1] - V[I2, J2 - 2]) / d3
        uxxy = (
            (V[I2 + 1, J2 + 1] + V[I2 - 1, J2 + 1] - 2 * V[I2, J2 + 1])
            - (V[I2 + 1, J2 - 1] + V[I2 - 1, J2 - 1] - 2 * V[I2, J2 - 1])
        ) / (2 * field.delta**3)
        uxyy = (
            (V[I2 + 1, J2 + 1] + V[I2 + 1, J2 - 1] - 2 * V[I2 + 1, J2])
            - (V[I2 - 1, J2 + 1] + V[I2 - 1, J2 - 1] - 2 * V[I2 - 1, J2])
        ) / (2 * field.delta**3)
        third = float(
            max(np.max(np.abs(t)) for t in (uxxx, uyyy, uxxy, uxyy))
        )

    return PogorelovStats(
        applicable=True,
        k=float(k),
        region_nodes=int(np.count_nonzero(core)),
        eig_min=eig_min,
        eig_max=eig_max,
        functional_max=float(func[imax]),
        functional_argmax=arg,
        functional_at_interior=at_interior,
        third_derivative_bound=third,
        data_pinch=pinch,
    )


# ---------------------------------------------------------------------------
# determinant perturbation inequality


@dataclass(frozen=True)
class DetPerturbationVerdict:
    applicable: bool
    lhs: float
    rhs: float
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.applicable and self.lhs >= self.rhs


def det_perturbation_bound(A: np.ndarray, a: float) -> DetPerturbationVerdict:
    """det(A + aI) >= det A + a/4 for symmetric A >= 0 with det in [1/2, 2]
    and a >= 0 (an exact inequality; both sides are returned)."""
    A = np.asarray(A, float)
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T, atol=1e-12):
        return DetPerturbationVerdict(False, np.nan, np.nan, "not symmetric")
    if a < 0.0:
        return DetPerturbationVerdict(False, np.nan, np.nan, "a must be >= 0")
    ev = np.linalg.eigvalsh(A)
    if ev[0] < -1e-12:
        return DetPerturbationVerdict(False, np.nan, np.nan, "A not positive")
    detA = float(np.linalg.det(A))
    if not (0.5 <= detA <= 2.0):
        return DetPerturbationVerdict(False, np.nan, np.nan, "det A outside [1/2, 2]")
    lhs = float(np.linalg.det(A + a * np.eye(A.shape[0])))
    rhs = detA + a / 4.0
    return DetPerturbationVerdict(True, lhs, rhs)
