"""Boundary sections of a discrete solution and their normalized geometry.

A section at level h is the convex region where the solution sits below its
tangent plane at the distinguished boundary point raised by h. Everything the
localization analysis measures lives here: the sliding map that centers a
section, the maximum-volume inscribed ellipsoid, the normal-extent profile
b(h) = h^{-1/2} sup x_n, and the inclusion constants between sections and
volume-normalized ellipsoids.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ._geometry import (
    convex_hull_2d,
    point_in_convex_polygon,
    polygon_area,
    polygon_centroid,
    unit_ball_volume,
)
from .domain import BoundaryFunction, ConvexDomain, ProblemSpec
from .solver import Field, _second_differences, discretize

DEFAULT_LADDER = tuple(2.0 ** (-k) for k in range(2, 13))
SECTION_NODE_FLOOR = 50
KIN_BISECTION_TOL = 1e-3
ELLIPSE_BOUNDARY_SAMPLES = 720


class SectionError(ValueError):
    pass


class SectionResolutionError(SectionError):
    def __init__(self, h, h_min):
        super().__init__(
            f"section level h={h:.3g} below the grid resolution floor "
            f"(minimal resolvable h is about {h_min:.3g})"
        )
        self.h_min = h_min


@dataclass(frozen=True)
class SlidingMap:
    """Unimodular shear x -> x - nu * x_n fixing the plane {x_n = 0}."""

    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nu", np.atleast_1d(np.asarray(self.nu, float)))

    @property
    def dimension(self) -> int:
        return len(self.nu) + 1

    def matrix(self) -> np.ndarray:
        n = self.dimension
        A = np.eye(n)
        A[:-1, -1] = -self.nu
        return A

    def inverse(self) -> "SlidingMap":
        return SlidingMap(-self.nu)

    def apply(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, float))
        out = p.copy()
        out[:, :-1] -= np.outer(p[:, -1], self.nu)
        return out

    def det(self) -> float:
        return float(np.linalg.det(self.matrix()))


@dataclass(frozen=True)
class Ellipsoid:
    """{x : (x - center)' Q (x - center) <= 1} with Q symmetric positive."""

    center: np.ndarray
    Q: np.ndarray

    def dimension(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        n = self.dimension()
        return unit_ball_volume(n) / np.sqrt(np.linalg.det(self.Q))

    def semi_axes(self) -> np.ndarray:
        return np.sort(1.0 / np.sqrt(np.linalg.eigvalsh(self.Q)))[::-1]

    def gauge(self, pts) -> np.ndarray:
        """sqrt((x-c)' Q (x-c)): <= 1 inside, = k on the boundary of k*E."""
        rel = np.atleast_2d(pts) - self.center
        return np.sqrt(np.einsum("pi,ij,pj->p", rel, self.Q, rel))

    def contains(self, pts, k: float = 1.0):
        return self.gauge(pts) <= k

    def boundary_points(self, m: int = ELLIPSE_BOUNDARY_SAMPLES, k: float = 1.0):
        lam, V = np.linalg.eigh(self.Q)
        th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
        circ = np.stack([np.cos(th), np.sin(th)], axis=1)
        return self.center + k * circ / np.sqrt(lam) @ V.T

    def scaled_to_volume(self, target: float) -> "Ellipsoid":
        t = (target / self.volume()) ** (1.0 / self.dimension())
        return Ellipsoid(center=self.center, Q=self.Q / t**2)

    def recentred(self, c) -> "Ellipsoid":
        return Ellipsoid(center=np.asarray(c, float), Q=self.Q)

    def mapped_through(self, A: np.ndarray) -> "Ellipsoid":
        """Image under x -> A^{-1} x (so x in image iff A x in self)."""
        return Ellipsoid(center=np.linalg.solve(A, self.center), Q=A.T @ self.Q @ A)


@dataclass(frozen=True)
class Section:
    """Sublevel cloud {u < l + h} with its hull and mass data.

    points carries grid nodes below the level, level-crossing cut points on
    grid edges and clipped arms, and the piece of the domain boundary where
    the boundary data stays below the raised tangent plane.
    """

    h: float
    x0: np.ndarray
    points: np.ndarray
    values: np.ndarray
    hull: np.ndarray
    volume: float
    center_of_mass: np.ndarray
    n_grid_nodes: int
    domain: ConvexDomain
    slid_by: Optional[SlidingMap] = None

    def normal_extent(self) -> float:
        return float(self.hull[:, 1].max())

    def contains_x0_on_hull(self, tol: float = 1e-9) -> bool:
        inside = point_in_convex_polygon(self.x0, self.hull, tol=tol)
        strictly = point_in_convex_polygon(self.x0, self.hull, tol=-tol * 10)
        return bool(inside and not strictly)

    def slid(self, amap: SlidingMap) -> "Section":
        pts = amap.apply(self.points)
        hull = convex_hull_2d(pts)
        return replace(
            self,
            points=pts,
            hull=hull,
            volume=abs(polygon_area(hull)),
            center_of_mass=polygon_centroid(hull),
            slid_by=amap,
        )


def _tangent_values(tangent, pts):
    if tangent is None:
        return np.zeros(len(pts))
    return np.asarray(tangent(pts), float)


def section(field: Field, x0, h: float, tangent=None) -> Section:
    """Extract the section at level h above the tangent plane at x0 (the
    origin after normalization). Cut points on grid edges, clipped boundary
    arms and the boundary chain are located by linear interpolation."""
    if h <= 0.0:
        raise SectionError("section level must be positive")
    g = field.grid
    x0 = np.asarray(x0, float)
    if np.linalg.norm(x0) > 1e-9 * max(1.0, g.domain.r_out):
        raise SectionError("sections are taken at the normalized origin")

    uxy = g.unknown_xy
    lvals = _tangent_values(tangent, uxy)
    gv = field.values - lvals - h
    below = gv < 0.0
    n_nodes = int(np.count_nonzero(below))
    if n_nodes == 0:
        raise SectionResolutionError(h, h_min=2.0 * field.delta**2)

    pts = [uxy[below]]
    vals = [field.values[below]]

    def add_cuts(cpts):
        # cut points sit on the raised plane by construction
        pts.append(cpts)
        vals.append(_tangent_values(tangent, cpts) + h)

    # cut points along grid edges (axis and diagonal directions)
    for arm, d in zip(g.arms[:4], g.directions[:4]):
        for sgn, jarr, varr, tarr in (
            (+1, arm.jp, arm.vp, arm.tp),
            (-1, arm.jm, arm.vm, arm.tm),
        ):
            step = sgn * np.array(d, float) * field.delta
            linked = jarr >= 0
            ge = np.where(linked, gv[np.where(linked, jarr, 0)], 0.0)
            # linked edges with a sign change
            idx = np.flatnonzero(linked & below & (ge >= 0.0))
            if len(idx):
                t = gv[idx] / (gv[idx] - ge[idx])
                add_cuts(uxy[idx] + t[:, None] * step)
            # clipped arms: boundary value at the crossing
            idx = np.flatnonzero((~linked) & below)
            if len(idx):
                end = uxy[idx] + tarr[idx, None] * step
                gb = varr[idx] - _tangent_values(tangent, end) - h
                under = gb < 0.0
                if np.any(under):
                    pts.append(end[under])
                    vals.append(varr[idx][under])
                over = ~under
                if np.any(over):
                    t = gv[idx][over] / (gv[idx][over] - gb[over])
                    add_cuts(
                        uxy[idx][over] + (t * tarr[idx][over])[:, None] * step
                    )

    # boundary chain part where the data stays below the raised plane
    chain = g.domain.boundary
    bvals = g.envelope.values
    gb = bvals - _tangent_values(tangent, chain) - h
    on = gb < 0.0
    if np.any(on):
        pts.append(chain[on])
        vals.append(bvals[on])
        nxt = np.roll(gb, -1)
        flip = (gb < 0) != (nxt < 0)
        idx = np.flatnonzero(flip)
        if len(idx):
            nxt_pts = np.roll(chain, -1, axis=0)
            nxt_vals = np.roll(bvals, -1)
            t = gb[idx] / (gb[idx] - nxt[idx])
            pts.append(chain[idx] + t[:, None] * (nxt_pts[idx] - chain[idx]))
            vals.append((1 - t) * bvals[idx] + t * nxt_vals[idx])

    allpts = np.vstack(pts)
    allvals = np.concatenate(vals)
    hull = convex_hull_2d(allpts)
    if len(hull) < 3:
        raise SectionResolutionError(h, h_min=2.0 * field.delta**2)
    return Section(
        h=float(h),
        x0=x0,
        points=allpts,
        values=allvals,
        hull=hull,
        volume=abs(polygon_area(hull)),
        center_of_mass=polygon_centroid(hull),
        n_grid_nodes=n_nodes,
        domain=g.domain,
    )


def center_of_mass_slide(S: Section):
    """Shear the section so its center of mass lands on the x_n-axis; the
    shear vector follows from the mass center alone."""
    c = S.center_of_mass
    if c[-1] <= 0.0:
        raise SectionError("degenerate section: center of mass not above the base")
    nu = c[:-1] / c[-1]
    amap = SlidingMap(nu)
    return amap, S.slid(amap)


def _mvie_subproblem(normals, offsets):
    import cvxpy as cp
    import warnings as _warnings

    B = cp.Variable((2, 2), PSD=True)
    d = cp.Variable(2)
    cons = [
        cp.norm(B @ normals[i]) + normals[i] @ d <= offsets[i]
        for i in range(len(normals))
    ]
    prob = cp.Problem(cp.Maximize(cp.log_det(B)), cons)
    with _warnings.catch_warnings():
        _warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        attempts = (
            (cp.CLARABEL, dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11,
                               tol_feas=1e-11)),
            (cp.CLARABEL, {}),
            (cp.SCS, dict(eps=1e-9, max_iters=100000)),
        )
        status = "not_attempted"
        for solver, opts in attempts:
            try:
                prob.solve(solver=solver, **opts)
                status = prob.status
            except cp.error.SolverError:
                status = "solver_error"
                continue
            if status in ("optimal", "optimal_inaccurate"):
                break
    if status not in ("optimal", "optimal_inaccurate"):
        raise SectionError(f"inscribed-ellipsoid solve failed: {status}")
    Bv = np.asarray(B.value)
    return 0.5 * (Bv + Bv.T), np.asarray(d.value)


def john_ellipsoid(S: Section) -> Ellipsoid:
    """Maximum-volume inscribed ellipsoid of the section hull.

    Log-det maximization over the hull facets, solved by a cutting-plane
    loop: a coarse facet subset is refined with the most violated facets
    until every facet of the full polygon holds, then the shape is scaled
    onto the binding facet so the inscription is exact. The John sandwich
    E subset hull subset n(E - c) + c is checked by the callers' tests."""
    hull = S.hull
    area = abs(polygon_area(hull))
    widths = hull.max(axis=0) - hull.min(axis=0)
    if area <= 1e-14 * max(1.0, float(widths.max()) ** 2):
        thin = np.argmin(widths)
        raise SectionError(
            f"degenerate (flat) hull: thin along axis {int(thin)}"
        )
    # merge sliver vertices: near-collinear triples make nearly parallel
    # facet normals and degrade the conic solve; the merged polygon is the
    # hull of a vertex subset, so it stays inscribed in the section
    diam = float(np.max(widths))
    hull_f = convex_hull_2d(hull, collinear_eps=1e-9 * diam * diam)
    if len(hull_f) < 3:
        raise SectionError("degenerate (flat) hull after sliver merging")
    a = hull_f
    b = np.roll(hull_f, -1, axis=0)
    e = b - a
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = np.einsum("ij,ij->i", normals, a)

    m = len(normals)
    scale = max(1.0, float(np.abs(offsets).max()))
    stride = max(1, m // 48)
    active = set(range(0, m, stride))
    Bv = dv = None
    for _ in range(16):
        idx = sorted(active)
        Bv, dv = _mvie_subproblem(normals[idx], offsets[idx])
        viol = np.linalg.norm(normals @ Bv, axis=1) + normals @ dv - offsets
        if float(viol.max()) <= 1e-9 * scale:
            break
        worst = [int(i) for i in np.argsort(viol)[-8:] if viol[i] > 0]
        if not worst or all(i in active for i in worst):
            break
        active.update(worst)

    # exact inscription: shrink onto the most binding facet
    gap = offsets - normals @ dv
    supp = np.linalg.norm(normals @ Bv, axis=1)
    pos = gap > 1e-14 * scale
    factor = float(np.max(supp[pos] / gap[pos]))
    if factor > 1.0:
        Bv = Bv / factor
    Q = np.linalg.inv(Bv @ Bv)
    Q = 0.5 * (Q + Q.T)
    E = Ellipsoid(center=dv, Q=Q)
    support = np.linalg.norm(normals @ Bv, axis=1) + normals @ E.center
    if np.any(support > offsets + 1e-9 * scale):
        raise SectionError("inscribed-ellipsoid solve left the hull")
    return E


def b_value(field: Field, x0, h: float, tangent=None) -> float:
    """h^{-1/2} times the maximal x_n over the section at level h."""
    S = section(field, x0, h, tangent)
    return S.normal_extent() / np.sqrt(h)


@dataclass(frozen=True)
class LocalizationResult:
    h: float
    k_in: float
    k_out: float
    nu: np.ndarray
    ellipsoid: Ellipsoid
    section: Section
    slid_section: Section


def localization_constants(
    field: Field, x0, h: float, tangent=None
) -> LocalizationResult:
    """Inclusion constants between the section and a volume-normalized
    ellipsoid centered at the distinguished point.

    The ellipsoid takes the shape of the slid section's maximum-volume
    inscribed ellipsoid, recentred at the origin and rescaled to volume
    h^{n/2}; this keeps the construction covariant under unimodular shears,
    so the constants are affine invariants of the solution."""
    S = section(field, x0, h, tangent)
    amap, St = center_of_mass_slide(S)
    E_ins = john_ellipsoid(St)
    n = 2
    Eh = E_ins.recentred(np.zeros(n)).scaled_to_volume(h ** (n / 2.0))

    k_out = float(np.max(Eh.gauge(St.hull)))

    dom = S.domain
    Ainv = amap.inverse()

    def measured_inside(k):
        ring = Eh.boundary_points(ELLIPSE_BOUNDARY_SAMPLES, k=k)
        orig = Ainv.apply(ring)
        keep = dom.contains(orig, tol=0.0)
        test_pts = ring[keep]
        chain_t = amap.apply(dom.boundary)
        near = chain_t[Eh.gauge(chain_t) <= k]
        if len(near):
            test_pts = np.vstack([test_pts, near])
        if len(test_pts) == 0:
            return True
        return bool(
            np.all(point_in_convex_polygon(test_pts, St.hull, tol=1e-12))
        )

    lo, hi = 0.0, k_out
    if measured_inside(k_out):
        lo = k_out
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if measured_inside(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= KIN_BISECTION_TOL * max(hi, 1.0):
                break
    k_in = lo
    E_orig = Eh.mapped_through(amap.matrix())
    return LocalizationResult(
        h=float(h),
        k_in=float(k_in),
        k_out=float(k_out),
        nu=amap.nu.copy(),
        ellipsoid=E_orig,
        section=S,
        slid_section=St,
    )


# ---------------------------------------------------------------------------
# ladder scans


@dataclass(frozen=True)
class BProfile:
    """Per-level section statistics along a dyadic ladder."""

    levels: np.ndarray
    b: np.ndarray
    volume: np.ndarray
    nu: np.ndarray
    k_in: np.ndarray
    k_out: np.ndarray
    semi_axes: np.ndarray
    n_nodes: np.ndarray

    def ratio_bounds_ok(self, slack: float = 0.02) -> bool:
        """Monotone pinch of b-quotients: for h1 <= h2 the ratio b(h1)/b(h2)
        must lie in [(h1/h2)^{1/2}, (h2/h1)^{1/2}] (an exact consequence of
        convexity and the zero tangent value)."""
        h = self.levels
        b = self.b
        for i in range(len(h)):
            for j in range(len(h)):
                if h[i] <= h[j]:
                    r = b[i] / b[j]
                    lo = np.sqrt(h[i] / h[j])
                    hi = np.sqrt(h[j] / h[i])
                    if not (lo * (1 - slack) <= r <= hi * (1 + slack)):
                        return False
        return True


def resolvable_ladder(field: Field, ladder=DEFAULT_LADDER, tangent=None,
                      floor: int = SECTION_NODE_FLOOR):
    """Truncate a descending ladder at the grid resolution floor."""
    out = []
    for h in ladder:
        try:
            S = section(field, np.zeros(2), h, tangent)
        except SectionError:
            break
        if S.n_grid_nodes < floor:
            break
        out.append(float(h))
    return tuple(out)


def bprofile(field: Field, x0, ladder=None, tangent=None,
             with_localization: bool = True) -> BProfile:
    if ladder is None:
        ladder = resolvable_ladder(field, tangent=tangent)
    ladder = tuple(sorted(ladder, reverse=True))
    if len(ladder) == 0:
        raise SectionError("no resolvable ladder levels")
    rows = {k: [] for k in ("b", "vol", "nu", "kin", "kout", "axes", "nn")}
    for h in ladder:
        if with_localization:
            loc = localization_constants(field, x0, h, tangent)
            S, St = loc.section, loc.slid_section
            rows["nu"].append(loc.nu[0])
            rows["kin"].append(loc.k_in)
            rows["kout"].append(loc.k_out)
            rows["axes"].append(john_ellipsoid(St).semi_axes())
        else:
            S = section(field, x0, h, tangent)
            rows["nu"].append(np.nan)
            rows["kin"].append(np.nan)
            rows["kout"].append(np.nan)
            rows["axes"].append(np.full(2, np.nan))
        rows["b"].append(S.normal_extent() / np.sqrt(h))
        rows["vol"].append(S.volume)
        rows["nn"].append(S.n_grid_nodes)
    return BProfile(
        levels=np.asarray(ladder),
        b=np.asarray(rows["b"]),
        volume=np.asarray(rows["vol"]),
        nu=np.asarray(rows["nu"]),
        k_in=np.asarray(rows["kin"]),
        k_out=np.asarray(rows["kout"]),
        semi_axes=np.asarray(rows["axes"]),
        n_nodes=np.asarray(rows["nn"], dtype=int),
    )


def bprofile_csv(profile: BProfile) -> str:
    """Fixed-order CSV: h, |S_h|, b, nu components, k_in, k_out, semi-axes."""
    lines = ["h,volume,b,nu_1,k_in,k_out,axis_1,axis_2"]
    for i, h in enumerate(profile.levels):
        ax = profile.semi_axes[i]
        lines.append(
            f"{h!r},{profile.volume[i]!r},{profile.b[i]!r},{profile.nu[i]!r},"
            f"{profile.k_in[i]!r},{profile.k_out[i]!r},{ax[0]!r},{ax[1]!r}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class VolumeScanResult:
    slope: float
    ratio_min: float
    ratio_max: float
    levels: np.ndarray
    volumes: np.ndarray

    def ratios(self):
        return self.volumes / self.levels ** (2 / 2.0 * 1.0)


def volume_scaling_scan(field: Field, x0, ladder=None, tangent=None) -> VolumeScanResult:
    """Least-squares slope of log |S_h| against log h (n/2 for genuine
    quadratic localization) and the range of |S_h| / h^{n/2}."""
    if ladder is None:
        ladder = resolvable_ladder(field, tangent=tangent)
    ladder = tuple(sorted(ladder, reverse=True))
    if len(ladder) < 4:
        raise SectionError("need at least 4 resolvable ladder levels")
    vols = []
    for h in ladder:
        vols.append(section(field, x0, h, tangent).volume)
    levels = np.asarray(ladder)
    vols = np.asarray(vols)
    slope = float(np.polyfit(np.log(levels), np.log(vols), 1)[0])
    n = 2
    r = vols / levels ** (n / 2.0)
    return VolumeScanResult(
        slope=slope, ratio_min=float(r.min()), ratio_max=float(r.max()),
        levels=levels, volumes=vols,
    )


@dataclass(frozen=True)
class DoublingReport:
    c0: float
    vacuous: bool
    entries: tuple
    min_max_ratio: float

    @property
    def all_doubled(self) -> bool:
        return self.vacuous or all(e["doubled"] for e in self.entries)


def doubling_scan(field: Field, x0, ladder=None, c0: float = 0.1,
                  tangent=None, profile: Optional[BProfile] = None) -> DoublingReport:
    """For ladder levels with b(h) <= c0, look for a lower level t*h,
    t in [c0, 1], where b at least doubles. Diagnostic: reports the ratios,
    never raises."""
    if profile is None:
        profile = bprofile(field, x0, ladder, tangent, with_localization=False)
    h = profile.levels
    b = profile.b
    entries = []
    agg = []
    for i in range(len(h)):
        if b[i] > c0:
            continue
        cand = []
        for j in range(len(h)):
            t = h[j] / h[i]
            if c0 <= t <= 1.0 and j != i:
                cand.append((float(t), float(b[j] / b[i])))
        if not cand:
            continue
        best = max(r for _, r in cand)
        agg.append(best)
        entries.append(
            {"h": float(h[i]), "b": float(b[i]), "candidates": cand,
             "doubled": best > 2.0}
        )
    return DoublingReport(
        c0=c0,
        vacuous=len(entries) == 0,
        entries=tuple(entries),
        min_max_ratio=float(min(agg)) if agg else np.nan,
    )


# ---------------------------------------------------------------------------
# applying a sliding map to a whole field


class _MappedKernel:
    """Kernel of A(Omega) for a sliding map A, delegating to the original
    exact kernel through A^{-1} (rays map to rays, parameters are preserved)."""

    def __init__(self, base, amap: SlidingMap):
        self.base = base
        self.inv = amap.inverse()

    def contains(self, pts, tol=0.0):
        return self.base.contains(self.inv.apply(pts), tol=tol)

    def ray_exit(self, origin, direction):
        # the shear is linear, so rays map to rays with the same parameter
        o = self.inv.apply(np.asarray(origin, float))[0]
        d = self.inv.apply(np.asarray(direction, float))[0]
        return self.base.ray_exit(o, d)


def slide_domain(dom: ConvexDomain, amap: SlidingMap) -> ConvexDomain:
    chain = amap.apply(dom.boundary)
    from ._geometry import polygon_area

    kernel = _MappedKernel(dom.kernel, amap) if dom.kernel is not None else None
    from .domain import _inscribed_tangent_ball_radius

    rho_in = _inscribed_tangent_ball_radius(chain, kernel)
    r_out = float(np.linalg.norm(chain, axis=1).max())
    return ConvexDomain(
        dimension=dom.dimension,
        boundary=chain,
        rho_in=rho_in,
        r_out=r_out,
        rho=min(rho_in, 1.0 / r_out),
        kernel=kernel,
        kind=f"slid-{dom.kind}",
    )


def slide_field(field: Field, nu) -> Field:
    """The field in sheared coordinates y = A x, A x = x - nu x_n: resampled
    on a fresh axis-aligned grid over A(Omega). Rows of constant x_n map to
    themselves, so the resample is one-dimensional quadratic interpolation
    along each row (exact boundary rows stay exact)."""
    amap = SlidingMap(nu)
    g = field.grid
    dom2 = slide_domain(g.domain, amap)
    phi0 = g.spec.phi
    fn = None
    if phi0.fn is not None:
        base_fn = phi0.fn
        fn = lambda pts: base_fn(amap.inverse().apply(pts))
    phi2 = BoundaryFunction(
        points=amap.apply(phi0.points),
        values=phi0.values.copy(),
        arclength=phi0.arclength.copy(),
        fn=fn,
    )
    base_f = g.spec.f
    f2 = lambda pts: base_f(amap.inverse().apply(pts))
    spec2 = ProblemSpec(
        domain=dom2, phi=phi2, f=f2, lam=g.spec.lam, Lam=g.spec.Lam,
        alpha=g.spec.alpha, M=g.spec.M,
    )
    grid2 = discretize(spec2, field.delta, g.stencil_width)

    V = field._extended_array()
    y = grid2.unknown_xy
    x = y.copy()
    x[:, 0] += amap.nu[0] * y[:, 1]
    si = x[:, 0] / field.delta - g.i0
    sj = np.clip(np.round(x[:, 1] / field.delta).astype(int) - g.j0, 0, g.shape[1] - 1)
    ri = np.clip(np.round(si).astype(int), 1, g.shape[0] - 2)
    t = si - ri
    row = np.stack([V[ri - 1, sj], V[ri, sj], V[ri + 1, sj]], axis=0)
    vals = (
        0.5 * t * (t - 1.0) * row[0]
        + (1.0 - t * t) * row[1]
        + 0.5 * t * (t + 1.0) * row[2]
    )
    bad = np.isnan(vals)
    if np.any(bad):
        vals[bad] = field.evaluate(x[bad])
    fvals = np.asarray(f2(grid2.unknown_xy), float)
    diffs = _second_differences(grid2, vals)
    return Field(
        grid=grid2, values=vals, f_values=fvals, residual_norm=np.nan,
        iterations=0, method="slid-resample",
        convexity_margin=float(np.min(diffs) * field.delta**2),
    )
