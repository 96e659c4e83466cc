"""Scenario orchestration: declarative configs, the preset suite, reports.

A scenario bundles a Dirichlet problem with ladders and a verifier list; a
run produces a Report whose canonical JSON form is byte-identical across
repeated runs with the same config and seed (wall-clock timings live in the
in-memory report but are excluded from the emitted bytes).

Config schema (YAML or JSON, one key-value tree per file):

    name: str
    seed: int
    delta: float                    # grid spacing
    stencil_width: 1 | 2
    domain: {kind: half-disk|disk|polygon, radius: ..., vertices: ...}
    boundary_data: {kind: oracle|zero|scaled-iso|edge-quadratic|edge-cubic|
                    flat-quadratic-cap, ...params}
    rhs: {kind: oracle|constant|holder, ...params}
    lam, Lam, alpha, M: floats
    h_ladder: {start: -2, stop: -12}        # dyadic exponents, descending
    r_ladder: {r0: 0.5, m_max: 8}
    fit_constraint: boundary-matched | free
    verifiers: [solver-oracle, separation, hypothesis-cases, bprofile,
                volume-scan, doubling, scaling-rule, localization, c2alpha,
                pogorelov, barriers, alexandrov, comparison-pairs]
    expect: {...per-check tolerances and expected ranges}
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import sections as sec
from . import regularity as reg
from . import barriers as bar
from .domain import (
    BoundaryFunction,
    ProblemSpec,
    check_hypothesis_case,
    make_domain,
    quadratic_separation,
)
from .solver import (
    alexandrov_check,
    comparison_check,
    discretize,
    exact_oracle,
    solve_dirichlet,
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data registry


def _boundary_callable(cfg: dict, oracle):
    kind = cfg.get("kind")
    if kind == "oracle":
        return oracle.phi
    if kind == "zero":
        return lambda pts: np.zeros(len(np.atleast_2d(pts)))
    if kind == "scaled-iso":
        c = float(cfg.get("c", 0.5))
        return lambda pts: c * np.sum(np.atleast_2d(pts) ** 2, axis=1)
    if kind == "edge-quadratic":
        c = float(cfg.get("c", 0.5))
        return lambda pts: c * np.atleast_2d(pts)[:, 0] ** 2
    if kind == "edge-cubic":
        b = float(cfg.get("b", 1.0))

        def fn(pts):
            p = np.atleast_2d(pts)
            return np.abs(p[:, 0]) ** 3 + b * p[:, 1]

        return fn
    if kind == "flat-quadratic-cap":
        # p(x') on the flat part, capped by the constant 1 elsewhere
        c = float(cfg.get("c", 0.25))

        def fn(pts):
            p = np.atleast_2d(pts)
            flat = np.abs(p[:, 1]) <= 1e-12
            return np.where(flat, c * p[:, 0] ** 2, 1.0)

        return fn
    raise ConfigError(f"boundary_data.kind {kind!r} not recognized")


def _rhs_callable(cfg: dict, oracle):
    kind = cfg.get("kind")
    if kind == "oracle":
        return oracle.f
    if kind == "constant":
        v = float(cfg.get("value", 1.0))
        return lambda pts: np.full(len(np.atleast_2d(pts)), v)
    if kind == "holder":
        sigma = float(cfg.get("sigma", 0.5))
        alpha = float(cfg.get("alpha", 0.5))

        def fn(pts):
            p = np.atleast_2d(pts)
            return 1.0 + sigma * np.sum(p * p, axis=1) ** (alpha / 2.0)

        return fn
    raise ConfigError(f"rhs.kind {kind!r} not recognized")


def _build_domain(cfg: dict):
    kind = cfg.get("kind")
    if kind in ("half-disk", "disk"):
        return make_domain(kind, radius=float(cfg.get("radius", 1.0)),
                           n_samples=int(cfg.get("n_samples", 1024)))
    if kind == "polygon":
        return make_domain("polygon", vertices=np.asarray(cfg["vertices"], float),
                           n_samples=int(cfg.get("n_samples", 1024)))
    raise ConfigError(f"domain.kind {kind!r} not recognized")


def _dyadic_ladder(cfg) -> tuple:
    if cfg is None:
        return tuple(2.0 ** (-k) for k in range(2, 13))
    if isinstance(cfg, (list, tuple)):
        lad = tuple(float(x) for x in cfg)
    else:
        start = int(cfg.get("start", -2))
        stop = int(cfg.get("stop", -12))
        if start < stop:
            raise ConfigError("h_ladder exponents must descend (start >= stop)")
        lad = tuple(2.0**k for k in range(start, stop - 1, -1))
    if any(lad[i] <= lad[i + 1] for i in range(len(lad) - 1)):
        raise ConfigError("h_ladder must be strictly descending")
    return lad


# ---------------------------------------------------------------------------
# scenario and report


class Scenario:
    """Validated scenario configuration."""

    def __init__(self, cfg: dict):
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a mapping")
        for key in ("name", "delta", "domain", "boundary_data", "rhs"):
            if key not in cfg:
                raise ConfigError(f"config key {key!r} is required")
        self.cfg = copy.deepcopy(cfg)
        self.name = str(cfg["name"])
        self.seed = int(cfg.get("seed", 0))
        self.delta = float(cfg["delta"])
        self.stencil_width = int(cfg.get("stencil_width", 2))
        self.h_ladder = _dyadic_ladder(cfg.get("h_ladder"))
        rl = cfg.get("r_ladder") or {}
        self.r0 = float(rl.get("r0", 0.5))
        self.m_max = int(rl.get("m_max", 8))
        self.r_mode = str(rl.get("mode", "power"))
        self.r_scales = int(rl.get("n", 5))
        self.fit_constraint = cfg.get("fit_constraint", "boundary-matched")
        self.verifiers = list(cfg.get("verifiers", []))
        self.expect = dict(cfg.get("expect", {}))
        self.domain = _build_domain(cfg["domain"])
        oracle = None
        oname = cfg["boundary_data"].get("name") or cfg["rhs"].get("name")
        if "oracle" in (cfg["boundary_data"].get("kind"), cfg["rhs"].get("kind")):
            oparams = dict(cfg.get("oracle_params", {}))
            oracle = exact_oracle(oname or "isotropic", **oparams)
        self.oracle = oracle
        phi_fn = _boundary_callable(cfg["boundary_data"], oracle)
        f_fn = _rhs_callable(cfg["rhs"], oracle)
        self.spec = ProblemSpec(
            domain=self.domain,
            phi=BoundaryFunction.from_callable(self.domain, phi_fn),
            f=f_fn,
            lam=float(cfg.get("lam", 1.0)),
            Lam=float(cfg.get("Lam", 1.0)),
            alpha=float(cfg.get("alpha", 0.5)),
            M=float(cfg.get("M", 0.0)),
        )


def _check(name, value, tol, ok, **extra):
    entry = {"name": name, "value": value, "tol": tol, "pass": bool(ok)}
    entry.update(extra)
    return entry


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and (np.isnan(obj) or np.isinf(obj)):
        return repr(obj)
    return obj


VOLATILE_KEYS = ("wall_clock",)


def canonical_report_json(report: dict) -> str:
    """Deterministic byte form: volatile fields stripped, keys sorted."""
    stripped = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    return json.dumps(_jsonable(stripped), sort_keys=True, indent=1) + "\n"


def run_scenario(config, delta_override=None, seed_override=None) -> dict:
    """Run one scenario end to end; `config` is a path or a dict."""
    if isinstance(config, (str, Path)):
        text = Path(config).read_text()
        try:
            cfg = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {config}: {e}") from e
    else:
        cfg = config
    if delta_override is not None:
        cfg = dict(cfg, delta=float(delta_override))
    if seed_override is not None:
        cfg = dict(cfg, seed=int(seed_override))
    sc = Scenario(cfg)
    rng = np.random.default_rng(sc.seed)
    t_start = time.perf_counter()
    report = {
        "scenario": _jsonable(sc.cfg),
        "checks": [],
        "skipped": [],
        "wall_clock": {},
    }
    checks = report["checks"]

    # hypothesis gates
    hyp_ok = {}
    for case in sc.expect.get("hypothesis_cases", []):
        verdict = check_hypothesis_case(sc.spec, int(case["case"]))
        hyp_ok[int(case["case"])] = verdict.ok
        checks.append(
            _check(
                f"hypothesis-case-{case['case']}",
                verdict.ok,
                None,
                verdict.ok == bool(case.get("expected", True)),
                diagnostics=_jsonable(verdict.diagnostics),
            )
        )

    # solve
    t0 = time.perf_counter()
    grid = discretize(sc.spec, sc.delta, sc.stencil_width)
    field = solve_dirichlet(grid, max_iter=int(sc.cfg.get("max_iter", 120)))
    report["wall_clock"]["solve"] = time.perf_counter() - t0
    report["solver"] = {
        "unknowns": grid.n_unknowns,
        "iterations": field.iterations,
        "residual": field.residual_norm,
        "convexity_margin": field.convexity_margin,
        "method": field.method,
    }

    # tangent plane and separation
    tangent = None
    tangent_error = None
    try:
        tp = reg.tangent_plane(field, np.zeros(2))
        tangent = tp.affine
        report["tangent"] = {
            "slope": _jsonable(tp.p),
            "gamma_error": tp.meta["gamma_error"],
        }
    except reg.SupportError as e:
        tangent_error = str(e)
        report["tangent"] = {"error": tangent_error}

    sep = None
    separated = True
    if "separation" in sc.verifiers:
        l_fn = tangent if tangent is not None else (
            lambda pts: np.zeros(len(np.atleast_2d(pts)))
        )
        sep = quadratic_separation(sc.spec, l_fn)
        expected = bool(sc.expect.get("separation", True))
        report["separation"] = {
            "mu_lo": sep.mu_lo, "mu_hi": sep.mu_hi, "ok": sep.ok,
            "fallback_plane": tangent is None,
        }
        if expected:
            separated = sep.ok
            checks.append(
                _check("quadratic-separation", sep.ok, None, sep.ok,
                       mu_lo=sep.mu_lo, mu_hi=sep.mu_hi)
            )
        else:
            # negative control: at any finite sampling mu_lo stays positive,
            # the verdict is its decay under boundary refinement
            mu_scan = [sep.mu_lo]
            base_n = int(sc.cfg["domain"].get("n_samples", 1024))
            for mult in (4, 16):
                dom_f = _build_domain(dict(sc.cfg["domain"],
                                           n_samples=base_n * mult))
                phi_f = BoundaryFunction.from_callable(dom_f, sc.spec.phi.fn)
                spec_f = ProblemSpec(
                    domain=dom_f, phi=phi_f, f=sc.spec.f, lam=sc.spec.lam,
                    Lam=sc.spec.Lam, alpha=sc.spec.alpha, M=sc.spec.M,
                )
                mu_scan.append(quadratic_separation(spec_f, l_fn).mu_lo)
            decays = all(
                mu_scan[i + 1] < mu_scan[i] for i in range(len(mu_scan) - 1)
            ) and mu_scan[-1] <= 0.5 * mu_scan[0]
            separated = not decays
            report["separation"]["mu_lo_refinement"] = mu_scan
            checks.append(
                _check("separation-fails-under-refinement", mu_scan, None,
                       decays)
            )

    def skip(name, why):
        report["skipped"].append({"verifier": name, "reason": why})

    # ladder scans
    profile = None
    if "bprofile" in sc.verifiers:
        if not separated:
            skip("bprofile", "quadratic separation failed")
        else:
            lad = sec.resolvable_ladder(field, sc.h_ladder, tangent)
            if len(lad) == 0:
                skip("bprofile", "no resolvable ladder levels")
            else:
                t0 = time.perf_counter()
                profile = sec.bprofile(field, np.zeros(2), lad, tangent)
                report["wall_clock"]["bprofile"] = time.perf_counter() - t0
                report["bprofile"] = {
                    "levels": _jsonable(profile.levels),
                    "b": _jsonable(profile.b),
                    "volume": _jsonable(profile.volume),
                    "nu": _jsonable(profile.nu),
                    "k_in": _jsonable(profile.k_in),
                    "k_out": _jsonable(profile.k_out),
                    "semi_axes": _jsonable(profile.semi_axes),
                    "n_nodes": _jsonable(profile.n_nodes),
                }
                checks.append(
                    _check("b-ratio-bounds", profile.ratio_bounds_ok(0.02),
                           0.02, profile.ratio_bounds_ok(0.02))
                )
                with np.errstate(divide="ignore"):
                    nu_log = np.abs(profile.nu) / np.abs(np.log(profile.levels))
                report["bprofile"]["nu_over_log"] = _jsonable(nu_log)
                bound = sc.expect.get("nu_log_bound")
                if bound is not None:
                    worst = float(np.nanmax(nu_log))
                    checks.append(
                        _check("nu-log-bound", worst, float(bound),
                               worst <= float(bound))
                    )
                kin_base = sc.expect.get("k_in_baseline")
                if kin_base is not None:
                    kmin = float(np.min(profile.k_in))
                    checks.append(
                        _check("localization-k-in", kmin,
                               float(kin_base) * 0.9,
                               kmin >= float(kin_base) * 0.9)
                    )

    if "volume-scan" in sc.verifiers:
        if not separated:
            skip("volume-scan", "quadratic separation failed")
        else:
            lad = sec.resolvable_ladder(field, sc.h_ladder, tangent)
            if len(lad) < 4:
                skip("volume-scan", "fewer than 4 resolvable levels")
            else:
                vs = sec.volume_scaling_scan(field, np.zeros(2), lad, tangent)
                report["volume_scan"] = {
                    "slope": vs.slope, "ratio_min": vs.ratio_min,
                    "ratio_max": vs.ratio_max,
                    "levels": _jsonable(vs.levels),
                    "volumes": _jsonable(vs.volumes),
                }
                checks.append(
                    _check("volume-slope", vs.slope, 0.05,
                           abs(vs.slope - 1.0) <= 0.05)
                )
                ratio = sc.expect.get("volume_ratio")
                if ratio is not None:
                    lo = vs.ratio_min / float(ratio)
                    hi = vs.ratio_max / float(ratio)
                    ok = (1 - 0.02 <= lo) and (hi <= 1 + 0.02)
                    checks.append(
                        _check("volume-ratio", [vs.ratio_min, vs.ratio_max],
                               0.02, ok, target=float(ratio))
                    )

    if "doubling" in sc.verifiers and profile is not None:
        rep = sec.doubling_scan(field, np.zeros(2), profile.levels,
                                c0=float(sc.cfg.get("c0", 0.1)),
                                tangent=tangent, profile=profile)
        report["doubling"] = {
            "c0": rep.c0, "vacuous": rep.vacuous,
            "min_max_ratio": _jsonable(rep.min_max_ratio),
            "entries": _jsonable(list(rep.entries)),
        }

    if "scaling-rule" in sc.verifiers and profile is not None:
        beta = 2.0
        h_mid = profile.levels[len(profile.levels) // 2]
        b1 = sec.b_value(field.scaled(beta), np.zeros(2), beta * h_mid,
                         (lambda pts: beta * np.asarray(tangent(pts), float))
                         if tangent else None)
        b0 = profile.b[len(profile.levels) // 2]
        err = abs(b1 - b0 / np.sqrt(beta))
        checks.append(_check("b-scaling-rule", err, 1e-12, err <= 1e-12))

    if "solver-oracle" in sc.verifiers:
        if sc.oracle is None or sc.cfg["boundary_data"].get("kind") != "oracle":
            skip("solver-oracle", "no exact oracle behind this scenario")
        else:
            err = float(
                np.max(np.abs(field.values - sc.oracle.u(grid.unknown_xy)))
            )
            tol = float(sc.expect.get("oracle_error", 5e-3))
            report["oracle_error"] = err
            checks.append(_check("solver-oracle-error", err, tol, err <= tol))

    if "c2alpha" in sc.verifiers:
        if not separated:
            skip("c2alpha", "quadratic separation failed")
        else:
            t0 = time.perf_counter()
            rr = reg.c2alpha_exponent(
                field, np.zeros(2), r0=sc.r0, m_max=sc.m_max,
                constraint=sc.fit_constraint, ladder=sc.r_mode,
                min_scales=sc.r_scales,
            )
            report["wall_clock"]["c2alpha"] = time.perf_counter() - t0
            report["regularity"] = {
                "scales": _jsonable(rr.scales),
                "residuals": _jsonable(rr.residuals),
                "slope": rr.slope,
                "alpha_est": rr.alpha_est,
                "c_est": rr.c_est,
                "gamma_drift": _jsonable(rr.gamma_drift),
                "hessian_drift": _jsonable(rr.hessian_drift),
                "low_confidence": rr.low_confidence,
                "text": rr.as_text(),
            }
            rng_cfg = sc.expect.get("alpha_range")
            if rng_cfg is not None:
                lo, hi = float(rng_cfg[0]), float(rng_cfg[1])
                ok = lo <= rr.alpha_est <= hi
                checks.append(
                    _check("c2alpha-exponent", rr.alpha_est, [lo, hi], ok)
                )
            smin = sc.expect.get("slope_min")
            if smin is not None:
                checks.append(
                    _check("c2alpha-slope", rr.slope, float(smin),
                           rr.slope >= float(smin))
                )

    if "pogorelov" in sc.verifiers:
        k = float(sc.cfg.get("pogorelov_k", sc.domain.r_out))
        stats = reg.pogorelov_region_bounds(field, k)
        report["pogorelov"] = _jsonable(
            {k_: getattr(stats, k_) for k_ in (
                "applicable", "reason", "k", "region_nodes", "eig_min",
                "eig_max", "functional_max", "functional_at_interior",
                "third_derivative_bound", "data_pinch",
            )}
        )
        if stats.applicable:
            eb = sc.expect.get("eig_bounds")
            if eb is not None:
                ok = eb[0] <= stats.eig_min and stats.eig_max <= eb[1]
                checks.append(
                    _check("pogorelov-eigenvalues",
                           [stats.eig_min, stats.eig_max], _jsonable(eb), ok)
                )
        else:
            expected = bool(sc.expect.get("pogorelov_applicable", True))
            checks.append(
                _check("pogorelov-applicable", stats.applicable, None,
                       stats.applicable == expected, reason=stats.reason)
            )

    if "barriers" in sc.verifiers:
        report["certificates"] = []
        shift = -1e-6 * field.scale_of_u()
        for bname in sc.cfg.get("barriers", ["tw-lower-v"]):
            try:
                cert = _run_barrier(bname, sc, field, sep, shift)
            except bar.BarrierError as e:
                cert = None
                checks.append(_check(f"barrier-{bname}", str(e), None, False))
            if cert is not None:
                report["certificates"].append(cert.as_dict())
                checks.append(
                    _check(
                        f"barrier-{bname}",
                        {"boundary_margin": cert.boundary_margin,
                         "interior_violation": cert.interior_violation},
                        cert.tolerance,
                        cert.ok and cert.boundary_margin > 0.0,
                    )
                )

    if "alexandrov" in sc.verifiers and tangent is not None:
        ar = alexandrov_check(field, tangent)
        report["alexandrov"] = {
            "applicable": ar.applicable, "c_fit": ar.c_fit,
            "classical_bound": ar.classical_bound,
        }
        checks.append(
            _check("alexandrov", ar.c_fit, ar.classical_bound, ar.ok)
        )

    if "comparison-pairs" in sc.verifiers:
        n_pairs = int(sc.cfg.get("n_comparison_pairs", 5))
        worst = _comparison_pairs(sc, rng, n_pairs)
        checks.append(
            _check("comparison-pairs", worst, 1e-8, worst <= 1e-8,
                   pairs=n_pairs)
        )

    report["wall_clock"]["total"] = time.perf_counter() - t_start
    report["all_passed"] = all(c["pass"] for c in checks)
    return report


def _run_barrier(bname, sc: Scenario, field, sep, shift):
    dom = sc.domain
    if bname == "tw-lower-v":
        mu = 0.9 * (sep.mu_lo if sep is not None and sep.ok else 0.5)

        def make(C):
            return bar.barrier_catalog(
                "tw-lower-v", mu=mu, Lam=sc.spec.Lam, C=C, rho=dom.rho,
                domain=dom,
            ).shifted(shift)

        _, cert = bar.search_barrier_constant(make, field, 0.05, 1e3)
        return cert
    if bname == "pogorelov-w":
        def make(c):
            return bar.barrier_catalog(
                "pogorelov-w", x0=np.zeros(2), k=dom.rho,
                delta=1.0 / (c * dom.rho), domain=dom,
            ).shifted(shift)

        _, cert = bar.search_barrier_constant(make, field, 1e-2, 1e4)
        return cert
    if bname == "tw-upper-w":
        from ._geometry import point_in_convex_polygon

        h_sec = 0.125
        tangent0 = lambda pts: np.zeros(len(np.atleast_2d(pts)))
        S = sec.section(field, np.zeros(2), h_sec, tangent0)
        E = sec.john_ellipsoid(S)
        d = E.semi_axes()

        def region(pts):
            return point_in_convex_polygon(np.atleast_2d(pts), S.hull, tol=0.0)

        # smallest coefficient clearing the determinant precondition, then
        # slide the free constant to contact
        c_det = float(d[0] * d[1] * np.sqrt(sc.spec.Lam) / (2.0 * h_sec))
        b = bar.barrier_catalog(
            "tw-upper-w", eps=1e-6, c=1.2 * c_det, h=h_sec, d=tuple(d),
            domain=dom,
        )
        return bar.certify_with_contact(b, field, region=region)
    if bname == "radial-phi":
        beta, eta0 = bar.choose_radial_exponent(C0=2.0)
        b = bar.barrier_catalog(
            "radial-phi", beta=beta, center=(0.0, -0.26), eta0=eta0
        )
        return bar.certify_with_contact(b, field)
    if bname == "pogorelov-mixed-v":
        tp = reg.tangent_plane(field, np.zeros(2))
        _, _, p2b, _ = reg._boundary_expansion(field, 0.25)
        pinch = sep.mu_lo if sep is not None and sep.ok else 0.25
        delta = 0.5 * min(0.25, pinch)
        for gamma1 in np.geomspace(0.1, 1e3, 40):
            b = bar.barrier_catalog(
                "pogorelov-mixed-v", x0=np.zeros(2), gamma1=float(gamma1),
                gamma2=1.0 / dom.rho, delta=delta, i=0, domain=dom,
                support_plane=tp.affine, slope_coeff=p2b,
            ).shifted(shift)
            cert = bar.certify_gradient_bound(b, field, i=0)
            if cert.ok and cert.boundary_margin > 0.0:
                return cert
        raise bar.BarrierError("no gamma1 passes the gradient comparison")
    if bname == "phi-y":
        model, _ = reg.fit_quadratic(field, np.zeros(2), 0.25,
                                     constraint="boundary-matched")
        f0 = float(np.median(field.f_values))
        model = model.unimodular(f0)
        ev = np.linalg.eigvalsh(model.H)
        C0 = max(1.0, float(ev[-1]) / 2.0, 1.0 / (2.0 * float(ev[0])))
        beta, eta0 = bar.choose_radial_exponent(C0=C0)
        b = bar.barrier_catalog(
            "phi-y", model=model, eps=0.02, C1=2.0, delta0=0.05,
            y=(0.0, -0.26), beta=beta, domain=dom,
        )
        return bar.certify_with_contact(b, field)
    raise bar.BarrierError(f"no preset recipe for barrier {bname!r}")


def _comparison_pairs(sc: Scenario, rng, n_pairs: int) -> float:
    """Randomized ordered problem pairs on a coarse grid: f_u >= f_v and
    boundary(u) <= boundary(v) nodewise must give u <= v."""
    dom = sc.domain
    delta = max(sc.delta, dom.rho / 8.0)
    worst = -np.inf
    for _ in range(n_pairs):
        a1, a2 = rng.uniform(0.2, 1.0, 2)
        c1 = rng.uniform(0.0, 0.3)
        bump = rng.uniform(0.1, 1.0)
        shift = rng.uniform(0.01, 0.2)

        def phi_v(pts):
            p = np.atleast_2d(pts)
            return 0.5 * (a1 * p[:, 0] ** 2 + a2 * p[:, 1] ** 2) + c1 * p[:, 1] + shift

        def phi_u(pts):
            return phi_v(pts) - shift

        def f_v(pts):
            return np.full(len(np.atleast_2d(pts)), 1.0)

        def f_u(pts):
            p = np.atleast_2d(pts)
            return 1.0 + bump * np.exp(-np.sum(p * p, axis=1))

        spec_u = ProblemSpec(
            domain=dom, phi=BoundaryFunction.from_callable(dom, phi_u),
            f=f_u, lam=1.0, Lam=1.0 + bump,
        )
        spec_v = ProblemSpec(
            domain=dom, phi=BoundaryFunction.from_callable(dom, phi_v),
            f=f_v, lam=1.0, Lam=1.0,
        )
        gu = discretize(spec_u, delta, sc.stencil_width)
        gv = discretize(spec_v, delta, sc.stencil_width)
        fu = solve_dirichlet(gu)
        fv = solve_dirichlet(gv)
        verdict = comparison_check(fu, fv)
        if verdict.applicable:
            worst = max(worst, verdict.max_violation)
    return float(worst)


# ---------------------------------------------------------------------------
# emission


def emit(report: dict, formats=("json",), outdir=".") -> list:
    """Write <name>.json (canonical bytes), <name>.sections.csv and
    <name>.plotdata; returns the written paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    name = report["scenario"]["name"]
    written = []
    for fmt in formats:
        if fmt == "json":
            p = out / f"{name}.json"
            p.write_text(canonical_report_json(report))
        elif fmt == "csv":
            p = out / f"{name}.sections.csv"
            prof = report.get("bprofile")
            if prof is None:
                p.write_text("h,volume,b,nu_1,k_in,k_out,axis_1,axis_2\n")
            else:
                lines = ["h,volume,b,nu_1,k_in,k_out,axis_1,axis_2"]
                for i in range(len(prof["levels"])):
                    ax = prof["semi_axes"][i]
                    lines.append(
                        ",".join(
                            repr(float(x))
                            for x in (
                                prof["levels"][i], prof["volume"][i],
                                prof["b"][i], prof["nu"][i], prof["k_in"][i],
                                prof["k_out"][i], ax[0], ax[1],
                            )
                        )
                    )
                p.write_text("\n".join(lines) + "\n")
        elif fmt == "plotdata":
            p = out / f"{name}.plotdata"
            blocks = []
            prof = report.get("bprofile")
            if prof is not None:
                rows = [
                    f"{np.log(h)!r} {np.log(v)!r}"
                    for h, v in zip(prof["levels"], prof["volume"])
                ]
                blocks.append("# log_h log_volume\n" + "\n".join(rows))
                rows = [
                    f"{np.log(h)!r} {b!r}"
                    for h, b in zip(prof["levels"], prof["b"])
                ]
                blocks.append("# log_h b\n" + "\n".join(rows))
            rr = report.get("regularity")
            if rr is not None:
                rows = [
                    f"{np.log(r)!r} {np.log(max(res, 1e-300))!r}"
                    for r, res in zip(rr["scales"], rr["residuals"])
                ]
                blocks.append("# log_r log_residual\n" + "\n".join(rows))
            p.write_text("\n\n".join(blocks) + "\n")
        else:
            raise ConfigError(f"unknown emit format {fmt!r}")
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# presets


def preset_suite() -> dict:
    base_ladder = {"start": -2, "stop": -10}
    presets = {
        "iso-oracle": {
            "name": "iso-oracle",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "oracle", "name": "isotropic"},
            "rhs": {"kind": "oracle", "name": "isotropic"},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": base_ladder,
            "verifiers": ["solver-oracle", "separation", "bprofile",
                          "volume-scan", "doubling", "scaling-rule",
                          "alexandrov", "barriers"],
            "barriers": ["tw-lower-v", "tw-upper-w", "pogorelov-w"],
            "expect": {"oracle_error": 5e-3, "volume_ratio": float(np.pi),
                       "nu_log_bound": 0.05},
        },
        "aniso-oracle": {
            "name": "aniso-oracle",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "oracle", "name": "anisotropic"},
            "rhs": {"kind": "oracle", "name": "anisotropic"},
            "oracle_params": {"a": 4.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": {"start": -4, "stop": -10},
            "verifiers": ["solver-oracle", "separation", "bprofile",
                          "volume-scan", "scaling-rule"],
            "expect": {"oracle_error": 5e-3, "volume_ratio": float(np.pi)},
        },
        "slid-oracle": {
            "name": "slid-oracle",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "oracle", "name": "slid"},
            "rhs": {"kind": "oracle", "name": "slid"},
            "oracle_params": {"nu": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": {"start": -4, "stop": -10},
            "verifiers": ["solver-oracle", "separation", "bprofile",
                          "volume-scan"],
            "expect": {"oracle_error": 1e-2, "volume_ratio": float(np.pi)},
        },
        "prop1-case1": {
            "name": "prop1-case1",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "disk", "radius": 0.5},
            "boundary_data": {"kind": "zero"},
            "rhs": {"kind": "constant", "value": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": {"start": -5, "stop": -11},
            "fit_constraint": "free",
            "verifiers": ["separation", "bprofile", "volume-scan", "c2alpha"],
            "expect": {"hypothesis_cases": [{"case": 1, "expected": True}]},
        },
        "prop1-case2": {
            "name": "prop1-case2",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "edge-quadratic", "c": 0.5},
            "rhs": {"kind": "constant", "value": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": base_ladder,
            "verifiers": ["separation", "bprofile", "volume-scan", "c2alpha"],
            "expect": {"hypothesis_cases": [{"case": 2, "expected": True}]},
        },
        "prop1-case3": {
            "name": "prop1-case3",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "disk", "radius": 0.5},
            "boundary_data": {"kind": "edge-quadratic", "c": 0.5},
            "rhs": {"kind": "constant", "value": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": {"start": -5, "stop": -11},
            "fit_constraint": "free",
            "verifiers": ["separation", "bprofile", "volume-scan"],
            "expect": {"hypothesis_cases": [{"case": 3, "expected": True}]},
        },
        "pogorelov": {
            "name": "pogorelov",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "flat-quadratic-cap", "c": 0.25},
            "rhs": {"kind": "constant", "value": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "pogorelov_k": 1.0,
            "h_ladder": base_ladder,
            "verifiers": ["separation", "pogorelov", "c2alpha", "barriers"],
            "barriers": ["pogorelov-w"],
            "expect": {"slope_min": 2.8},
        },
        "theorem-m3": {
            "name": "theorem-m3",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "disk", "radius": 0.5},
            "boundary_data": {"kind": "zero"},
            "rhs": {"kind": "holder", "sigma": 0.5, "alpha": 0.5},
            "lam": 1.0, "Lam": 1.5,
            "alpha": 0.5, "M": 0.5,
            "h_ladder": {"start": -5, "stop": -11},
            "fit_constraint": "free",
            "verifiers": ["separation", "bprofile", "volume-scan", "c2alpha"],
            "expect": {"hypothesis_cases": [{"case": 1, "expected": True}]},
        },
        "rough-f": {
            "name": "rough-f",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "scaled-iso", "c": 0.5},
            "rhs": {"kind": "holder", "sigma": 0.5, "alpha": 0.5},
            "lam": 1.0, "Lam": 1.5,
            "alpha": 0.5, "M": 0.5,
            "h_ladder": base_ladder,
            "r_ladder": {"mode": "floor", "n": 5},
            "verifiers": ["separation", "bprofile", "volume-scan", "c2alpha",
                          "comparison-pairs"],
            "expect": {"alpha_range": [0.35, 0.65]},
        },
        "cubic-flat": {
            "name": "cubic-flat",
            "seed": 0,
            "delta": 1.0 / 128,
            "domain": {"kind": "half-disk", "radius": 1.0},
            "boundary_data": {"kind": "edge-cubic", "b": 1.0},
            "rhs": {"kind": "constant", "value": 1.0},
            "lam": 1.0, "Lam": 1.0,
            "h_ladder": base_ladder,
            "verifiers": ["separation", "bprofile", "volume-scan"],
            "expect": {"separation": False,
                       "hypothesis_cases": [{"case": 2, "expected": False}]},
        },
    }
    return presets


# ---------------------------------------------------------------------------
# CLI


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="malab",
        description="Dirichlet solves and boundary-regularity verification "
                    "for det D^2 u = f on convex planar domains",
    )
    sub = parser.add_subparsers(dest="command")
    runp = sub.add_parser("run", help="run a scenario config or preset")
    runp.add_argument("config", nargs="?", help="path to a YAML/JSON config")
    runp.add_argument("--out", default=".", help="output directory")
    runp.add_argument("--format", default="json",
                      help="comma-separated: json,csv,plotdata")
    runp.add_argument("--delta", type=float, default=None)
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--preset", default=None)
    runp.add_argument("--list-presets", action="store_true")
    runp.add_argument("--verify-only", action="store_true",
                      help="validate the config and hypotheses, no solve")
    args = parser.parse_args(argv)

    if args.command != "run":
        parser.print_help()
        return 2

    if args.list_presets:
        for name in sorted(preset_suite()):
            print(name)
        return 0

    try:
        if args.preset is not None:
            presets = preset_suite()
            if args.preset not in presets:
                raise ConfigError(
                    f"unknown preset {args.preset!r}; "
                    f"available: {', '.join(sorted(presets))}"
                )
            cfg = presets[args.preset]
        elif args.config is not None:
            cfg = yaml.safe_load(Path(args.config).read_text())
        else:
            raise ConfigError("need a config path or --preset NAME")

        if args.verify_only:
            sc = Scenario(
                dict(cfg, delta=args.delta or cfg["delta"],
                     seed=args.seed if args.seed is not None else cfg.get("seed", 0))
            )
            for case in sc.expect.get("hypothesis_cases", []):
                verdict = check_hypothesis_case(sc.spec, int(case["case"]))
                print(f"hypothesis case {case['case']}: {verdict.ok} "
                      f"{verdict.diagnostics}")
            print(f"config ok: {sc.name}")
            return 0

        report = run_scenario(cfg, delta_override=args.delta,
                              seed_override=args.seed)
    except (ConfigError, yaml.YAMLError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # hypothesis/solver hard failures
        print(f"error: {e}", file=sys.stderr)
        return 2

    emit(report, formats=[f.strip() for f in args.format.split(",")],
         outdir=args.out)
    for c in report["checks"]:
        print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['name']}: "
              f"value={c['value']} tol={c['tol']}")
    for s in report["skipped"]:
        print(f"[SKIP] {s['verifier']}: {s['reason']}")
    return 0 if report["all_passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
