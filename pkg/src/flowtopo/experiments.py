"""End-to-end checks on synthetic data.

Each function runs one protocol and returns a JSON-serializable report
with a boolean ``passed`` entry. The command line and the acceptance tests
both call these.
"""

from __future__ import annotations

import math

import numpy as np

from . import flow_io, geometry, models, persistence as ph, zigzag as zz
from .pipeline import run_pipeline, synthetic_flow_patches
from .patches import dct_flow_basis


def _bars(ivs, limit=None):
    ivs = sorted(ivs, key=lambda iv: (-(iv.death - iv.birth), iv.birth))
    if limit is not None:
        ivs = ivs[:limit]
    return [[iv.dim, iv.birth, None if math.isinf(iv.death) else iv.death] for iv in ivs]


# --- long-bar signatures ---------------------------------------------------


def witness_barcodes(points, n_landmarks=150, nu=1, r_max="auto", max_dim=2, primes=(2, 3),
                     start=0, method="clearing", r_max_factor=2.0):
    """Maxmin landmarks, lazy witness filtration and one barcode per prime.

    With ``r_max="auto"`` the filtration stops at ``r_max_factor`` times the
    landmark cover radius. Simplices go up to ``max_dim + 1`` so that classes
    up to ``max_dim`` can die.
    """
    X = geometry.as_cloud(points)
    landmarks = geometry.maxmin_sample_points(X, n_landmarks, start)
    W = geometry.cross_distances(X, X[landmarks])
    cover = float(W.min(axis=1).max())
    if r_max == "auto":
        r_max = r_max_factor * cover
    filt = ph.lazy_witness_filtration(geometry.distance_matrix(X[landmarks]), W, nu, r_max, max_dim + 1)
    barcodes = {p: ph.persistent_homology(filt, p, method).restrict(max_dim) for p in primes}
    meta = {
        "n_points": len(X), "n_landmarks": n_landmarks, "nu": nu, "r_max": float(r_max),
        "cover_radius": cover, "maxmin_start": start, "simplices_by_dim": filt.count_by_dim(),
    }
    return barcodes, meta


def signature_check(shape, expected, n_points=5000, noise_sigma=0.02, seed=0, n_landmarks=150,
                    nu=1, r_max="auto", primes=(2, 3), persistence_ratio=3.0, max_dim=2,
                    return_barcodes=False):
    """Sample ``shape``, compute witness barcodes and compare long-bar counts.

    ``expected`` maps each prime to the signature that should come out.
    With ``return_barcodes`` the barcodes come back too, as a second value.
    """
    X = models.sample_cloud(shape, n_points, noise_sigma, seed)
    barcodes, meta = witness_barcodes(X, n_landmarks, nu, r_max, max_dim, primes)
    per_prime = {}
    for p, bc in barcodes.items():
        sig, support = ph.betti_signature(bc, persistence_ratio, r_max=meta["r_max"], max_dim=max_dim)
        per_prime[str(p)] = {
            "signature": list(sig),
            "expected": list(expected[p]),
            "passed": tuple(sig) == tuple(expected[p]),
            "long_bars": [_bars(s) for s in support],
            "top_bars": {str(k): _bars(bc.of_dim(k), 5) for k in range(1, max_dim + 1)},
        }
    report = {
        "shape": shape, "noise_sigma": noise_sigma, "seed": seed,
        "persistence_ratio": persistence_ratio, **meta,
        "primes": per_prime,
        "passed": all(v["passed"] for v in per_prime.values()),
    }
    return (report, barcodes) if return_barcodes else report


def torus_signature(**kw):
    return signature_check("flow_torus", {2: (1, 2, 1), 3: (1, 2, 1)}, **kw)


def klein_signature(**kw):
    return signature_check("klein_control", {2: (1, 2, 1), 3: (1, 1, 0)}, **kw)


# --- circle calibration ----------------------------------------------------


def betti_windows(barcode, target, r_hi=None):
    """Maximal scale windows ``[a, b)`` on which the Betti vector equals ``target``."""
    k = len(target) - 1
    cuts = sorted({0.0} | {iv.birth for iv in barcode.intervals}
                  | {iv.death for iv in barcode.intervals if math.isfinite(iv.death)})
    if r_hi is not None:
        cuts = [c for c in cuts if c < r_hi] + [r_hi]
    windows = []
    for a, b in zip(cuts, cuts[1:]):
        if barcode.betti_at(a, k) == list(target):
            if windows and math.isclose(windows[-1][1], a):
                windows[-1][1] = b
            else:
                windows.append([a, b])
    return windows


def circle_calibration(n=21, noise_sigma=0.1, seed=0, p=2, min_width=0.5):
    X = models.sample_cloud("circle", n, noise_sigma, seed)
    filt = ph.vr_filtration(geometry.distance_matrix(X), max_dim=2)
    bc = ph.persistent_homology(filt, p)
    windows = betti_windows(bc, (1, 1), r_hi=float(filt.scales.max()))
    widest = max(windows, key=lambda w: w[1] - w[0], default=[0.0, 0.0])
    width = widest[1] - widest[0]
    return {
        "n": n, "noise_sigma": noise_sigma, "seed": seed, "prime": p,
        "windows": windows, "widest": widest, "width": width, "min_width": min_width,
        "h1_bars": _bars(bc.of_dim(1)),
        "passed": width >= min_width,
    }


# --- pipeline-based checks --------------------------------------------------


def _long_h1_count(points, n_landmarks, ratio, p=2, start=0):
    X = geometry.as_cloud(points)
    m = min(n_landmarks, len(X))
    Y = X[geometry.maxmin_sample_points(X, m, start)]
    filt = ph.vr_filtration(geometry.distance_matrix(Y), max_dim=2)
    bc = ph.persistent_homology(filt, p)
    sig, support = ph.betti_signature(bc, ratio, r_max=float(filt.scales.max()), max_dim=1)
    return sig[1], support[1], bc, Y


def horizontal_circle(n_patches=20000, seed=0, p=50.0, q=0.2, n_landmarks=100,
                      persistence_ratio=3.0, tolerance=0.05, noise_sigma=0.005):
    """Horizontal translations over primary-circle range patches through the
    unbinned pipeline, then check the core lies on the horizontal flow circle.

    Patch noise is divided by the contrast norm during normalization, so
    ``noise_sigma`` must stay well below the smallest gain for the core to
    sit within ``tolerance`` of the unit circle.
    """
    basis = dct_flow_basis()
    patches, _ = synthetic_flow_patches(n_patches, "horizontal", noise_sigma=noise_sigma,
                                       seed=seed, basis=basis)
    n_after = math.ceil(q * n_patches - 1e-9)
    k = min(300, n_after // 4)
    res = run_pipeline(patches, q=q, k=k, p=p, seed=seed, binned=False, basis=basis)
    c = res.coefficients[res.core]
    dev = np.abs(c[:, 0] ** 2 + c[:, 1] ** 2 - 1)
    count, support, _, _ = _long_h1_count(res.core_points(), n_landmarks, persistence_ratio)
    return {
        "n_patches": n_patches, "noise_sigma": noise_sigma, "k": k, "p": p, "q": q, "core_size": int(len(res.core)),
        "max_radius_deviation": float(dev.max()), "tolerance": tolerance,
        "long_h1_bars": count, "long_bars": _bars(support),
        "n_landmarks": n_landmarks,
        "passed": bool(dev.max() <= tolerance and count == 1),
    }


def torus_bins(n_patches=200_000, seed=0, k=300, p=50.0, q=0.2, n_bins=12,
               halfwidth=math.pi / 12, subsample=50_000, maxmin_m=50, start=0):
    """Synthetic torus patches through the binned pipeline, each bin's core
    reduced to ``maxmin_m`` landmarks."""
    patches, _ = synthetic_flow_patches(n_patches, "all", seed=seed)
    res = run_pipeline(patches, q=q, k=k, p=p, n_bins=n_bins, halfwidth=halfwidth,
                       subsample=subsample, seed=seed, global_core=False)
    bins = []
    for b in range(n_bins):
        X = res.bin_points(b)
        bins.append(X[geometry.maxmin_sample_points(X, min(maxmin_m, len(X)), start)])
    return res, bins


def angle_bin_fibers(bins, persistence_ratio=3.0, p=2):
    rows = []
    doms = []
    for b, Y in enumerate(bins):
        filt = ph.vr_filtration(geometry.distance_matrix(Y), max_dim=2)
        bc = ph.persistent_homology(filt, p)
        sig, support = ph.betti_signature(bc, persistence_ratio, r_max=float(filt.scales.max()), max_dim=1)
        h1 = bc.of_dim(1)
        dom = max(h1, key=lambda iv: (iv.length, -iv.birth)) if h1 else None
        doms.append(dom)
        rows.append({"bin": b, "n_points": len(Y), "long_h1_bars": sig[1],
                     "dominant": None if dom is None else [dom.birth, dom.death],
                     "passed": sig[1] == 1})
    return {"bins": rows, "passed_bins": sum(r["passed"] for r in rows), "n_bins": len(rows),
            "passed": all(r["passed"] for r in rows)}, doms


def auto_zigzag_scale(dominant):
    """Midpoint of the common part of each bin's dominant H1 interval.

    Falls back to the median of the interval midpoints when they do not
    overlap; the second return value says which rule was used.
    """
    if any(d is None for d in dominant):
        raise ValueError("a bin has no 1-dimensional class")
    lo = max(d.birth for d in dominant)
    hi = min(d.death for d in dominant)
    if lo < hi:
        return (lo + hi) / 2, "intersection-midpoint"
    return float(np.median([(d.birth + d.death) / 2 for d in dominant])), "median-midpoint"


def fiber_zigzag(bins, scale="auto", dominant=None, primes=(2, 3), dim=1):
    if scale == "auto":
        if dominant is None:
            _, dominant = angle_bin_fibers(bins)
        r, rule = auto_zigzag_scale(dominant)
    else:
        r, rule = float(scale), "configured"
    diagram = zz.build_angle_zigzag(bins, r, max_dim=dim + 1)
    out = {"scale": r, "scale_rule": rule, "n_nodes": len(diagram), "node_labels": diagram.labels,
           "primes": {}}
    barcodes = {}
    for p in primes:
        zb = zz.zigzag_intervals(diagram, dim, p)
        barcodes[p] = zb
        full = zb.full_length()
        others = [iv for iv in zb.intervals if iv not in full]
        out["primes"][str(p)] = {
            "intervals": zb.to_records(), "ranks": zb.ranks,
            "full_length": sum(mu for _, _, mu in full),
            "loop_closure_rank": zb.loop_closure_rank,
            "passed": sum(mu for _, _, mu in full) == 1
                      and all(b - a + 1 < len(diagram) for a, b, _ in others),
        }
    out["passed"] = all(v["passed"] for v in out["primes"].values())
    return out, barcodes, diagram


# --- property suites ---------------------------------------------------------


def random_cloud(rng, max_points=8):
    n = int(rng.integers(2, max_points + 1))
    d = int(rng.integers(2, 6))
    return rng.normal(size=(n, d))


def oracle_equivalence(n_clouds=200, primes=(2, 3), seed=0, max_points=8):
    rng = np.random.default_rng(seed)
    failures = []
    checks = 0
    for c in range(n_clouds):
        X = random_cloud(rng, max_points)
        filt = ph.vr_filtration(geometry.distance_matrix(X), max_dim=min(len(X) - 1, 3))
        for p in primes:
            bc = ph.persistent_homology(filt, p)
            for r in filt.critical_scales():
                checks += 1
                got = bc.betti_at(r, filt.max_dim)
                want = ph.oracle_betti(filt, r, p)
                if got != want:
                    failures.append({"cloud": c, "prime": p, "r": float(r), "got": got, "want": want})
    return {"n_clouds": n_clouds, "checks": checks, "failures": failures[:10],
            "passed": not failures}


def random_filtration(rng):
    """A VR or lazy witness filtration on a small random cloud."""
    n = int(rng.integers(6, 16))
    X = rng.normal(size=(n, int(rng.integers(2, 5))))
    if rng.random() < 0.5:
        return ph.vr_filtration(geometry.distance_matrix(X), max_dim=3)
    L = rng.choice(n, size=max(3, n // 2), replace=False)
    return ph.lazy_witness_filtration(geometry.distance_matrix(X[L]), geometry.cross_distances(X, X[L]),
                                      int(rng.integers(0, 3)), max_dim=3)


def reduction_differential(n_filtrations=50, primes=(2, 3), seed=0):
    rng = np.random.default_rng(seed)
    mismatches = []
    for i in range(n_filtrations):
        filt = random_filtration(rng)
        for p in primes:
            a = ph.persistent_homology(filt, p, "plain").intervals
            b = ph.persistent_homology(filt, p, "clearing").intervals
            if a != b:
                mismatches.append({"filtration": i, "prime": p})
    return {"n_filtrations": n_filtrations, "mismatches": mismatches, "passed": not mismatches}


def random_flow_field(rng):
    w, h = (int(x) for x in rng.integers(1, 40, size=2))
    data = rng.normal(scale=10.0, size=(h, w, 2)).astype(np.float32)
    return flow_io.FlowField(w, h, data)


def flo_roundtrip(n_fields=100, seed=0):
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n_fields):
        f = random_flow_field(rng)
        if flow_io.read_flo(flow_io.write_flo(f)) != f:
            bad.append(i)
    return {"n_fields": n_fields, "failures": bad, "passed": not bad}


def quotient_check(grid_resolution=72):
    rep = models.quotient_identification_check(grid_resolution)
    rep["passed"] = rep["max_violation"] <= 1e-12 and rep["min_separation"] > 0
    return rep

