"""Command line entry point.

    flowtopo <command> --config <path> [--seed N] [--out DIR] [key=value ...]

The config file is a JSON object with the flat keys listed in ``DEFAULTS``.
Values given as ``key=value`` arguments (parsed as JSON when possible) and
the ``--seed``/``--out`` flags override the file. Every command writes a
``report.json`` into the output directory holding the resolved config, the
seed and the library version; JSON output carries no timestamps, so equal
inputs give byte-identical reports.

Exit status: 0 when every requested check passes, 1 when a check fails or a
stage errors out, 2 for usage and config errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, experiments as ex, flow_io, geometry, models, persistence as ph, plotting
from . import zigzag as zz
from .modp import is_prime
from .patches import load_patches_csv, save_coefficients_csv, save_patches_csv, write_rows_csv
from .pipeline import StageError, run_pipeline, synthetic_flow_patches

COMMANDS = ("synth", "ingest", "pipeline", "ph", "zigzag", "verify")
CHECKS = ("quotient", "torus", "klein", "circle", "horizontal", "fibers", "zigzag",
          "oracle", "differential", "roundtrip")

DEFAULTS = {
    "seed": 0,
    "out": "flowtopo-out",
    # synthetic clouds
    "shape": "flow_torus",          # circle | horizontal_circle | flow_torus | klein_control | flow_patches
    "n_points": 5000,
    "noise_sigma": 0.02,
    # raw patches
    "input": None,                  # .flo directory (ingest), patch CSV (pipeline), cloud CSV (ph), bin directory (zigzag)
    "n_patches": 200000,
    "directions": "all",            # synthetic flow patches: all | horizontal
    "model_fraction": 0.2,
    "patch_noise": 0.02,
    "sentinel_cutoff": 1e9,
    # pipeline
    "q": 0.2,
    "k": 300,
    "p": 50,
    "n_bins": 12,
    "halfwidth": math.pi / 12,
    "subsample": 50000,
    "maxmin_m": 50,
    "maxmin_start": 0,
    # persistence
    "complex": "witness",           # witness | vr
    "landmarks": 150,
    "nu": 1,
    "r_max": "auto",                # number, or "auto" = r_max_factor x landmark cover radius
    "r_max_factor": 2.0,
    "max_dim": 2,
    "primes": [2, 3],
    "persistence_ratio": 3.0,
    "method": "clearing",           # clearing | plain
    "expect_signature": None,       # e.g. [1, 2, 1]; a mismatch fails the ph command
    # zigzag
    "zigzag_scale": "auto",
    "zigzag_dim": 1,
    "expect_full_length": 1,        # null disables the check
    # verify
    "checks": list(CHECKS),
    "oracle_clouds": 200,
    "differential_filtrations": 50,
    "roundtrip_fields": 100,
    "quotient_grid": 72,
    "horizontal_patches": 20000,
    "figures": True,
}


class ConfigError(ValueError):
    pass


# --- config -------------------------------------------------------------------


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=(), seed=None, out=None) -> dict:
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(data)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        cfg[key.strip()] = _parse_value(value)
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    def positive_int(key):
        v = cfg[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{key} must be a positive integer, got {v!r}")

    def number(key, lo=None, hi=None, lo_open=False):
        v = cfg[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key} must be a finite number, got {v!r}")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(f"{key}={v} is below the allowed range")
        if hi is not None and v > hi:
            raise ConfigError(f"{key}={v} is above the allowed range")

    for key in ("n_points", "n_patches", "k", "n_bins", "subsample", "maxmin_m", "landmarks",
                "max_dim", "zigzag_dim", "oracle_clouds", "differential_filtrations",
                "roundtrip_fields", "quotient_grid", "horizontal_patches"):
        positive_int(key)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    for key in ("nu", "maxmin_start"):
        if not isinstance(cfg[key], int) or cfg[key] < 0:
            raise ConfigError(f"{key} must be a nonnegative integer")
    number("q", 0, 1, lo_open=True)
    number("model_fraction", 0, 1, lo_open=True)
    number("p", 0, 100, lo_open=True)
    number("halfwidth", 0, math.pi / 2, lo_open=True)
    number("noise_sigma", 0)
    number("patch_noise", 0)
    number("persistence_ratio", 1, lo_open=True)
    number("sentinel_cutoff", 0, lo_open=True)
    number("r_max_factor", 0, lo_open=True)
    if cfg["r_max"] != "auto":
        number("r_max", 0, lo_open=True)
    if cfg["zigzag_scale"] != "auto":
        number("zigzag_scale", 0, lo_open=True)
    primes = cfg["primes"]
    if (not isinstance(primes, list) or not primes
            or not all(isinstance(q, int) and not isinstance(q, bool) and is_prime(q) and q < 2 ** 31
                       for q in primes)):
        raise ConfigError(f"primes must be a nonempty list of primes, got {primes!r}")
    if cfg["shape"] not in models.SHAPES + ("flow_patches",):
        raise ConfigError(f"unknown shape {cfg['shape']!r}")
    if cfg["directions"] not in ("all", "horizontal"):
        raise ConfigError("directions must be 'all' or 'horizontal'")
    if cfg["complex"] not in ("witness", "vr"):
        raise ConfigError("complex must be 'witness' or 'vr'")
    if cfg["method"] not in ("clearing", "plain"):
        raise ConfigError("method must be 'clearing' or 'plain'")
    checks = cfg["checks"]
    if not isinstance(checks, list) or not set(checks) <= set(CHECKS):
        raise ConfigError(f"checks must be a list drawn from {', '.join(CHECKS)}")
    sig = cfg["expect_signature"]
    if sig is not None and not (isinstance(sig, list) and all(isinstance(v, int) and v >= 0 for v in sig)):
        raise ConfigError("expect_signature must be null or a list of nonnegative integers")
    full = cfg["expect_full_length"]
    if full is not None and (not isinstance(full, int) or full < 0):
        raise ConfigError("expect_full_length must be null or a nonnegative integer")
    if cfg["input"] is not None and not isinstance(cfg["input"], str):
        raise ConfigError("input must be a path or null")


# --- output helpers ---------------------------------------------------------------


def _clean(obj):
    """Make ``obj`` strict JSON: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def write_report(cfg, command, body, passed, out):
    report = {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "passed": bool(passed),
        **body,
    }
    write_json(os.path.join(out, "report.json"), report)
    return report


def _require_input(cfg, kind):
    path = cfg["input"]
    if path is None:
        return None
    if kind == "dir" and not os.path.isdir(path):
        raise ConfigError(f"input directory {path} does not exist")
    if kind == "file" and not os.path.isfile(path):
        raise ConfigError(f"input file {path} does not exist")
    return path


def _barcode_outputs(bc, out, tag, r_max, figures, title):
    write_json(os.path.join(out, f"barcode_{tag}.json"), bc.to_records())
    bc.write_csv(os.path.join(out, f"barcode_{tag}.csv"))
    with open(os.path.join(out, f"diagram_{tag}.svg"), "w") as fh:
        fh.write(ph.diagram_svg(bc, r_max=r_max))
    if figures:
        plotting.barcode_figure(bc, os.path.join(out, f"barcode_{tag}.png"), r_max=r_max, title=title)
        plotting.diagram_figure(bc, os.path.join(out, f"diagram_{tag}.png"), r_max=r_max, title=title)


# --- commands ---------------------------------------------------------------------


def cmd_synth(cfg, out):
    shape = cfg["shape"]
    if shape == "flow_patches":
        patches, params = synthetic_flow_patches(
            cfg["n_patches"], cfg["directions"], cfg["model_fraction"],
            noise_sigma=cfg["patch_noise"], seed=cfg["seed"])
        save_patches_csv(os.path.join(out, "patches.csv"), patches)
        write_rows_csv(os.path.join(out, "params.csv"), params, ["alpha", "theta"])
        body = {"files": ["patches.csv", "params.csv"], "n": len(patches)}
    else:
        X = models.sample_cloud(shape, cfg["n_points"], cfg["noise_sigma"], cfg["seed"])
        write_rows_csv(os.path.join(out, "cloud.csv"), X, [f"x{i}" for i in range(X.shape[1])])
        body = {"files": ["cloud.csv"], "n": len(X), "ambient_dim": X.shape[1]}
    return body, True


def cmd_ingest(cfg, out):
    directory = _require_input(cfg, "dir")
    if directory is None:
        raise ConfigError("ingest needs input=<directory of .flo files>")
    paths = flow_io.scan_flo_dir(directory)
    if not paths:
        raise ConfigError(f"no .flo files in {directory}")
    fields = [flow_io.read_flo_file(p) for p in paths]
    ps = flow_io.sample_patches(fields, cfg["n_patches"], cfg["seed"], cfg["sentinel_cutoff"])
    save_patches_csv(os.path.join(out, "patches.csv"), ps.vectors)
    with open(os.path.join(out, "provenance.csv"), "w") as fh:
        fh.write("field,row,col\n")
        for f, r, c in ps.provenance:
            fh.write(f"{int(f)},{int(r)},{int(c)}\n")
    files = [os.path.relpath(p, directory) for p in paths]
    return {"flo_files": files, "n_patches": len(ps.vectors)}, True


def _pipeline_patches(cfg):
    path = _require_input(cfg, "file")
    if path is not None:
        return load_patches_csv(path), path
    patches, _ = synthetic_flow_patches(cfg["n_patches"], cfg["directions"], cfg["model_fraction"],
                                        noise_sigma=cfg["patch_noise"], seed=cfg["seed"])
    return patches, "synthetic"


def _bin_landmarks(res, cfg):
    bins = []
    for b in range(cfg["n_bins"]):
        X = res.bin_points(b)
        idx = geometry.maxmin_sample_points(X, min(cfg["maxmin_m"], len(X)), cfg["maxmin_start"])
        bins.append(X[idx])
    return bins


def cmd_pipeline(cfg, out):
    patches, source = _pipeline_patches(cfg)
    res = run_pipeline(patches, q=cfg["q"], k=cfg["k"], p=cfg["p"], n_bins=cfg["n_bins"],
                       halfwidth=cfg["halfwidth"], subsample=cfg["subsample"], seed=cfg["seed"])
    save_coefficients_csv(os.path.join(out, "coefficients.csv"), res.coefficients)
    save_coefficients_csv(os.path.join(out, "core_coefficients.csv"), res.coefficients[res.core])
    save_patches_csv(os.path.join(out, "core.csv"), res.core_points())
    bins = _bin_landmarks(res, cfg)
    for b in range(cfg["n_bins"]):
        save_patches_csv(os.path.join(out, f"bin_{b:02d}.csv"), res.bin_points(b))
        save_patches_csv(os.path.join(out, f"bin_{b:02d}_maxmin.csv"), bins[b])
    fibers, _ = ex.angle_bin_fibers(bins, cfg["persistence_ratio"], cfg["primes"][0])
    if cfg["figures"]:
        plotting.projection_figure(res.coefficients[res.core], os.path.join(out, "core_projection.png"),
                                   title="core subset, DCT coordinates")
    body = {
        "source": source,
        "n_input": len(patches),
        "n_high_contrast": len(res.selected),
        "core_size": len(res.core),
        "bins": [{"theta": float(t), "members": len(m), "core": len(c)}
                 for t, m, c in zip(res.thetas, res.bin_members, res.bin_cores)],
        "fibers": fibers,
    }
    return body, True


def cmd_ph(cfg, out):
    path = _require_input(cfg, "file")
    if path is not None:
        X = geometry.as_cloud(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))
        source = path
    else:
        X = models.sample_cloud(cfg["shape"], cfg["n_points"], cfg["noise_sigma"], cfg["seed"])
        source = f"synthetic {cfg['shape']}"
    primes = cfg["primes"]
    if cfg["complex"] == "witness":
        barcodes, meta = ex.witness_barcodes(X, min(cfg["landmarks"], len(X)), cfg["nu"], cfg["r_max"],
                                            cfg["max_dim"], primes, cfg["maxmin_start"], cfg["method"],
                                            cfg["r_max_factor"])
        r_max = meta["r_max"]
    else:
        r_max = math.inf if cfg["r_max"] == "auto" else cfg["r_max"]
        filt = ph.vr_filtration(geometry.distance_matrix(X), r_max, cfg["max_dim"] + 1)
        barcodes = {p: ph.persistent_homology(filt, p, cfg["method"]).restrict(cfg["max_dim"]) for p in primes}
        if not math.isfinite(r_max):
            r_max = float(filt.scales.max())
        meta = {"n_points": len(X), "r_max": r_max, "simplices_by_dim": filt.count_by_dim()}
    results = {}
    passed = True
    for p, bc in barcodes.items():
        sig, _ = ph.betti_signature(bc, cfg["persistence_ratio"], r_max=r_max, max_dim=cfg["max_dim"])
        entry = {"signature": list(sig),
                 "windows": ex.betti_windows(bc, sig, r_hi=r_max),
                 "n_intervals": len(bc.intervals)}
        if cfg["expect_signature"] is not None:
            entry["expected"] = cfg["expect_signature"]
            entry["passed"] = list(sig) == list(cfg["expect_signature"])
            passed &= entry["passed"]
        results[str(p)] = entry
        _barcode_outputs(bc, out, f"p{p}", r_max, cfg["figures"], f"{source}, Z/{p}")
    return {"source": source, **meta, "primes": results}, passed


def _load_bins(directory, n_bins):
    bins = []
    for b in range(n_bins):
        path = os.path.join(directory, f"bin_{b:02d}_maxmin.csv")
        if not os.path.isfile(path):
            raise ConfigError(f"missing {path}; run the pipeline command first")
        bins.append(load_patches_csv(path))
    return bins


def cmd_zigzag(cfg, out):
    directory = _require_input(cfg, "dir")
    if directory is not None:
        bins = _load_bins(directory, cfg["n_bins"])
        source = directory
    else:
        _, bins = ex.torus_bins(cfg["n_patches"], cfg["seed"], cfg["k"], cfg["p"], cfg["q"],
                                cfg["n_bins"], cfg["halfwidth"], cfg["subsample"], cfg["maxmin_m"],
                                cfg["maxmin_start"])
        source = "synthetic flow torus patches"
    scale = cfg["zigzag_scale"]
    dom = None
    if scale == "auto":
        _, dom = ex.angle_bin_fibers(bins, cfg["persistence_ratio"], cfg["primes"][0])
    rep, barcodes, diagram = ex.fiber_zigzag(bins, scale, dom, cfg["primes"], cfg["zigzag_dim"])
    passed = True
    for p, zb in barcodes.items():
        write_json(os.path.join(out, f"zigzag_p{p}.json"), zb.to_records())
        with open(os.path.join(out, f"zigzag_p{p}.txt"), "w") as fh:
            fh.write(zb.render(diagram.labels))
        if cfg["figures"]:
            plotting.zigzag_figure(zb, os.path.join(out, f"zigzag_p{p}.png"), diagram.labels,
                                   f"H{zb.dim} zigzag over Z/{p}")
        entry = rep["primes"][str(p)]
        if cfg["expect_full_length"] is not None:
            others_short = all(b - a + 1 < zb.n_nodes for a, b, _ in zb.intervals if (a, b) != (0, zb.n_nodes - 1))
            entry["passed"] = entry["full_length"] == cfg["expect_full_length"] and others_short
            passed &= entry["passed"]
        else:
            entry.pop("passed", None)
    rep.pop("passed", None)
    return {"source": source, **rep}, passed


def cmd_verify(cfg, out):
    seed = cfg["seed"]
    results = {}
    figures = cfg["figures"]
    bins = doms = None
    for name in cfg["checks"]:
        if name == "quotient":
            r = ex.quotient_check(cfg["quotient_grid"])
        elif name in ("torus", "klein"):
            fn = ex.torus_signature if name == "torus" else ex.klein_signature
            r, bcs = fn(n_points=cfg["n_points"], noise_sigma=cfg["noise_sigma"], seed=seed,
                        n_landmarks=cfg["landmarks"], nu=cfg["nu"], r_max=cfg["r_max"],
                        primes=tuple(cfg["primes"]), persistence_ratio=cfg["persistence_ratio"],
                        max_dim=cfg["max_dim"], return_barcodes=True)
            for p, bc in bcs.items():
                _barcode_outputs(bc, out, f"{name}_p{p}", r["r_max"], figures, f"{name}, Z/{p}")
        elif name == "circle":
            r = ex.circle_calibration(seed=seed)
        elif name == "horizontal":
            r = ex.horizontal_circle(cfg["horizontal_patches"], seed, cfg["p"], cfg["q"],
                                     persistence_ratio=cfg["persistence_ratio"])
        elif name in ("fibers", "zigzag"):
            if bins is None:
                _, bins = ex.torus_bins(cfg["n_patches"], seed, cfg["k"], cfg["p"], cfg["q"], cfg["n_bins"],
                                        cfg["halfwidth"], cfg["subsample"], cfg["maxmin_m"], cfg["maxmin_start"])
                fib, doms = ex.angle_bin_fibers(bins, cfg["persistence_ratio"])
            if name == "fibers":
                r = fib
            else:
                try:
                    r, barcodes, diagram = ex.fiber_zigzag(bins, cfg["zigzag_scale"], doms, tuple(cfg["primes"]))
                except ValueError as exc:
                    r = {"error": str(exc), "passed": False}
                else:
                    for p, zb in barcodes.items():
                        with open(os.path.join(out, f"zigzag_p{p}.txt"), "w") as fh:
                            fh.write(zb.render(diagram.labels))
        elif name == "oracle":
            r = ex.oracle_equivalence(cfg["oracle_clouds"], tuple(cfg["primes"]), seed)
        elif name == "differential":
            r = ex.reduction_differential(cfg["differential_filtrations"], tuple(cfg["primes"]), seed)
        else:
            r = ex.flo_roundtrip(cfg["roundtrip_fields"], seed)
        results[name] = r
        print(f"{name:<13} {'PASS' if r['passed'] else 'FAIL'}")
    passed = all(r["passed"] for r in results.values())
    return {"checks": results}, passed


HANDLERS = {"synth": cmd_synth, "ingest": cmd_ingest, "pipeline": cmd_pipeline,
            "ph": cmd_ph, "zigzag": cmd_zigzag, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="flowtopo", description="Topology of optical flow patches.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with flat config keys")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    ap.add_argument("--version", action="version", version=f"flowtopo {__version__}")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args.config, args.overrides, args.seed, args.out)
        out = cfg["out"]
        os.makedirs(out, exist_ok=True)
        body, passed = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"flowtopo: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"flowtopo: pipeline stage {exc.stage} failed: {exc}", file=sys.stderr)
        return 1
    except (flow_io.FlowFormatError, flow_io.NoValidAnchors, ph.SizeExplosion, zz.EmptyBin,
            geometry.KTooLarge, geometry.DimensionMismatch) as exc:
        print(f"flowtopo: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    write_report(cfg, args.command, body, passed, out)
    print(f"{args.command}: {'PASS' if passed else 'FAIL'} (report in {os.path.join(out, 'report.json')})")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
