"""Command-line front end: ``shapepix <command> [options]``.

Every command reads an optional JSON config, applies command-line
overrides and writes its results into ``--out``: rasters as 16-bit PGM and
CSV, measurements and tables as CSV, reports as JSON.  ``--figures`` adds
PNG renderings of the same data.

Exit codes: 0 success, 2 configuration error, 3 non-convergence (outputs
are kept), 4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .cheeger import (CheegerError, check_reducible, cheeger_config, cheeger_ratio,
                      find_lambda_star, reduced_domain, reduced_kernel,
                      reducibility_boundary_sweep, solve_cheeger)
from .kernels import KernelError, KernelFamily
from .sampling import MeasurementSet, sample_shape
from .shapes import ShapeError, rasterize, shape_from_dict
from .solver import SolverConfig, reconstruct
from .verify import (baseline_interpolate, binarity_report, measurement_psnr, mse,
                     pixel_mismatch, psnr, threshold)

log = logging.getLogger("shapepix")

EXIT_OK, EXIT_CONFIG, EXIT_UNCONVERGED, EXIT_INVARIANT = 0, 2, 3, 4

DEFAULTS = {
    "shape": {"type": "circle", "center": [0.5, 0.5], "radius": 0.3},
    "kernel": {"family": "box", "dilation": 1.0},
    "m": 16,
    "N": 300,
    "seed": 0,
    "threads": 1,
    "solver": {},
}


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        base = path.parent
        for key in ("measurements", "image"):
            if isinstance(user.get(key), str):
                user[key] = str((base / user[key]).resolve())
        for key, val in user.items():
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.n is not None:
        cfg["N"] = args.n
    if args.m is not None:
        cfg["m"] = args.m
    if args.kernel is not None:
        cfg["kernel"] = {"family": args.kernel, "dilation": cfg["kernel"].get("dilation", 1.0)}
    if args.max_iters is not None:
        cfg["solver"]["max_iters"] = args.max_iters
    if args.tol is not None:
        cfg["solver"]["pocs_tol"] = args.tol
    for key in ("measurements", "image"):
        if isinstance(cfg.get(key), str) and not Path(cfg[key]).is_file():
            raise ConfigError(f"{key} file {cfg[key]} does not exist")
    return cfg


def _family(cfg) -> KernelFamily:
    return KernelFamily.from_dict(cfg["kernel"])


def _solver_config(cfg, base=None) -> SolverConfig:
    data = dict(base.to_dict() if base is not None else {})
    data.update(cfg.get("solver", {}))
    data.pop("g", None)
    return SolverConfig.from_dict(data)


def config_hash(data) -> str:
    text = json.dumps(io._jsonable(data), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _measurements(cfg) -> MeasurementSet:
    """Measurements from a CSV, inline values, or by sampling the configured shape."""
    family = _family(cfg)
    src = cfg.get("measurements")
    if isinstance(src, str):
        return io.read_measurements_csv(src, family)
    if src is not None:
        return MeasurementSet(np.asarray(src, dtype=float), family)
    return sample_shape(shape_from_dict(cfg["shape"]), family, cfg["m"], cfg["N"])


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_solution(rep, pocs_tol):
    if rep.converged:
        if rep.image.min() < 0:
            raise InvariantError(f"negative pixel {rep.image.min():.3g} in a converged solve")
        if rep.residual > pocs_tol:
            raise InvariantError(f"converged solve left residual {rep.residual:.3g}")


def _write_raster(out: Path, stem, image, figures, title=None):
    io.write_pgm(out / f"{stem}.pgm", image)
    io.write_raster_csv(out / f"{stem}.csv", image)
    if figures:
        from .plotting import plot_raster
        plot_raster(out / f"{stem}.png", image, title=title)


# ---------------------------------------------------------------------------
# commands


def cmd_sample(args, cfg) -> int:
    out = _out(args)
    meas = _measurements(cfg)
    io.write_measurements_csv(out / "measurements.csv", meas)
    io.write_pgm(out / "measurements.pgm", meas.values, vmax=1.0)
    io.write_json(out / "sample.json", {"config": cfg, "m": meas.m,
                                         "kernel": meas.family.to_dict(),
                                         "min": meas.values.min(), "max": meas.values.max()})
    if args.figures:
        from .plotting import plot_measurements
        plot_measurements(out / "measurements.png", meas.values, title=f"{meas.m}x{meas.m}")
    print(f"wrote {meas.m}x{meas.m} measurements to {out}")
    return EXIT_OK


def cmd_reconstruct(args, cfg) -> int:
    out = _out(args)
    meas = _measurements(cfg)
    scfg = _solver_config(cfg)
    rep = reconstruct(meas, cfg["N"], scfg)
    _write_raster(out, "image", rep.image, args.figures)
    report = {"config": cfg, "solver": scfg.to_dict(), "report": rep.to_dict(),
              "binarity": binarity_report(rep.image).to_dict()}
    io.write_json(out / "report.json", report)
    if args.figures:
        from .plotting import plot_history
        plot_history(out / "tv_history.png", rep.tv_history, "TV", scfg.record_every)
    _check_solution(rep, scfg.pocs_tol)
    print(f"iterations={rep.iterations} converged={rep.converged} "
          f"residual={rep.residual:.3g} tv={rep.objective:.6g}")
    return EXIT_OK if rep.converged else EXIT_UNCONVERGED


def _weights(cfg, rho):
    lam = cfg.get("lambda")
    if lam is None:
        return np.full(rho, 1.0 / rho)
    lam = np.asarray(lam, dtype=float)
    if lam.size != rho or np.any(lam < 0) or lam.sum() <= 0:
        raise ConfigError(f"lambda needs {rho} non-negative weights")
    return lam / lam.sum()


def cmd_cheeger(args, cfg) -> int:
    """Single-constraint solve.  ``"f": "uniform"`` uses a constant kernel on the full square."""
    out = _out(args)
    N = cfg["N"]
    scfg = _solver_config(cfg, cheeger_config())
    if cfg.get("f") == "uniform":
        f = np.full((N, N), 1.0 / N**2)
        mask = np.ones((N, N), dtype=bool)
        lam = None
    else:
        meas = _measurements(cfg)
        kernel = meas.kernel(N)
        red = reduced_domain(meas, kernel)
        lam = _weights(cfg, red.rho)
        f = reduced_kernel(meas, kernel, red, lam)
        mask = red.mask
    rep = solve_cheeger(f, mask, cfg=scfg)
    ratio = cheeger_ratio(rep.image, f, mask, scfg.free_boundary, scfg.closed)
    _write_raster(out, "cheeger", rep.image, args.figures)
    io.write_raster_csv(out / "kernel_raster.csv", f)
    io.write_json(out / "cheeger.json", {"config": cfg, "lambda": lam, "ratio": ratio,
                                          "ratio_unit_square": ratio / N,
                                          "report": rep.to_dict()})
    print(f"ratio={ratio / N:.6g} (unit square) iterations={rep.iterations} "
          f"converged={rep.converged}")
    return EXIT_OK if rep.converged else EXIT_UNCONVERGED


def cmd_reduce_check(args, cfg) -> int:
    out = _out(args)
    meas = _measurements(cfg)
    opts = cfg.get("reduce", {})
    scfg = _solver_config(cfg, cheeger_config(tau0=0.1, sigma0=1.2, max_iters=5000))
    rep = check_reducible(meas, N=cfg["N"], density=int(opts.get("density", 9)),
                          tol=float(opts.get("tol", 1e-2)), cfg=scfg, seed=cfg["seed"])
    io.write_json(out / "reducibility.json", {"config": cfg, "report": rep.to_dict()})
    print(f"reducible={rep.reducible} witness_index={rep.violating_index}")
    return EXIT_OK


def cmd_lambda_star(args, cfg) -> int:
    out = _out(args)
    meas = _measurements(cfg)
    opts = cfg.get("lambda_star", {})
    res = find_lambda_star(meas, N=cfg["N"], tol=float(opts.get("tol", 1e-4)),
                           max_iter=int(opts.get("max_iter", 80)), seed=cfg["seed"])
    _write_raster(out, "cheeger", res.solution.image, args.figures)
    io.write_json(out / "lambda_star.json", {"config": cfg, "result": res.to_dict()})
    print(f"found={res.found} residual={res.residual:.3g}")
    return EXIT_OK if res.found else EXIT_UNCONVERGED


def cmd_sweep(args, cfg) -> int:
    out = _out(args)
    opts = cfg.get("sweep", {})
    family = _family(cfg)
    grid = int(opts.get("grid", 4))
    N = int(opts.get("N", 64))
    density = int(opts.get("density", 4))
    scfg = _solver_config(cfg, cheeger_config(tau0=0.1, sigma0=1.2, max_iters=5000))
    tables = reducibility_boundary_sweep(family, grid=grid, N=N, density=density, cfg=scfg)
    h = config_hash(scfg.to_dict())
    rows = []
    for ia, a in enumerate(tables.grid):
        for ib, b in enumerate(tables.grid):
            rows.append([family.family, grid, N, h, a, b, tables.Y[ia, ib], tables.Z[ia, ib]])
    io.write_table_csv(out / "thresholds.csv",
                       ["family", "grid", "N", "config_hash", "a", "b", "Y", "Z"], rows)
    if args.figures:
        from .plotting import plot_table
        plot_table(out / "Y.png", tables.Y, tables.grid, "Y")
        plot_table(out / "Z.png", tables.Z, tables.grid, "Z")
    print(f"wrote {grid}x{grid} threshold tables to {out}")
    return EXIT_OK


def _read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return io.read_pgm(path)
    if path.suffix.lower() == ".csv":
        return io.read_raster_csv(path)
    raise ConfigError(f"unsupported image format {path.suffix!r}")


def cmd_eval(args, cfg) -> int:
    """Table-style comparison of a reconstruction and the interpolation baseline."""
    out = _out(args)
    N = cfg["N"]
    truth = rasterize(shape_from_dict(cfg["shape"]), N)
    meas = _measurements(cfg)
    if cfg.get("image"):
        image = _read_image(cfg["image"])
    else:
        rep = reconstruct(meas, N, _solver_config(cfg))
        image = rep.image
    if image.shape != (N, N):
        raise ConfigError(f"image is {image.shape}, expected {(N, N)}")
    rows = []
    for name, img in (("proposed", image), ("interpolation", baseline_interpolate(meas, N))):
        rows.append([name, psnr(threshold(img), truth), measurement_psnr(img, meas),
                     mse(threshold(img), truth), pixel_mismatch(img, truth),
                     binarity_report(img).is_bilevel])
    header = ["method", "image_psnr_db", "measurement_psnr_db", "mse", "mismatch", "is_bilevel"]
    io.write_table_csv(out / "table.csv", header, rows)
    io.write_json(out / "eval.json", {"config": cfg, "rows": [dict(zip(header, r)) for r in rows]})
    for r in rows:
        print(",".join(str(io._cell(v)) for v in r))
    return EXIT_OK


def _mc_trial(job):
    shape, family, m, N, solver = job
    truth = rasterize(shape_from_dict(shape), N)
    meas = sample_shape(shape_from_dict(shape), family, m, N)
    rep = reconstruct(meas, N, SolverConfig.from_dict(solver))
    return mse(threshold(rep.image), truth), pixel_mismatch(rep.image, truth), rep.converged


def cmd_montecarlo(args, cfg) -> int:
    """Random circle centres, MSE of the thresholded reconstruction against ``m``."""
    out = _out(args)
    opts = cfg.get("montecarlo", {})
    r = float(opts.get("radius", 0.3))
    n = int(opts.get("trials", 5))
    ms = [int(v) for v in opts.get("m_values", list(range(6, 21)))]
    N = cfg["N"]
    if not 0 < r < 0.5:
        raise ConfigError("radius must lie in (0, 0.5)")
    rng = np.random.default_rng(cfg["seed"])
    centers = rng.uniform(r, 1.0 - r, size=(n, 2))
    solver = _solver_config(cfg).to_dict()
    solver.pop("g", None)
    jobs = [({"type": "circle", "center": list(c), "radius": r}, cfg["kernel"], m, N, solver)
            for m in ms for c in centers]
    threads = max(1, int(cfg.get("threads", 1)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_mc_trial, jobs))
    else:
        results = [_mc_trial(j) for j in jobs]
    rows, summary = [], []
    unconverged = 0
    for (shape, _, m, _, _), (e, mis, conv) in zip(jobs, results):
        rows.append([m, shape["center"][0], shape["center"][1], e, mis, conv])
        unconverged += not conv
    io.write_table_csv(out / "trials.csv", ["m", "center_x", "center_y", "mse", "mismatch",
                                            "converged"], rows)
    for m in ms:
        sel = [row for row in rows if row[0] == m]
        summary.append([m, float(np.mean([s[3] for s in sel])), float(np.mean([s[4] for s in sel]))])
    io.write_table_csv(out / "mse_vs_m.csv", ["m", "mean_mse", "mean_mismatch"], summary)
    io.write_json(out / "montecarlo.json", {"config": cfg, "centers": centers,
                                             "unconverged": unconverged})
    if args.figures:
        from .plotting import plot_curve
        plot_curve(out / "mse_vs_m.png", [s[0] for s in summary],
                   {f"r={r}": [s[1] for s in summary]}, "m", "MSE")
    for s in summary:
        print(f"m={s[0]} mse={s[1]:.3g} mismatch={s[2]:.3%}")
    return EXIT_OK if unconverged == 0 else EXIT_UNCONVERGED


COMMANDS = {
    "sample": (cmd_sample, "measure a shape with a kernel"),
    "reconstruct": (cmd_reconstruct, "minimize TV subject to the measurements"),
    "cheeger": (cmd_cheeger, "solve a single-constraint Cheeger problem"),
    "reduce-check": (cmd_reduce_check, "test the reducibility condition"),
    "lambda-star": (cmd_lambda_star, "search the weights whose Cheeger solution fits the data"),
    "sweep": (cmd_sweep, "tabulate 2x2 reducibility thresholds"),
    "eval": (cmd_eval, "compare a reconstruction with the interpolation baseline"),
    "montecarlo": (cmd_montecarlo, "random circles, error against grid size"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker processes for montecarlo")
    common.add_argument("--n", type=int, help="raster side N")
    common.add_argument("--m", type=int, help="pixel grid side m")
    common.add_argument("--kernel", help="kernel family: box, bilinear or biquadratic")
    common.add_argument("--max-iters", type=int, dest="max_iters")
    common.add_argument("--tol", type=float, help="measurement residual tolerance")
    common.add_argument("--figures", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="shapepix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args)
        return func(args, cfg)
    except (ConfigError, KernelError, ShapeError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (CheegerError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
