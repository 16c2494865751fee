"""Pipeline stages shared by the CLI subcommands and the one-pass runner."""

from __future__ import annotations

import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from .mca import build_stacks
from .slcsim import render_scene
from .tomography import (UNIT_NOTE, DepthGrid, SingularSystemError, assemble_tomogram,
                         ambiguity_period, build_steering, tomographic_resolution,
                         vertical_wavenumbers)
from .tracking import bresenham, track_pixels
from .validation import TopoProfile, surface_ridge, topo_overlay_score

log = logging.getLogger(__name__)

STAGES = ("simulate", "mca", "track", "focus", "georef", "report")


class StageError(RuntimeError):
    """A pipeline stage could not run; the message names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


# ---------------------------------------------------------------------- stages

def run_simulate(scene, geom, out, snr_db=None, seed=None, workers=1) -> Path:
    g = mio.load_geometry(geom)
    sc = mio.load_scene(scene, g)
    snr = sc.snr_db if snr_db is None else snr_db
    sd = sc.seed if seed is None else seed
    img = render_scene(sc.specs, g, sc.canvas, snr, sd, sc.segments, workers)
    mio.write_slc(out, img, g)
    return Path(out)


def run_mca(src, plan, outdir, workers=1) -> Path:
    img, g = mio.read_slc(src)
    p = mio.load_plan(plan, g, img)
    master, slave = build_stacks(img, p, workers)
    return mio.write_stacks(outdir, master, slave, g, source=Path(src).name)


def parse_line(text: str) -> tuple[int, int, int, int]:
    try:
        a, b = text.split(":")
        r0, c0 = (int(v) for v in a.split(","))
        r1, c1 = (int(v) for v in b.split(","))
    except ValueError:
        raise ValueError(f"line must look like 'r0,c0:r1,c1', got {text!r}") from None
    return r0, c0, r1, c1


def run_track(stacks, line, cfg, out, workers=1) -> Path:
    master, slave, _ = mio.read_stacks(stacks)
    tc = mio.load_track_config(cfg)
    r0, c0, r1, c1 = parse_line(line)
    rows, cols = master.images[0].pixels.shape
    for r, c in ((r0, c0), (r1, c1)):
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"line endpoint ({r},{c}) outside the {rows}x{cols} image")
    series = track_pixels(master, slave, bresenham(r0, c0, r1, c1), tc, workers)
    mio.write_shifts(out, series)
    return Path(out)


def _steering(sonic_path, grid_path, k):
    sonic = mio.load_sonic(sonic_path, k)
    kz = vertical_wavenumbers(sonic)
    grid, partial = mio.load_grid(grid_path)
    if grid is None:
        probe = build_steering(kz, DepthGrid(0.0, 1.0, 2), sonic.time_scale)
        grid = DepthGrid.full_period(partial["z_min"], ambiguity_period(probe), partial["n_bins"])
    return sonic, build_steering(kz, grid, sonic.time_scale)


def run_focus(shifts, sonic, grid, out, mode="matched", tikhonov=1e-6, floor=0.8,
              normalize=False, pgm=None) -> Path:
    series = mio.read_shifts(shifts)
    if not series:
        raise ValueError(f"{shifts}: no shift rows")
    _, A = _steering(sonic, grid, series[0].k)
    tomo = assemble_tomogram(series, A, mode, tikhonov, floor, normalize)
    mio.write_tomogram_csv(out, tomo)
    if pgm:
        mio.write_pgm(pgm, tomo)
    return Path(out)


def run_georef(tomo, affine, out) -> Path:
    t = mio.read_tomogram_csv(tomo)
    c = mio.load_affine(affine)
    px, d = np.meshgrid(t.track_axis, t.depth_axis)
    lat = c[0] + c[1] * px + c[2] * d
    lon = c[3] + c[4] * px + c[5] * d
    mio.write_series_csv(out, "lat,lon,depth_m,magnitude", lat.T.ravel(), lon.T.ravel(),
                         d.T.ravel(), t.magnitudes.T.ravel())
    return Path(out)


# ---------------------------------------------------------------------- runner

def _r(x: float) -> float | None:
    """Round for the report so it is stable across BLAS/FFT builds."""
    x = float(x)
    return None if not math.isfinite(x) else float(f"{x:.6g}")


@dataclass
class PipelineConfig:
    path: Path
    geometry: Path
    scene: Path
    plan: Path
    track: Path
    sonic: Path
    grid: Path
    line: str
    mode: str = "matched"
    tikhonov: float = 1e-6
    floor: float = 0.8
    normalize: bool = False
    seed: int = 0
    snr_db: float | None = None
    affine: Path | None = None
    topo: Path | None = None
    ridge_threshold: float = 0.5
    outdir: Path = Path("out")
    workers: int = 1
    inputs: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        kv = mio.KV.load(path)
        req = mio.REQUIRED
        cfg = cls(
            path=Path(path),
            geometry=kv.path_of("geometry", req), scene=kv.path_of("scene", req),
            plan=kv.path_of("plan", req), track=kv.path_of("track", req),
            sonic=kv.path_of("sonic", req), grid=kv.path_of("grid", req),
            line=kv.str("line", req), mode=kv.str("mode", "matched"),
            tikhonov=kv.float("tikhonov", 1e-6), floor=kv.float("correlation_floor", 0.8),
            normalize=kv.bool("normalize", False), seed=kv.int("seed", 0),
            snr_db=kv.float("snr_db", None), affine=kv.path_of("affine", None),
            topo=kv.path_of("topo", None), ridge_threshold=kv.float("ridge_threshold", 0.5),
            outdir=kv.path_of("outdir", "out"), workers=kv.int("workers", 1),
        )
        if isinstance(cfg.outdir, str):
            cfg.outdir = cfg.path.parent / cfg.outdir
        unknown = set(kv.values) - kv.used
        if unknown:
            raise mio.FormatError(f"{path}: unknown keys {sorted(unknown)}")
        if cfg.mode not in ("matched", "pinv"):
            raise mio.FormatError(f"{path}: mode must be 'matched' or 'pinv'")
        parse_line(cfg.line)
        return cfg

    def stage_inputs(self) -> dict[str, list[tuple[str, Path]]]:
        s = {
            "simulate": [("geometry", self.geometry), ("scene", self.scene)],
            "mca": [("plan", self.plan)],
            "track": [("track", self.track)],
            "focus": [("sonic", self.sonic), ("grid", self.grid)],
            "georef": [("affine", self.affine)] if self.affine else [],
            "report": [("topo", self.topo)] if self.topo else [],
        }
        return s

    def check(self) -> None:
        for stage, items in self.stage_inputs().items():
            for key, p in items:
                if not p.exists():
                    raise StageError(stage, f"input '{key}' not found: {p}")
        # k must agree between the plan, the scene segments and the sonic baselines
        plan = mio.KV.load(self.plan)
        k = plan.int("n_sub", mio.REQUIRED)
        g = mio.load_geometry(self.geometry)
        sc = mio.load_scene(self.scene, g)
        if sc.segments is not None and sc.segments != k:
            raise StageError("simulate", f"scene segments = {sc.segments} but plan n_sub = {k}")
        try:
            mio.load_sonic(self.sonic, k)
        except mio.FormatError as exc:
            raise StageError("focus", str(exc)) from None


def _rel(p: Path, base: Path) -> str:
    return os.path.relpath(Path(p).resolve(), base.resolve())


def plan_commands(cfg: PipelineConfig) -> list[tuple[str, list[str], list[str]]]:
    """(stage, argv, outputs) with paths relative to the output directory."""
    o = cfg.outdir
    rel = lambda p: _rel(p, o)  # noqa: E731
    cmds = [
        ("simulate", ["simulate", "--scene", rel(cfg.scene), "--geom", rel(cfg.geometry),
                      "--out", "scene.slc", "--seed", str(cfg.seed)]
         + (["--snr", repr(cfg.snr_db)] if cfg.snr_db is not None else []), ["scene.slc"]),
        ("mca", ["mca", "--in", "scene.slc", "--plan", rel(cfg.plan), "--outdir", "stacks"],
         ["stacks/manifest.json"]),
        ("track", ["track", "--stacks", "stacks", "--line", cfg.line, "--cfg", rel(cfg.track),
                   "--out", "shifts.csv"], ["shifts.csv"]),
        ("focus", ["focus", "--shifts", "shifts.csv", "--sonic", rel(cfg.sonic), "--grid", rel(cfg.grid),
                   "--mode", cfg.mode, "--tikhonov", repr(cfg.tikhonov), "--floor", repr(cfg.floor),
                   "--out", "tomo.csv", "--pgm", "tomo.pgm"] + (["--normalize"] if cfg.normalize else []),
         ["tomo.csv", "tomo.pgm", "tomo.pgm.txt"]),
    ]
    if cfg.affine:
        cmds.append(("georef", ["georef", "--tomo", "tomo.csv", "--affine", rel(cfg.affine),
                                "--out", "geo.csv"], ["geo.csv"]))
    return cmds


def _dispatch(argv: list[str], cwd: Path, workers: int) -> None:
    """Run one stage command as the CLI would, resolving paths against ``cwd``."""
    from .cli import build_parser

    args = build_parser().parse_args(argv)
    prev = os.getcwd()
    os.chdir(cwd)
    try:
        args.workers = workers
        args.func(args)
    finally:
        os.chdir(prev)


def _report(cfg: PipelineConfig) -> dict:
    o = cfg.outdir
    series = mio.read_shifts(o / "shifts.csv")
    tomo = mio.read_tomogram_csv(o / "tomo.csv", cfg.mode)
    sonic, A = _steering(cfg.sonic, cfg.grid, series[0].k)
    ridge = surface_ridge(tomo, cfg.ridge_threshold)
    peaks = tomo.depth_axis[np.argmax(tomo.magnitudes, axis=0)]
    tracked = [s for s in series if np.all(np.isfinite(s.shifts))]
    aperture = max(sonic.baselines) - min(sonic.baselines)
    rep = {
        "k": series[0].k,
        "pixels": len(series),
        "pixels_tracked": len(tracked),
        "mode": cfg.mode,
        "depth_bins": int(tomo.depth_axis.size),
        "depth_range_m": [_r(tomo.depth_axis[0]), _r(tomo.depth_axis[-1])],
        "ambiguity_period_m": _r(ambiguity_period(A)),
        "sound_wavelength_m": _r(sonic.wavelength_sound),
        "tomographic_resolution_m": _r(tomographic_resolution(sonic, aperture, sonic.slant_ranges[0])),
        "unit_note": UNIT_NOTE,
        "peak_depth_m": [_r(z) if tomo.magnitudes[:, i].max() > 0 else None for i, z in enumerate(peaks)],
        "ridge_depth_m": [_r(z) for z in ridge.depths],
    }
    if cfg.topo:
        topo = TopoProfile.from_csv(cfg.topo)
        score = topo_overlay_score(ridge, topo)
        bin_m = float(abs(tomo.depth_axis[1] - tomo.depth_axis[0]))
        rep["topo"] = {"rmse_m": _r(score["rmse"]), "bias_m": _r(score["bias"]), "n": score["n"],
                       "rmse_bins": _r(score["rmse"] / bin_m)}
    return rep


def _versions() -> dict:
    import scipy

    return {"mmtomo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_pipeline(config, outdir=None, dry_run: bool = False, printer=print) -> dict | None:
    cfg = PipelineConfig.load(config)
    if outdir is not None:
        cfg.outdir = Path(outdir)
    cfg.check()
    cmds = plan_commands(cfg)
    if dry_run:
        printer(f"# pipeline plan, commands run from {cfg.outdir}")
        for stage, argv, outs in cmds:
            printer(f"{stage}: mmtomo {' '.join(argv)}")
        printer("report: write report.json and manifest.json")
        return None
    o = cfg.outdir
    o.mkdir(parents=True, exist_ok=True)
    stages = []
    for stage, argv, outs in cmds:
        t0 = time.perf_counter()
        try:
            _dispatch(argv, o, cfg.workers)
        except FileNotFoundError as exc:
            raise StageError(stage, f"missing input: {exc.filename}") from None
        except (ValueError, SingularSystemError) as exc:
            raise StageError(stage, str(exc)) from None
        stages.append({
            "stage": stage,
            "argv": argv,
            "seconds": round(time.perf_counter() - t0, 3),
            "outputs": {p: mio.sha256_file(o / p) for p in outs},
        })
        log.info("stage %s done in %.2f s", stage, stages[-1]["seconds"])
    t0 = time.perf_counter()
    rep = _report(cfg)
    (o / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    stages.append({"stage": "report", "argv": [], "seconds": round(time.perf_counter() - t0, 3),
                   "outputs": {"report.json": mio.sha256_file(o / "report.json")}})
    inputs = {}
    for stage, items in cfg.stage_inputs().items():
        for key, p in items:
            inputs[key] = {"path": _rel(p, o), "sha256": mio.sha256_file(p)}
    inputs["config"] = {"path": _rel(cfg.path, o), "sha256": mio.sha256_file(cfg.path)}
    manifest = {"seed": cfg.seed, "cwd": ".", "inputs": inputs, "versions": _versions(),
                "stages": stages}
    (o / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
