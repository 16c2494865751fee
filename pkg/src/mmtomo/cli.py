"""Command-line entry point ``mmtomo``.

Errors exit nonzero with one stderr line ``mmtomo: error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import pipeline as pl
from .tomography import UNIT_NOTE, SingularSystemError, sound_wavelength, tomographic_resolution
from .validation import TopoProfile, VibrationStream, compare_streams, surface_ridge, topo_overlay_score

ERROR_PREFIX = "mmtomo: error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"{ERROR_PREFIX}[usage]: {message}\n")
        raise SystemExit(2)


def _band(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _cmd_simulate(a):
    pl.run_simulate(a.scene, a.geom, a.out, a.snr, a.seed, a.workers)


def _cmd_mca(a):
    pl.run_mca(a.input, a.plan, a.outdir, a.workers)


def _cmd_track(a):
    pl.run_track(a.stacks, a.line, a.cfg, a.out, a.workers)


def _cmd_focus(a):
    pl.run_focus(a.shifts, a.sonic, a.grid, a.out, a.mode, a.tikhonov, a.floor, a.normalize, a.pgm)


def _cmd_georef(a):
    pl.run_georef(a.tomo, a.affine, a.out)


def _cmd_validate_topo(a):
    from .io import read_tomogram_csv

    ridge = surface_ridge(read_tomogram_csv(a.tomo), a.threshold)
    score = topo_overlay_score(ridge, TopoProfile.from_csv(a.topo))
    _emit(score, a.out)


def _cmd_validate_stream(a):
    from .io import write_series_csv

    sa = VibrationStream.from_csv(a.a, "a")
    sb = VibrationStream.from_csv(a.b, "b")
    band = _band(a.band) if a.band else None
    cmp_ = compare_streams(sa, sb, band)
    coh = cmp_.in_band(band) if band else cmp_.coherence
    summary = {
        "error_mean": float(np.mean(cmp_.time_error)),
        "error_rms": float(np.sqrt(np.mean(cmp_.time_error**2))),
        "coherence_min": float(coh.min()),
        "coherence_mean": float(coh.mean()),
        "lag_samples": cmp_.lag_samples,
    }
    if a.prefix:
        t = np.arange(cmp_.time_error.size) / sa.sample_rate
        write_series_csv(f"{a.prefix}_error.csv", "t_s,error", t, cmp_.time_error)
        write_series_csv(f"{a.prefix}_spectra.csv", "freq_hz,mag_a,mag_b", cmp_.freqs,
                         cmp_.spectrum_a, cmp_.spectrum_b)
        write_series_csv(f"{a.prefix}_coherence.csv", "freq_hz,coherence", cmp_.coherence_freqs,
                         cmp_.coherence)
    _emit(summary, a.out)


def _cmd_resolution(a):
    lam = sound_wavelength(a.wave_speed, a.probe_frequency)
    _emit({"sound_wavelength_m": lam,
           "tomographic_resolution_m": tomographic_resolution(lam, a.aperture, a.range),
           "unit_note": UNIT_NOTE}, None)


def _cmd_pipeline(a):
    pl.run_pipeline(a.config, a.outdir, a.dry_run)


def _emit(obj: dict, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmtomo", description="Micro-motion SAR tomography pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--workers", type=int, default=1, help="threads used inside a stage")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a scene file to an SLC")
    s.add_argument("--scene", required=True)
    s.add_argument("--geom", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--snr", type=float, default=None, help="override scene snr_db")
    s.add_argument("--seed", type=int, default=None, help="override scene seed")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("mca", help="split an SLC into master/slave sub-aperture stacks")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--plan", required=True)
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=_cmd_mca)

    s = sub.add_parser("track", help="track pixels on a line through the stacks")
    s.add_argument("--stacks", required=True)
    s.add_argument("--line", required=True, help="r0,c0:r1,c1")
    s.add_argument("--cfg", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_track)

    s = sub.add_parser("focus", help="focus shift series into a tomogram")
    s.add_argument("--shifts", required=True)
    s.add_argument("--sonic", required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--mode", choices=("matched", "pinv"), default="matched")
    s.add_argument("--tikhonov", type=float, default=1e-6)
    s.add_argument("--floor", type=float, default=0.8, help="minimum correlation quality")
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--out", required=True, help="tomogram CSV")
    s.add_argument("--pgm", default=None, help="also write a 16-bit PGM plus sidecar")
    s.set_defaults(func=_cmd_focus)

    s = sub.add_parser("georef", help="map tomogram (track px, depth) to lat/lon")
    s.add_argument("--tomo", required=True)
    s.add_argument("--affine", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_georef)

    s = sub.add_parser("validate", help="topographic or stream validation")
    vs = s.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    t = vs.add_parser("topo")
    t.add_argument("--tomo", required=True)
    t.add_argument("--topo", required=True, help="CSV pos_m,height_m")
    t.add_argument("--threshold", type=float, default=0.5)
    t.add_argument("--out", default=None)
    t.set_defaults(func=_cmd_validate_topo)
    t = vs.add_parser("stream")
    t.add_argument("--a", required=True, help="reference CSV t_s,value")
    t.add_argument("--b", required=True, help="candidate CSV t_s,value")
    t.add_argument("--band", default=None, help="lo,hi in Hz")
    t.add_argument("--prefix", default=None, help="write <prefix>_error/_spectra/_coherence.csv")
    t.add_argument("--out", default=None)
    t.set_defaults(func=_cmd_validate_stream)

    s = sub.add_parser("resolution", help="sound wavelength and depth resolution")
    s.add_argument("--wave-speed", type=float, default=972.0)
    s.add_argument("--probe-frequency", type=float, default=200.0)
    s.add_argument("--aperture", type=float, default=42_000.0)
    s.add_argument("--range", type=float, default=650_000.0)
    s.set_defaults(func=_cmd_resolution)

    s = sub.add_parser("pipeline", help="run simulate..report from one config")
    s.add_argument("--config", required=True)
    s.add_argument("--outdir", default=None, help="override the config outdir")
    s.add_argument("--dry-run", action="store_true")
    s.set_defaults(func=_cmd_pipeline)
    return p


def _kind(exc: BaseException) -> str:
    from .io import FormatError

    if isinstance(exc, pl.StageError):
        return "stage"
    if isinstance(exc, FormatError):
        return "format"
    if isinstance(exc, (SingularSystemError, np.linalg.LinAlgError)):
        return "numeric"
    if isinstance(exc, OSError):
        return "io"
    return "input"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError, np.linalg.LinAlgError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        if isinstance(exc, OSError) and exc.filename and str(exc.filename) not in msg:
            msg = f"{msg}: {exc.filename}"
        sys.stderr.write(f"{ERROR_PREFIX}[{_kind(exc)}]: {msg}\n")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
