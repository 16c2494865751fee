"""File formats: SLC binary, key = value configs, scene files and CSV exports."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import RadarGeometry, TargetState
from .image import Canvas, ComplexImage
from .mca import SubAperturePlan, SubApertureStack
from .oscillator import SpringParams, Trajectory, integrate_forced, linear_trajectory
from .slcsim import ScattererSpec
from .tomography import DepthGrid, SonicParams, Tomogram
from .tracking import ShiftSeries, TrackConfig


class FormatError(ValueError):
    """Malformed input file; message carries ``path:line`` when known."""


# --------------------------------------------------------------------------- SLC

SLC_MAGIC = b"SLC1"
SLC_VERSION = 1
GEOMETRY_KEYS = (
    "wavelength_em", "platform_velocity", "reference_range", "antenna_length",
    "sample_spacing", "pulse_count", "incidence_angle_deg", "chirp_bandwidth",
    "doppler_bandwidth", "prf", "duration",
)
_GEOM_FIELDS = (
    "wavelength_em", "platform_velocity", "reference_range", "antenna_length",
    "sample_spacing_along_track", "pulse_count", "incidence_angle", "chirp_bandwidth",
    "doppler_bandwidth", "prf", "acquisition_duration",
)
_HEADER = struct.Struct("<4sHII" + "d" * (2 + len(_GEOM_FIELDS)))


def write_slc(path, img: ComplexImage, geom: RadarGeometry) -> None:
    header = _HEADER.pack(SLC_MAGIC, SLC_VERSION, img.rows, img.cols, img.range_spacing,
                          img.azimuth_spacing, *(float(getattr(geom, f)) for f in _GEOM_FIELDS))
    payload = np.ascontiguousarray(img.pixels, dtype="<c8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_slc(path) -> tuple[ComplexImage, RadarGeometry]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated SLC header")
    vals = _HEADER.unpack_from(data)
    magic, version, rows, cols = vals[:4]
    if magic != SLC_MAGIC:
        raise FormatError(f"{path}: bad SLC magic {magic!r}")
    if version != SLC_VERSION:
        raise FormatError(f"{path}: unsupported SLC version {version}")
    expected = 8 * rows * cols
    if len(data) - _HEADER.size != expected:
        raise FormatError(f"{path}: payload is {len(data) - _HEADER.size} bytes, expected {expected}")
    dr, da = vals[4:6]
    geom = RadarGeometry(**dict(zip(_GEOM_FIELDS, vals[6:])))
    px = np.frombuffer(data, dtype="<c8", offset=_HEADER.size).reshape(rows, cols)
    return ComplexImage(px.astype(np.complex128), dr, da), geom


# --------------------------------------------------------------------- configs

def parse_kv(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys are lower-cased."""
    out: dict[str, str] = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError(f"{path}:{n}: empty key")
        if key.lower() in out:
            raise FormatError(f"{path}:{n}: duplicate key {key!r}")
        out[key.lower()] = value
    return out


@dataclass
class KV:
    """Typed access to a parsed key = value file."""

    path: Path
    values: dict[str, str]
    used: set = field(default_factory=set)

    @classmethod
    def load(cls, path) -> "KV":
        return cls(Path(path), parse_kv(path))

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def _raw(self, key: str, default):
        self.used.add(key)
        if key not in self.values:
            if default is _REQUIRED:
                raise FormatError(f"{self.path}: missing required key '{key}'")
            return None
        return self.values[key]

    def float(self, key: str, default=None) -> float:
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise FormatError(f"{self.path}: key '{key}' is not a number: {raw!r}") from None

    def int(self, key: str, default=None) -> int:
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise FormatError(f"{self.path}: key '{key}' is not an integer: {raw!r}") from None

    def str(self, key: str, default=None) -> str:
        raw = self._raw(key, default)
        return default if raw is None else raw

    def bool(self, key: str, default=None) -> bool:
        raw = self._raw(key, default)
        if raw is None:
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise FormatError(f"{self.path}: key '{key}' is not a boolean: {raw!r}")

    def path_of(self, key: str, default=None) -> Path | None:
        raw = self._raw(key, default)
        if raw is None:
            return default
        p = Path(raw)
        return p if p.is_absolute() else self.path.parent / p


_REQUIRED = object()
REQUIRED = _REQUIRED


def load_geometry(path) -> RadarGeometry:
    kv = KV.load(path)
    vals = {f: kv.float(k, REQUIRED) for k, f in zip(GEOMETRY_KEYS, _GEOM_FIELDS)}
    vals["incidence_angle"] = math.radians(vals["incidence_angle"])
    try:
        return RadarGeometry(**vals)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_geometry(path, geom: RadarGeometry) -> None:
    lines = ["# acquisition geometry"]
    for k, f in zip(GEOMETRY_KEYS, _GEOM_FIELDS):
        v = getattr(geom, f)
        if f == "incidence_angle":
            v = math.degrees(v)
        lines.append(f"{k} = {v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_plan(path, geom: RadarGeometry, img: ComplexImage) -> SubAperturePlan:
    """Plan keys: n_sub, guard_fraction (or tiling = yes), window, n_shift, band_hz.

    ``band_hz`` defaults to the geometry's Doppler bandwidth; ``full`` selects
    the whole azimuth spectrum.
    """
    from .image import azimuth_sampling_rate

    kv = KV.load(path)
    fs = azimuth_sampling_rate(geom, img.azimuth_spacing)
    band_raw = kv.str("band_hz", "")
    band = fs if band_raw == "full" else (float(band_raw) if band_raw else geom.doppler_bandwidth)
    n = kv.int("n_sub", REQUIRED)
    window = kv.str("window", "rect")
    try:
        if kv.bool("tiling", False):
            return SubAperturePlan.tiling(n, band, fs, window)
        return SubAperturePlan.from_guard(n, kv.float("guard_fraction", 0.5), band, fs, window,
                                          kv.int("n_shift", 1))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_track_config(path) -> TrackConfig:
    kv = KV.load(path)
    ws_raw = kv.str("window_size", "33")
    try:
        parts = [int(p) for p in ws_raw.replace(",", " ").split()]
    except ValueError:
        raise FormatError(f"{path}: window_size must be one or two integers") from None
    ws = parts[0] if len(parts) == 1 else tuple(parts)
    try:
        return TrackConfig(
            window_size=ws,
            oversample_factor=kv.int("oversample_factor", 32),
            search_radius=kv.int("search_radius", 4),
            peak_fit=kv.str("peak_fit", "parabolic"),
            correlation_floor=kv.float("correlation_floor", 0.8),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_sonic(path, k: int | None = None) -> SonicParams:
    """Sonic keys: wave_speed, probe_frequency, slant_range, aperture,
    incidence_angle_deg, time_scale, k; or explicit comma lists
    ``baselines`` and ``slant_ranges``."""
    kv = KV.load(path)
    theta = math.radians(kv.float("incidence_angle_deg", 35.0))
    v = kv.float("wave_speed", 972.0)
    f = kv.float("probe_frequency", 200.0)
    t = kv.float("time_scale", None)
    if "baselines" in kv:
        b = tuple(float(x) for x in kv.str("baselines").split(","))
        r_raw = kv.str("slant_ranges", "")
        r = tuple(float(x) for x in r_raw.split(",")) if r_raw else (kv.float("slant_range", 650_000.0),) * len(b)
        if k is not None and len(b) != k:
            raise FormatError(f"{path}: {len(b)} baselines but shift series have {k} samples")
        if t is None:
            t = math.sin(theta) / (2 * math.pi)
        try:
            return SonicParams(v, f, r, b, theta, t)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    k_cfg = kv.int("k", None)
    if k_cfg is not None and k is not None and k_cfg != k:
        raise FormatError(f"{path}: configured k = {k_cfg} but shift series have {k} samples")
    kk = k_cfg if k_cfg is not None else k
    if kk is None:
        raise FormatError(f"{path}: cannot infer the number of sub-apertures k")
    return SonicParams.synthetic(kk, kv.float("aperture", 42_000.0), kv.float("slant_range", 650_000.0),
                                 v, f, theta, t)


def load_grid(path) -> tuple[DepthGrid | None, dict]:
    """Depth grid; with ``full_period = yes`` only z_min and n_bins are read and
    the grid is completed once the steering period is known."""
    kv = KV.load(path)
    n = kv.int("n_bins", REQUIRED)
    z0 = kv.float("z_min", REQUIRED)
    if kv.bool("full_period", False):
        return None, {"z_min": z0, "n_bins": n}
    try:
        return DepthGrid(z0, kv.float("z_max", REQUIRED), n), {}
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_affine(path) -> np.ndarray:
    """Six numbers: lat0, dlat/dpx, dlat/ddepth, lon0, dlon/dpx, dlon/ddepth."""
    nums = []
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        for tok in line.split():
            try:
                nums.append(float(tok))
            except ValueError:
                raise FormatError(f"{path}:{n}: not a number: {tok!r}") from None
    if len(nums) != 6:
        raise FormatError(f"{path}: expected 6 affine parameters, found {len(nums)}")
    return np.array(nums)


# ----------------------------------------------------------------------- scene

@dataclass
class Scene:
    canvas: Canvas
    specs: list[ScattererSpec]
    segments: int | None
    snr_db: float | None
    seed: int
    depths: list[float | None] = field(default_factory=list)


_TARGET_KEYS = {
    "range_m", "azimuth_m", "range_bin", "azimuth_bin", "amplitude", "v_r", "v_a", "a_r", "a_a",
    "shift_gain", "motion", "a_m", "b_m", "a_px", "b_px", "omega", "freq_hz", "depth_m",
    "damping", "trajectory", "nonlin_ratio",
}


def load_scene(path, geom: RadarGeometry) -> Scene:
    """Parse a scene file.

    Global lines are ``key = value`` (rows, cols, range_oversampling, segments,
    snr_db, seed, sonic). Each ``target`` line lists ``key=value`` tokens; see
    the README for the vocabulary. Errors carry the line number.
    """
    path = Path(path)
    glob: dict[str, tuple[int, str]] = {}
    targets: list[tuple[int, dict[str, str]]] = []
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split(None, 1)
        if head[0] == "target":
            toks = {}
            for tok in (head[1].split() if len(head) > 1 else []):
                if "=" not in tok:
                    raise FormatError(f"{path}:{n}: target token {tok!r} is not key=value")
                key, val = tok.split("=", 1)
                if key not in _TARGET_KEYS:
                    raise FormatError(f"{path}:{n}: unknown target key {key!r}")
                toks[key] = val
            targets.append((n, toks))
        elif "=" in line:
            key, val = (s.strip() for s in line.split("=", 1))
            glob[key.lower()] = (n, val)
        else:
            raise FormatError(f"{path}:{n}: cannot parse line {raw.strip()!r}")
    if not targets:
        raise FormatError(f"{path}: scene has no target lines")

    def gnum(key, conv, default):
        if key not in glob:
            if default is REQUIRED:
                raise FormatError(f"{path}: missing required key '{key}'")
            return default
        n, val = glob[key]
        try:
            return conv(val)
        except ValueError:
            raise FormatError(f"{path}:{n}: bad value for '{key}': {val!r}") from None

    canvas = Canvas.for_geometry(geom, gnum("rows", int, REQUIRED), gnum("cols", int, REQUIRED),
                                 gnum("range_oversampling", float, 2.0))
    segments = gnum("segments", int, None)
    snr = gnum("snr_db", float, None)
    seed = gnum("seed", int, 0)
    sonic_path = None
    if "sonic" in glob:
        p = Path(glob["sonic"][1])
        sonic_path = p if p.is_absolute() else path.parent / p

    specs, depths = [], []
    for n, tok in targets:
        try:
            spec, depth = _target_from_tokens(tok, geom, canvas, segments, sonic_path, path.parent)
        except (ValueError, KeyError) as exc:
            msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
            raise FormatError(f"{path}:{n}: {msg}") from None
        specs.append(spec)
        depths.append(depth)
    return Scene(canvas, specs, segments, snr, seed, depths)


def _target_from_tokens(tok, geom, canvas, segments, sonic_path, base):
    from .tomography import build_steering, depth_phase_step, vertical_wavenumbers

    def num(key, default=None):
        if key not in tok:
            if default is None:
                raise KeyError(key)
            return default
        return float(tok[key])

    r = num("range_m", 0.0) if "range_m" in tok else num("range_bin") * canvas.range_spacing
    a = num("azimuth_m", 0.0) if "azimuth_m" in tok else num("azimuth_bin") * canvas.azimuth_spacing
    target = TargetState(r, a, num("v_r", 0.0), num("v_a", 0.0), num("a_r", 0.0), num("a_a", 0.0))
    gain = num("shift_gain", 1.0)
    traj = None
    depth = None
    T = geom.acquisition_duration
    if "trajectory" in tok:
        p = Path(tok["trajectory"])
        traj = Trajectory.from_csv(p if p.is_absolute() else base / p)
    elif "motion" in tok:
        kind = tok["motion"]
        if kind not in ("linear", "duffing"):
            raise ValueError(f"unknown motion {kind!r}")
        am = num("a_m") if "a_m" in tok else num("a_px") * canvas.range_spacing / gain
        bm = num("b_m") if "b_m" in tok else num("b_px") * canvas.azimuth_spacing / gain
        if "depth_m" in tok:
            if sonic_path is None or segments is None:
                raise ValueError("depth_m needs global 'sonic' and 'segments' keys")
            depth = num("depth_m")
            sonic = load_sonic(sonic_path, segments)
            steer = build_steering(vertical_wavenumbers(sonic), DepthGrid(0.0, 1.0, 2), sonic.time_scale)
            omega = depth_phase_step(steer, depth) / (T / segments)
        elif "omega" in tok:
            omega = num("omega")
        else:
            omega = 2 * math.pi * num("freq_hz")
        if omega < 0:
            omega, bm = -omega, -bm
        if omega == 0:
            raise ValueError("motion needs a nonzero frequency")
        spring = SpringParams.from_omega0(omega, damping=num("damping", 0.0))
        if kind == "linear":
            traj = linear_trajectory(am, bm, spring, T, 4097)
        else:
            ratio = num("nonlin_ratio", 0.0)  # cubic_stiffness / omega0^2, 1/m^2
            spring = _duffing_spring(omega, ratio, num("damping", 0.0))
            steps = max(int(math.ceil(T * omega / 0.05)), 4096)
            traj = integrate_forced(spring, None, (am, 0.0), (0.0, bm * omega), T / steps, steps)
    return ScattererSpec(target, num("amplitude", 1.0), traj, gain), depth


def _duffing_spring(omega: float, ratio: float, damping: float) -> SpringParams:
    """Spring with linear rate ``omega`` and cubic_stiffness/omega^2 = ``ratio``.

    With L = 1: ratio = 2 L0 / (1 - L0), so L0 = ratio / (2 + ratio).
    """
    L0 = ratio / (2.0 + ratio)
    return SpringParams.from_omega0(omega, damping=damping, length_tensioned=1.0, length_rest=L0)


# ---------------------------------------------------------------- stacks, CSVs

def write_stacks(outdir, master: SubApertureStack, slave: SubApertureStack, geom: RadarGeometry,
                 source: str = "") -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {"master": [], "slave": []}
    for stack in (master, slave):
        for i, img in enumerate(stack.images):
            name = f"{stack.role}_{i:02d}.slc"
            write_slc(outdir / name, img, geom)
            files[stack.role].append(name)
    manifest = {"source": source, "plan": master.plan.to_dict(), "files": files}
    mpath = outdir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def read_stacks(outdir) -> tuple[SubApertureStack, SubApertureStack, RadarGeometry]:
    outdir = Path(outdir)
    mpath = outdir / "manifest.json"
    if not mpath.exists():
        raise FormatError(f"{outdir}: no stack manifest.json")
    manifest = json.loads(mpath.read_text())
    plan = SubAperturePlan.from_dict(manifest["plan"])
    geom = None
    stacks = []
    for role in ("master", "slave"):
        imgs = []
        for name in manifest["files"][role]:
            img, geom = read_slc(outdir / name)
            imgs.append(img)
        stacks.append(SubApertureStack(plan, imgs, role))
    return stacks[0], stacks[1], geom


SHIFT_HEADER = "row,col,sub_index,dr_px,da_px,quality"


def write_shifts(path, series: list[ShiftSeries]) -> None:
    lines = [SHIFT_HEADER]
    for s in series:
        r, c = s.pixel
        for i, (z, q) in enumerate(zip(s.shifts, s.quality)):
            lines.append(f"{r},{c},{i},{z.real:.12g},{z.imag:.12g},{q:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_shifts(path) -> list[ShiftSeries]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != SHIFT_HEADER:
        raise FormatError(f"{path}:1: expected header '{SHIFT_HEADER}'")
    groups: dict[tuple[int, int], list] = {}
    for n, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise FormatError(f"{path}:{n}: expected 6 fields, got {len(parts)}")
        try:
            r, c, i = int(parts[0]), int(parts[1]), int(parts[2])
            dr, da, q = float(parts[3]), float(parts[4]), float(parts[5])
        except ValueError:
            raise FormatError(f"{path}:{n}: malformed number") from None
        groups.setdefault((r, c), []).append((i, complex(dr, da), q))
    out = []
    ks = set()
    for px, rows in groups.items():
        rows.sort(key=lambda t: t[0])
        if [t[0] for t in rows] != list(range(len(rows))):
            raise FormatError(f"{path}: pixel {px} has non-contiguous sub_index values")
        ks.add(len(rows))
        out.append(ShiftSeries(px, [t[1] for t in rows], [t[2] for t in rows]))
    if len(ks) > 1:
        raise FormatError(f"{path}: pixels have differing sample counts {sorted(ks)}")
    return out


def write_tomogram_csv(path, tomo: Tomogram) -> None:
    lines = ["depth_m,pixel,magnitude"]
    for p, track in enumerate(tomo.track_axis):
        for z, m in zip(tomo.depth_axis, tomo.magnitudes[:, p]):
            lines.append(f"{z:.12g},{track:.12g},{m:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tomogram_csv(path, mode: str = "matched") -> Tomogram:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise FormatError(f"{path}: expected columns depth_m,pixel,magnitude")
    depths = np.unique(data[:, 0])
    tracks = np.unique(data[:, 1])
    mag = np.zeros((depths.size, tracks.size))
    di = np.searchsorted(depths, data[:, 0])
    ti = np.searchsorted(tracks, data[:, 1])
    mag[di, ti] = data[:, 2]
    return Tomogram(mag, depths, tracks, mode)


def write_pgm(path, tomo: Tomogram) -> Path:
    """16-bit binary PGM (depth rows x track columns) plus a scaling sidecar."""
    mag = tomo.magnitudes
    peak = float(mag.max())
    scale = peak / 65535.0 if peak > 0 else 1.0
    q = np.round(mag / scale).astype(">u2")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mag.shape[1]} {mag.shape[0]}\n65535\n".encode())
        fh.write(q.tobytes())
    side = path.with_name(path.name + ".txt")
    side.write_text(
        f"# magnitude = pixel_value * scale + offset\nscale = {scale!r}\noffset = 0.0\n"
        f"rows = depth\ncols = track\ndepth_first_m = {tomo.depth_axis[0]!r}\n"
        f"depth_last_m = {tomo.depth_axis[-1]!r}\ntrack_first = {tomo.track_axis[0]!r}\n"
        f"track_last = {tomo.track_axis[-1]!r}\nmode = {tomo.mode}\n"
    )
    return side


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w)


def write_series_csv(path, header: str, *columns) -> None:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(f"{v:.12g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
