"""Radar rain-rate sequences: capping, normalization, windowing, synthetic
generation, and the on-disk archive format.

Rain rates are physical mm/h values capped at 19 mm/h before entering the
model. The normalized representation is y = ln(x + 1) / 1.5 - 1, which maps
[0, 19] onto [-1, ln(20)/1.5 - 1].
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArchiveError, DataIntegrityError

logger = logging.getLogger(__name__)

RAIN_CAP = 19.0
NORM_MIN = -1.0
NORM_MAX = math.log(RAIN_CAP + 1.0) / 1.5 - 1.0

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "frames.bin"
_ARCHIVE_DTYPE = "f32le"
_ARCHIVE_ORDER = "frame-major row-major"


@dataclass(frozen=True, eq=False)
class RainField:
    """One 2-D grid of rain rates in mm/h at a single timestamp.

    Grids are stored as float32, the archive payload precision. Cells must be
    finite and non-negative; values above the cap are legal here (capping is a
    separate, explicit step).
    """

    grid: np.ndarray
    timestamp: float | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float32)
        if grid.ndim != 2:
            raise DataIntegrityError(f"rain field must be 2-D, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise DataIntegrityError("rain field contains non-finite cells")
        if np.any(grid < 0.0):
            raise DataIntegrityError("rain field contains negative rain rates")
        object.__setattr__(self, "grid", grid)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]


@dataclass(eq=False)
class RadarSequence:
    """Ordered rain fields at a fixed time interval; the unit of ingestion
    and prediction."""

    frames: list[RainField]
    interval: float = 300.0
    id: str = ""

    def __post_init__(self):
        if not self.frames:
            raise DataIntegrityError("sequence must contain at least one frame")
        h, w = self.frames[0].grid.shape
        for k, f in enumerate(self.frames):
            if f.grid.shape != (h, w):
                raise DataIntegrityError(
                    f"frame {k} has shape {f.grid.shape}, expected {(h, w)}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    def as_array(self) -> np.ndarray:
        """Stack frames into a (frames, height, width) float32 array."""
        return np.stack([f.grid for f in self.frames])

    @classmethod
    def from_array(cls, array, interval: float = 300.0, id: str = "") -> "RadarSequence":
        array = np.asarray(array)
        if array.ndim != 3:
            raise DataIntegrityError(f"expected (frames, height, width), got {array.shape}")
        return cls([RainField(frame) for frame in array], interval=interval, id=id)


@dataclass(eq=False)
class NormalizedSequence:
    """Dimensionless (frames, height, width) tensor in normalized space.

    Produced from capped physical data, values lie in [NORM_MIN, NORM_MAX];
    model predictions routed through here may exceed that range and are
    clamped on denormalization.
    """

    tensor: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        tensor = np.asarray(self.tensor, dtype=np.float64)
        if tensor.ndim != 3:
            raise DataIntegrityError(f"normalized tensor must be 3-D, got {tensor.shape}")
        if not np.all(np.isfinite(tensor)):
            raise DataIntegrityError("normalized tensor contains non-finite values")
        self.tensor = tensor

    def __len__(self) -> int:
        return self.tensor.shape[0]


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings for synthetic advection sequences.

    The predictable component is a set of Gaussian rain cells advected by a
    constant velocity. The unpredictable component is a population of static
    noise blobs that arise or vanish between consecutive frames with
    probability ``noise_rate`` each.
    """

    num_cells: int = 3
    cell_intensity_range: tuple[float, float] = (1.0, 8.0)
    advection_velocity: tuple[float, float] = (0.8, 1.2)
    noise_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise DataIntegrityError(f"noise_rate must be in [0, 1], got {self.noise_rate}")
        lo, hi = self.cell_intensity_range
        if not (0.0 <= lo <= hi <= RAIN_CAP):
            raise DataIntegrityError(
                f"cell_intensity_range must satisfy 0 <= lo <= hi <= {RAIN_CAP}, got {self.cell_intensity_range}"
            )
        if self.num_cells < 0:
            raise DataIntegrityError("num_cells must be non-negative")


def cap_rainfall(field: RainField) -> RainField:
    """Clip rain rates above the 19 mm/h cap. Idempotent."""
    return RainField(np.minimum(field.grid, np.float32(RAIN_CAP)), field.timestamp)


def cap_sequence(seq: RadarSequence) -> RadarSequence:
    return RadarSequence([cap_rainfall(f) for f in seq.frames], interval=seq.interval, id=seq.id)


def normalize(seq: RadarSequence) -> NormalizedSequence:
    """Map capped rain rates to normalized space: y = ln(x + 1)/1.5 - 1.

    Input must already be capped; uncapped cells are rejected so that the
    normalized range contract holds.
    """
    arr = seq.as_array().astype(np.float64)
    if np.any(arr > RAIN_CAP):
        raise DataIntegrityError(
            f"sequence '{seq.id}' has cells above {RAIN_CAP} mm/h; apply cap_rainfall first"
        )
    y = np.log(arr + 1.0) / 1.5 - 1.0
    return NormalizedSequence(y, provenance=seq.id)


def denormalize(norm: NormalizedSequence | np.ndarray, interval: float = 300.0) -> RadarSequence:
    """Invert the normalization: x = exp(1.5 (y + 1)) - 1.

    Values that decode above the cap are clamped to 19 mm/h and values that
    decode below zero are clamped to 0; out-of-range cells beyond round-trip
    noise are counted and reported through a warning.
    """
    if isinstance(norm, NormalizedSequence):
        tensor, provenance = norm.tensor, norm.provenance
    else:
        tensor, provenance = np.asarray(norm, dtype=np.float64), ""
        if tensor.ndim != 3:
            raise DataIntegrityError(f"expected (frames, height, width), got {tensor.shape}")
    x = np.exp(1.5 * (tensor + 1.0)) - 1.0
    n_over = int(np.count_nonzero(x > RAIN_CAP + 1e-9))
    n_under = int(np.count_nonzero(x < -1e-9))
    if n_over or n_under:
        logger.warning(
            "denormalize clamped %d cells above %.1f mm/h and %d below 0 (sequence %r)",
            n_over, RAIN_CAP, n_under, provenance,
        )
    x = np.clip(x, 0.0, RAIN_CAP)
    return RadarSequence.from_array(x.astype(np.float32), interval=interval, id=provenance)


def window(seq: RadarSequence, n: int, m: int) -> tuple[NormalizedSequence, NormalizedSequence]:
    """Split a sequence into a normalized n-frame input and m-frame target.

    Both halves are capped before normalization (inputs and targets alike).
    """
    if n < 1 or m < 1:
        raise ValueError(f"window sizes must be positive, got n={n}, m={m}")
    if len(seq) < n + m:
        raise ValueError(
            f"sequence '{seq.id}' has {len(seq)} frames; "
            f"windowing n={n}, m={m} requires at least {n + m}"
        )
    capped = cap_sequence(
        RadarSequence(seq.frames[: n + m], interval=seq.interval, id=seq.id)
    )
    full = normalize(capped)
    inputs = NormalizedSequence(full.tensor[:n], provenance=f"{seq.id}[0:{n}]")
    target = NormalizedSequence(full.tensor[n : n + m], provenance=f"{seq.id}[{n}:{n + m}]")
    return inputs, target


def _shift_integer(field: np.ndarray, ky: int, kx: int) -> np.ndarray:
    """Shift content by whole pixels toward larger indices, zero-filling."""
    out = np.zeros_like(field)
    h, w = field.shape
    ys = slice(max(ky, 0), min(h + ky, h))
    xs = slice(max(kx, 0), min(w + kx, w))
    yo = slice(max(-ky, 0), min(h - ky, h))
    xo = slice(max(-kx, 0), min(w - kx, w))
    if ys.start < ys.stop and xs.start < xs.stop:
        out[ys, xs] = field[yo, xo]
    return out


def advect(field: np.ndarray, dy: float, dx: float) -> np.ndarray:
    """Move field content by (dy, dx) pixels via bilinear interpolation.

    Positive dy moves content toward larger row indices; cells pulled from
    outside the grid are zero. Output values are convex combinations of the
    input, so the [0, cap] range is preserved.
    """
    field = np.asarray(field, dtype=np.float64)
    ky, fy = int(np.floor(dy)), dy - np.floor(dy)
    kx, fx = int(np.floor(dx)), dx - np.floor(dx)
    out = (1 - fy) * (1 - fx) * _shift_integer(field, ky, kx)
    if fx:
        out += (1 - fy) * fx * _shift_integer(field, ky, kx + 1)
    if fy:
        out += fy * (1 - fx) * _shift_integer(field, ky + 1, kx)
    if fy and fx:
        out += fy * fx * _shift_integer(field, ky + 1, kx + 1)
    return out


def _render_blobs(blobs, size: int) -> np.ndarray:
    noise = np.zeros((size, size), dtype=np.float64)
    if not blobs:
        return noise
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for cy, cx, sigma, amp in blobs:
        noise += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
    return noise


def generate_synthetic(cfg: SyntheticConfig, length: int, size: int) -> RadarSequence:
    """Deterministic synthetic radar sequence: advecting Gaussian cells plus
    transient noise blobs.

    A pure function of (cfg, length, size): the same arguments always yield
    bit-identical sequences.
    """
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(cfg.seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    base = np.zeros((size, size), dtype=np.float64)
    for _ in range(cfg.num_cells):
        cy = rng.uniform(0, size)
        cx = rng.uniform(0, size)
        sigma = rng.uniform(size / 16.0, size / 8.0)
        amp = rng.uniform(*cfg.cell_intensity_range)
        base += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
    base = np.minimum(base, RAIN_CAP)

    dy, dx = cfg.advection_velocity
    blobs: list[tuple[float, float, float, float]] = []
    frames: list[RainField] = []
    predictable = base
    for t in range(length):
        if t > 0:
            predictable = advect(predictable, dy, dx)
            blobs = [b for b in blobs if rng.random() >= cfg.noise_rate]
            if rng.random() < cfg.noise_rate:
                blobs.append(
                    (
                        rng.uniform(0, size),
                        rng.uniform(0, size),
                        rng.uniform(1.5, 3.5),
                        rng.uniform(*cfg.cell_intensity_range),
                    )
                )
        if blobs:
            frame = np.clip(predictable + _render_blobs(blobs, size), 0.0, RAIN_CAP)
        else:
            frame = predictable
        frames.append(RainField(frame.astype(np.float32)))
    return RadarSequence(frames, interval=300.0, id=f"synth-{cfg.seed:08d}")


def write_archive(seq: RadarSequence, path: str | Path) -> Path:
    """Write a sequence as a directory with a JSON manifest and a raw
    little-endian float32 payload (frame-major, row-major)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "id": seq.id,
        "frames": len(seq),
        "height": seq.height,
        "width": seq.width,
        "interval_seconds": seq.interval,
        "dtype": _ARCHIVE_DTYPE,
        "order": _ARCHIVE_ORDER,
    }
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    (path / PAYLOAD_NAME).write_bytes(seq.as_array().astype("<f4").tobytes())
    return path


def read_archive(path: str | Path) -> RadarSequence:
    """Read a sequence archive, validating manifest/payload consistency.

    Pre-cap values (> 19 mm/h) are permitted on read; non-finite or negative
    cells are rejected.
    """
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    payload_path = path / PAYLOAD_NAME
    if not manifest_path.is_file():
        raise ArchiveError(f"missing {MANIFEST_NAME} in {path}")
    if not payload_path.is_file():
        raise ArchiveError(f"missing {PAYLOAD_NAME} in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"malformed manifest in {path}: {exc}") from exc
    for key in ("id", "frames", "height", "width", "interval_seconds", "dtype", "order"):
        if key not in manifest:
            raise ArchiveError(f"manifest in {path} missing field '{key}'")
    if manifest["dtype"] != _ARCHIVE_DTYPE:
        raise ArchiveError(f"unsupported dtype {manifest['dtype']!r} in {path}")
    if manifest["order"] != _ARCHIVE_ORDER:
        raise ArchiveError(f"unsupported order {manifest['order']!r} in {path}")
    frames, height, width = manifest["frames"], manifest["height"], manifest["width"]
    raw = np.frombuffer(payload_path.read_bytes(), dtype="<f4")
    if raw.size != frames * height * width:
        raise ArchiveError(
            f"payload in {path} holds {raw.size} cells, manifest implies {frames * height * width}"
        )
    if not np.all(np.isfinite(raw)):
        raise ArchiveError(f"payload in {path} contains non-finite cells")
    array = raw.reshape(frames, height, width)
    return RadarSequence.from_array(
        array, interval=float(manifest["interval_seconds"]), id=str(manifest["id"])
    )
