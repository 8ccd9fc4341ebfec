"""Ground-truth environment and a simulated planar range sensor."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .geometry import ViewPoint, traverse, world_to_cell


class InvalidPoseError(ValueError):
    pass


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SensorSpec:
    """Range sensor parameters.

    ``fov`` is the total field of view and ``beam_aperture`` the per-beam
    width used by the inverse sensor model; both in radians.
    """

    max_range: float = 3.0
    fov: float = math.pi / 2
    beam_aperture: float = math.radians(1.0)
    angular_resolution: float = math.radians(1.0)
    range_noise_eps: float = 0.1
    noise_std: float = 0.0  # simulated Gaussian range noise, off by default

    def __post_init__(self):
        if not 0 < self.beam_aperture <= self.fov <= 2 * math.pi + 1e-12:
            raise ValueError("need 0 < beam_aperture <= fov <= 2*pi")
        if not 0 < self.range_noise_eps < self.max_range:
            raise ValueError("need 0 < range_noise_eps < max_range")
        if self.angular_resolution <= 0:
            raise ValueError("angular_resolution must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    @property
    def beam_count(self) -> int:
        return int(math.floor(self.fov / self.angular_resolution + 1e-9)) + 1

    def bearings(self) -> np.ndarray:
        return -self.fov / 2 + self.angular_resolution * np.arange(self.beam_count)


@dataclass(frozen=True)
class Beam:
    bearing: float
    range: float
    hit: bool


@dataclass(frozen=True)
class Scan:
    origin: ViewPoint
    beams: tuple[Beam, ...]


@dataclass
class WorldMap:
    """Boolean ground truth; ``cells[i, j]`` is True for an obstacle."""

    cells: np.ndarray
    resolution: float
    name: str = field(default="world")

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        self.cells.setflags(write=False)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells.ndim != 2 or min(self.cells.shape) < 3:
            raise ValueError("world must be a 2-D grid of at least 3x3 cells")
        c = self.cells
        if not (c[0, :].all() and c[-1, :].all() and c[:, 0].all() and c[:, -1].all()):
            raise ValueError("world boundary cells must all be occupied (closed region)")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def width(self) -> int:
        return self.cells.shape[0]

    @property
    def height(self) -> int:
        return self.cells.shape[1]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return 0.0, 0.0, self.width * self.resolution, self.height * self.resolution

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= x < x1 and y0 <= y < y1

    def is_free_point(self, x: float, y: float) -> bool:
        if not self.contains(x, y):
            return False
        i, j = world_to_cell(x, y, self.resolution)
        return not self.cells[i, j]

    @classmethod
    def from_ascii(cls, text: str, resolution: float | None = None, name: str = "world") -> "WorldMap":
        """Parse rows of ``#`` (obstacle) and ``.`` (free); first row is the top (max y)."""
        rows = []
        for raw in text.splitlines():
            line = raw.rstrip()
            if not line:
                continue
            m = re.match(r"^[#;]\s*resolution\s*[:=]?\s*([0-9.eE+-]+)\s*$", line)
            if m:
                resolution = float(m.group(1))
                continue
            if line.startswith(";") or set(line) - set("#."):
                if line.startswith(("#", ";")) and re.search(r"[A-Za-z]", line):
                    continue  # other comment
                raise MapFormatError(f"unexpected characters in map row: {line!r}")
            rows.append(line)
        if resolution is None:
            raise MapFormatError("map has no '# resolution <meters>' header")
        if not rows or len({len(r) for r in rows}) != 1:
            raise MapFormatError("map rows must be non-empty and of equal length")
        grid = np.array([[ch == "#" for ch in r] for r in rows], dtype=bool)
        return cls(image_to_grid(grid), resolution, name)

    def to_ascii(self) -> str:
        img = grid_to_image(self.cells)
        lines = [f"# resolution {self.resolution!r}"]
        lines += ["".join("#" if v else "." for v in row) for row in img]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_pgm(cls, data: bytes, resolution: float | None = None, name: str = "world") -> "WorldMap":
        img, comments = read_pgm(data)
        for c in comments:
            m = re.search(r"resolution\s*[:=]?\s*([0-9.eE+-]+)", c)
            if m:
                resolution = float(m.group(1))
        if resolution is None:
            raise MapFormatError("PGM map has no '# resolution <meters>' comment")
        return cls(image_to_grid(img < 128), resolution, name)

    @classmethod
    def load(cls, path, resolution: float | None = None) -> "WorldMap":
        path = FsPath(path)
        data = path.read_bytes()
        if data[:2] in (b"P2", b"P5"):
            return cls.from_pgm(data, resolution, path.stem)
        return cls.from_ascii(data.decode(), resolution, path.stem)


def image_to_grid(img: np.ndarray) -> np.ndarray:
    """Image rows (top first) to ``[i, j]`` cells with j growing upwards."""
    return np.ascontiguousarray(np.flipud(img).T)


def grid_to_image(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.flipud(grid.T))


def _pgm_tokens(data: bytes):
    comments, tokens, pos = [], [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1:end].decode(errors="replace").strip())
            pos = end
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode())
    return tokens, comments, pos + 1


def read_pgm(data: bytes) -> tuple[np.ndarray, list[str]]:
    """Decode P2/P5 bytes into a uint16 image and the header comments."""
    try:
        (magic, w, h, maxval), comments, pos = _pgm_tokens(data)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, IndexError) as exc:
        raise MapFormatError(f"bad PGM header: {exc}") from None
    if magic == "P5":
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    elif magic == "P2":
        img = np.array(data[pos:].split()[: w * h], dtype=int)
    else:
        raise MapFormatError(f"unsupported PGM magic {magic!r}")
    if img.size != w * h:
        raise MapFormatError("PGM pixel data truncated")
    img = img.reshape(h, w).astype(np.uint16)
    if maxval != 255:
        img = np.round(img * (255.0 / maxval)).astype(np.uint16)
    return img, comments


def encode_pgm(img: np.ndarray, comments: tuple[str, ...] = ()) -> bytes:
    """Binary P5 encoding of an 8-bit image (rows top first)."""
    img = np.clip(np.asarray(img), 0, 255).astype(np.uint8)
    h, w = img.shape
    head = "P5\n" + "".join(f"# {c}\n" for c in comments) + f"{w} {h}\n255\n"
    return head.encode() + img.tobytes()


def cast_scan(world: WorldMap, pose: ViewPoint, spec: SensorSpec,
              rng: np.random.Generator | None = None) -> Scan:
    """Ray-cast one sweep of the sensor from ``pose``.

    The range of a beam is the distance to the point where the ray enters
    the first obstacle cell.  Gaussian noise is applied only when
    ``spec.noise_std > 0`` and a generator is supplied.
    """
    x, y, theta = pose
    if not world.contains(x, y):
        raise InvalidPoseError(f"pose ({x:.3f}, {y:.3f}) lies outside the world bounds")
    if not world.is_free_point(x, y):
        raise InvalidPoseError(f"pose ({x:.3f}, {y:.3f}) lies inside an obstacle")
    beams = []
    cells, res = world.cells, world.resolution
    for bearing in spec.bearings():
        rng_ = spec.max_range
        hit = False
        for i, j, t in traverse(x, y, theta + bearing, spec.max_range, res, world.shape):
            if cells[i, j]:
                rng_, hit = t, True
                break
        if spec.noise_std > 0 and rng is not None:
            rng_ = rng_ + rng.normal(0.0, spec.noise_std)
        rng_ = min(max(rng_, 1e-9), spec.max_range)
        beams.append(Beam(float(bearing), float(rng_), hit))
    return Scan(ViewPoint(float(x), float(y), float(theta)), tuple(beams))
