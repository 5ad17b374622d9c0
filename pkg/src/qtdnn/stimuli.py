"""Necker-cube and Rubin's-vase rasters plus PGM/CSV raster I/O.

The generators are deterministic pixel art. For the cube, a 10x10 wireframe
(front square, rear square, four connecting diagonals) is drawn. The two
training images also fill the inside of the front or the rear square. For the
vase, a symmetric 20x20 profile curve splits the image into a central vase
region and two lateral face regions; the training images fill one side of
that split, and the contour image shows only the curve.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StimulusParseError, UsageError


class StimulusTag(str, enum.Enum):
    NECKER_FRONT_SHADED = "NeckerFrontShaded"
    NECKER_REAR_SHADED = "NeckerRearShaded"
    NECKER_AMBIGUOUS = "NeckerAmbiguous"
    RUBIN_FACES_SHADED = "RubinFacesShaded"
    RUBIN_VASE_SHADED = "RubinVaseShaded"
    RUBIN_CONTOUR = "RubinContour"
    CUSTOM = "Custom"


class Stimulus:
    """Immutable ``height x width`` raster of intensities in [0, 1]."""

    __slots__ = ("_pixels", "tag")

    def __init__(self, pixels, tag: StimulusTag | str = StimulusTag.CUSTOM):
        arr = np.array(pixels, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise UsageError("stimulus pixels must form a non-empty 2-d raster")
        if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
            raise UsageError("stimulus intensities must lie in [0, 1]")
        arr.setflags(write=False)
        self._pixels = arr
        self.tag = StimulusTag(tag)

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    def flatten(self) -> np.ndarray:
        """Row-major copy, the network input vector."""
        return self._pixels.ravel().copy()

    def lit(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in zip(*np.nonzero(self._pixels))}

    def __eq__(self, other):
        if not isinstance(other, Stimulus):
            return NotImplemented
        return self.tag == other.tag and np.array_equal(self._pixels, other._pixels)

    def __hash__(self):
        return hash((self.tag, self._pixels.shape, self._pixels.tobytes()))

    def __repr__(self):
        return f"Stimulus({self.height}x{self.width}, tag={self.tag.value}, lit={int(np.count_nonzero(self._pixels))})"


@dataclass(frozen=True)
class StimulusSet:
    """Two labelled training images and the image to interpret."""

    name: str
    train: tuple[tuple[Stimulus, int], tuple[Stimulus, int]]
    ambiguous: Stimulus

    def swapped(self) -> "StimulusSet":
        (a, la), (b, lb) = self.train
        return StimulusSet(self.name, ((a, lb), (b, la)), self.ambiguous)

    @property
    def n_inputs(self) -> int:
        return self.ambiguous.width * self.ambiguous.height


def _line(grid: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> None:
    n = max(abs(r1 - r0), abs(c1 - c0))
    for k in range(n + 1):
        r = r0 + round(k * (r1 - r0) / n) if n else r0
        c = c0 + round(k * (c1 - c0) / n) if n else c0
        grid[r, c] = 1.0


def _square(grid: np.ndarray, top: int, left: int, size: int) -> None:
    bottom, right = top + size - 1, left + size - 1
    _line(grid, top, left, top, right)
    _line(grid, bottom, left, bottom, right)
    _line(grid, top, left, bottom, left)
    _line(grid, top, right, bottom, right)


# Necker geometry on a 10x10 grid: (top, left) corners of 7x7 squares.
NECKER_SIZE = 10
NECKER_FRONT = (3, 0)
NECKER_REAR = (0, 3)
NECKER_EDGE = 7


def necker_wireframe() -> np.ndarray:
    grid = np.zeros((NECKER_SIZE, NECKER_SIZE))
    _square(grid, *NECKER_FRONT, NECKER_EDGE)
    _square(grid, *NECKER_REAR, NECKER_EDGE)
    (ft, fl), (rt, rl) = NECKER_FRONT, NECKER_REAR
    k = NECKER_EDGE - 1
    for dr, dc in ((0, 0), (0, k), (k, 0), (k, k)):
        _line(grid, ft + dr, fl + dc, rt + dr, rl + dc)
    return grid


def _fill_face(grid: np.ndarray, top: int, left: int) -> np.ndarray:
    out = grid.copy()
    out[top:top + NECKER_EDGE, left:left + NECKER_EDGE] = 1.0
    return out


def necker_set() -> StimulusSet:
    """Front-shaded cube (label 0), rear-shaded cube (label 1), bare wireframe."""
    wire = necker_wireframe()
    front = Stimulus(_fill_face(wire, *NECKER_FRONT), StimulusTag.NECKER_FRONT_SHADED)
    rear = Stimulus(_fill_face(wire, *NECKER_REAR), StimulusTag.NECKER_REAR_SHADED)
    return StimulusSet("necker", ((front, 0), (rear, 1)), Stimulus(wire, StimulusTag.NECKER_AMBIGUOUS))


RUBIN_SIZE = 20
#: Half-width of the vase per row; the left profile sits at column 10 - w.
RUBIN_HALF_WIDTHS = (8, 7, 7, 6, 4, 3, 3, 4, 6, 7, 7, 6, 5, 4, 3, 3, 4, 5, 7, 8)


def rubin_regions() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks ``(boundary, vase, faces)`` partitioning the 20x20 grid.

    The left profile in row ``r`` is a run starting at ``c_r = 10 - w_r`` and
    extending right far enough to stay 8-connected with the neighbouring rows;
    the right profile is its mirror image.
    """
    n = RUBIN_SIZE
    cols = [n // 2 - w for w in RUBIN_HALF_WIDTHS]
    boundary = np.zeros((n, n), dtype=bool)
    vase = np.zeros((n, n), dtype=bool)
    for r, c in enumerate(cols):
        end = c
        for nb in (r - 1, r + 1):
            if 0 <= nb < n:
                end = max(end, cols[nb] - 1)
        boundary[r, c:end + 1] = True
        boundary[r, n - 1 - end:n - c] = True
        vase[r, end + 1:n - 1 - end] = True
    faces = ~boundary & ~vase
    return boundary, vase, faces


def rubin_set() -> StimulusSet:
    """Faces shaded (label 0), vase shaded (label 1), bare contour."""
    boundary, vase, faces = rubin_regions()
    outline = boundary.astype(float)
    faces_img = Stimulus(outline + faces, StimulusTag.RUBIN_FACES_SHADED)
    vase_img = Stimulus(outline + vase, StimulusTag.RUBIN_VASE_SHADED)
    return StimulusSet("rubin", ((faces_img, 0), (vase_img, 1)), Stimulus(outline, StimulusTag.RUBIN_CONTOUR))


STIMULUS_SETS = {"necker": necker_set, "rubin": rubin_set}


def stimulus_set(name: str) -> StimulusSet:
    try:
        return STIMULUS_SETS[name]()
    except KeyError:
        raise UsageError(f"unknown stimulus set {name!r}; expected one of {sorted(STIMULUS_SETS)}") from None


# --- file I/O -------------------------------------------------------------

PGM_MAXVAL = 255


def _tokens(text: str):
    """Yield ``(token, line, column)`` skipping ``#`` comments; 1-based positions."""
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        col = 0
        for part in body.split():
            col = body.index(part, col)
            yield part, ln, col + 1
            col += len(part)


def _tag_from_comments(text: str) -> StimulusTag:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#") and "tag:" in stripped:
            value = stripped.split("tag:", 1)[1].strip()
            try:
                return StimulusTag(value)
            except ValueError:
                return StimulusTag.CUSTOM
    return StimulusTag.CUSTOM


def parse_pgm(text: str) -> Stimulus:
    toks = list(_tokens(text))
    if not toks:
        raise StimulusParseError("empty PGM file", 1, 1)
    magic, ln, col = toks[0]
    if magic != "P2":
        raise StimulusParseError(f"expected magic 'P2', found {magic!r}", ln, col)
    header = []
    for tok, ln, col in toks[1:4]:
        try:
            value = int(tok)
        except ValueError:
            raise StimulusParseError(f"header field {tok!r} is not an integer", ln, col) from None
        if value < 1:
            raise StimulusParseError(f"header field {tok!r} must be positive", ln, col)
        header.append(value)
    if len(header) < 3:
        last = toks[-1]
        raise StimulusParseError("truncated PGM header", last[1], last[2])
    width, height, maxval = header
    data = toks[4:]
    expected = width * height
    if len(data) != expected:
        ln, col = (data[expected][1:] if len(data) > expected else (toks[-1][1], toks[-1][2]))
        raise StimulusParseError(
            f"declared {width}x{height} = {expected} samples, found {len(data)}", ln, col)
    values = []
    for tok, ln, col in data:
        try:
            v = int(tok)
        except ValueError:
            raise StimulusParseError(f"sample {tok!r} is not an integer", ln, col) from None
        if not 0 <= v <= maxval:
            raise StimulusParseError(f"sample {v} outside [0, {maxval}]", ln, col)
        values.append(v / maxval)
    return Stimulus(np.array(values).reshape(height, width), _tag_from_comments(text))


def format_pgm(s: Stimulus, maxval: int = PGM_MAXVAL) -> str:
    levels = np.rint(s.pixels * maxval)
    if not np.array_equal(levels / maxval, s.pixels):
        raise UsageError(f"intensities are not multiples of 1/{maxval}; save as CSV for an exact copy")
    lines = ["P2", f"# tag: {s.tag.value}", f"{s.width} {s.height}", str(maxval)]
    lines += [" ".join(str(int(v)) for v in row) for row in levels]
    return "\n".join(lines) + "\n"


def parse_csv_raster(text: str) -> Stimulus:
    rows = []
    width = None
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        row = []
        col = 1
        for cell in next(csv.reader(io.StringIO(line))):
            try:
                v = float(cell)
            except ValueError:
                raise StimulusParseError(f"cell {cell!r} is not a number", ln, col) from None
            if not 0.0 <= v <= 1.0:
                raise StimulusParseError(f"intensity {v} outside [0, 1]", ln, col)
            row.append(v)
            col += len(cell) + 1
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise StimulusParseError(f"row has {len(row)} cells, expected {width}", ln, 1)
        rows.append(row)
    if not rows:
        raise StimulusParseError("no raster rows", 1, 1)
    return Stimulus(rows, _tag_from_comments(text))


def format_csv_raster(s: Stimulus) -> str:
    lines = [f"# tag: {s.tag.value}"]
    lines += [",".join(repr(float(v)) for v in row) for row in s.pixels]
    return "\n".join(lines) + "\n"


def load_stimulus(path) -> Stimulus:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".pgm":
        return parse_pgm(text)
    if path.suffix.lower() == ".csv":
        return parse_csv_raster(text)
    raise UsageError(f"unknown raster format {path.suffix!r}; use .pgm or .csv")


def save_stimulus(s: Stimulus, path) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        text = format_pgm(s)
    elif path.suffix.lower() == ".csv":
        text = format_csv_raster(s)
    else:
        raise UsageError(f"unknown raster format {path.suffix!r}; use .pgm or .csv")
    path.write_text(text)
    return path


def render(s: Stimulus) -> str:
    """ASCII preview, handy in a terminal."""
    return "\n".join("".join("#" if v >= 0.5 else ("+" if v > 0 else ".") for v in row) for row in s.pixels)
