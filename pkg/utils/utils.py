"""
Small helpers shared by the CLI and the library: logging setup, frame I/O
(binary PPM/PGM) and the parsers behind `--times` and `--sweep`.
"""
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

LOG_FORMAT = "%(message)s"


def setup_logging(verbose: bool = False) -> None:
    """Route library logging to stderr through rich; INFO by default, DEBUG with -v."""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
    # numba's compiler is chatty at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)


def to_uint8(values: np.ndarray, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    scaled = (np.asarray(values, dtype=np.float64) - low) / (high - low)
    return np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path: Union[str, Path], frame: np.ndarray) -> Path:
    """Binary P6 image of a (3, H, W) frame in [-1, 1]."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ValueError(f"PPM frames must be (3, H, W), got {frame.shape}")
    _, h, w = frame.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(to_uint8(frame).transpose(1, 2, 0).tobytes())
    return path


def write_pgm(path: Union[str, Path], image: np.ndarray) -> Path:
    """Binary P5 image of an (H, W) map in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM images must be (H, W), got {image.shape}")
    h, w = image.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(to_uint8(image, 0.0, 1.0).tobytes())
    return path


def _read_netpbm(path: Union[str, Path], magic: bytes) -> Tuple[np.ndarray, int, int]:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise ValueError(f"{path}: expected {magic.decode()} image, got {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit images are supported")
    return np.frombuffer(data[pos + 1:], dtype=np.uint8), w, h


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """(3, H, W) frame in [-1, 1]."""
    raw, w, h = _read_netpbm(path, b"P6")
    return raw[: w * h * 3].reshape(h, w, 3).transpose(2, 0, 1) / 127.5 - 1.0


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    raw, w, h = _read_netpbm(path, b"P5")
    return raw[: w * h].reshape(h, w) / 255.0


def parse_times(text: str) -> List[float]:
    """`a..b` (inclusive integers) or a comma-separated list of floats."""
    text = text.strip()
    if ".." in text:
        low, high = text.split("..", 1)
        try:
            a, b = int(low), int(high)
        except ValueError:
            raise ValueError(f"time range '{text}' must be two integers a..b") from None
        if b < a:
            raise ValueError(f"time range '{text}' is empty")
        return [float(t) for t in range(a, b + 1)]
    try:
        times = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"could not parse times '{text}'") from None
    if not times:
        raise ValueError("no times given")
    return times


def parse_sweep(text: str) -> Tuple[str, List[str]]:
    """`key=v1,v2,...` -> (key, [v1, v2, ...])."""
    if "=" not in text:
        raise ValueError(f"sweep '{text}' must look like key=v1,v2")
    key, values = text.split("=", 1)
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not key.strip() or not items:
        raise ValueError(f"sweep '{text}' must look like key=v1,v2")
    return key.strip(), items
