"""
Procedural scenes with labelled motion programs.

A scene is a background plus entities (discs or horizontal bars), each driven
by one motion program: translate (constant velocity), oscillate (sinusoid on
one axis) or blink (on/off with a duty cycle). Rendering is a pure function of
(spec, t); the per-pixel work runs in a numba kernel with 2×2 supersampling.
"""
from __future__ import annotations

import math
from typing import List, Literal, Tuple, Union

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field, field_validator

SHAPE_CODES = {"disc": 0, "bar": 1}
BACKGROUND_CODES = {"flat": 0, "gradient": 1}
BAR_ASPECT = 0.25


class Translate(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["translate"] = "translate"
    vx: float
    vy: float


class Oscillate(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["oscillate"] = "oscillate"
    axis: Literal["x", "y"]
    amplitude: float = Field(ge=0)
    period: float = Field(gt=0)


class Blink(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["blink"] = "blink"
    period: float = Field(gt=0)
    duty: float = Field(gt=0, le=1)


MotionProgram = Union[Translate, Oscillate, Blink]


class Entity(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: Literal["disc", "bar"] = "disc"
    x: float
    y: float
    size: float = Field(gt=0, description="Disc radius / bar half-length, in pixels")
    color: Tuple[float, float, float]
    motion: MotionProgram = Field(discriminator="kind")

    @field_validator("color")
    @classmethod
    def _check_color(cls, value):
        if any(not 0.0 <= c <= 1.0 for c in value):
            raise ValueError(f"color components must lie in [0, 1], got {value}")
        return value

    def state(self, t: float, resolution: int) -> Tuple[float, float, bool]:
        """Centre (x, y) and visibility at time t, clamped inside the frame."""
        x, y, visible = self.x, self.y, True
        m = self.motion
        if isinstance(m, Translate):
            x, y = x + m.vx * t, y + m.vy * t
        elif isinstance(m, Oscillate):
            offset = m.amplitude * math.sin(2.0 * math.pi * t / m.period)
            if m.axis == "x":
                x += offset
            else:
                y += offset
        else:
            visible = (t % m.period) / m.period < m.duty
        half_w = self.size
        half_h = self.size * (BAR_ASPECT if self.shape == "bar" else 1.0)
        x = min(max(x, half_w), resolution - half_w)
        y = min(max(y, half_h), resolution - half_h)
        return x, y, visible


class SceneSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolution: int = Field(default=32, ge=4)
    background: Literal["flat", "gradient"] = "gradient"
    entities: List[Entity] = Field(default_factory=list)

    def motion_kinds(self) -> List[str]:
        return [e.motion.kind for e in self.entities]

    # manifest lines: "res=32 bg=gradient e0.shape=disc e0.x=.. e0.motion=translate e0.vx=.."
    def to_manifest_line(self) -> str:
        tokens = [f"res={self.resolution}", f"bg={self.background}"]
        for i, e in enumerate(self.entities):
            p = f"e{i}."
            tokens += [
                f"{p}shape={e.shape}",
                f"{p}x={e.x!r}",
                f"{p}y={e.y!r}",
                f"{p}size={e.size!r}",
                f"{p}color={','.join(repr(float(c)) for c in e.color)}",
                f"{p}motion={e.motion.kind}",
            ]
            for key, value in e.motion.model_dump(exclude={"kind"}).items():
                tokens.append(f"{p}{key}={value!r}" if isinstance(value, float) else f"{p}{key}={value}")
        return " ".join(tokens)

    @classmethod
    def from_manifest_line(cls, line: str) -> "SceneSpec":
        scene = {}
        entities = {}
        for token in line.split():
            if "=" not in token:
                raise ValueError(f"manifest token '{token}' is not key=value")
            key, value = token.split("=", 1)
            if key == "res":
                scene["resolution"] = int(value)
            elif key == "bg":
                scene["background"] = value
            elif key.startswith("e") and "." in key:
                index, field = key[1:].split(".", 1)
                entities.setdefault(int(index), {})[field] = value
            else:
                raise ValueError(f"unknown manifest key '{key}'")
        parsed = []
        for index in sorted(entities):
            fields = dict(entities[index])
            kind = fields.pop("motion", None)
            if kind is None:
                raise ValueError(f"entity e{index} has no motion program")
            entity = {k: fields.pop(k) for k in ("shape", "x", "y", "size") if k in fields}
            if "color" in fields:
                entity["color"] = tuple(float(c) for c in fields.pop("color").split(","))
            entity["motion"] = {"kind": kind, **fields}
            parsed.append(entity)
        return cls(entities=parsed, **scene)


@njit(cache=True)
def _rasterize(resolution, background, kinds, xs, ys, sizes, colors, visible, bar_aspect):
    out = np.empty((resolution, resolution, 3))
    for py in range(resolution):
        for px in range(resolution):
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            for sy in range(2):
                for sx in range(2):
                    fx = px + 0.25 + 0.5 * sx
                    fy = py + 0.25 + 0.5 * sy
                    if background == 1:
                        base = 0.1 + 0.3 * fy / resolution
                        c0, c1, c2 = base, base, base + 0.1
                    else:
                        c0, c1, c2 = 0.2, 0.2, 0.2
                    for e in range(kinds.shape[0]):
                        if not visible[e]:
                            continue
                        dx = fx - xs[e]
                        dy = fy - ys[e]
                        if kinds[e] == 0:
                            inside = dx * dx + dy * dy <= sizes[e] * sizes[e]
                        else:
                            inside = abs(dx) <= sizes[e] and abs(dy) <= sizes[e] * bar_aspect
                        if inside:
                            c0, c1, c2 = colors[e, 0], colors[e, 1], colors[e, 2]
                    acc0 += c0
                    acc1 += c1
                    acc2 += c2
            out[py, px, 0] = acc0 * 0.25
            out[py, px, 1] = acc1 * 0.25
            out[py, px, 2] = acc2 * 0.25
    return out


def render_frame(spec: SceneSpec, t: float) -> np.ndarray:
    """(3, H, W) frame in [-1, 1]; later entities paint over earlier ones."""
    if t < 0:
        raise ValueError(f"scenes are defined for t ≥ 0, got {t}")
    n = len(spec.entities)
    kinds = np.zeros(n, dtype=np.int64)
    xs, ys, sizes = np.zeros(n), np.zeros(n), np.zeros(n)
    colors = np.zeros((n, 3))
    visible = np.zeros(n, dtype=np.bool_)
    for i, entity in enumerate(spec.entities):
        x, y, vis = entity.state(float(t), spec.resolution)
        kinds[i] = SHAPE_CODES[entity.shape]
        xs[i], ys[i], sizes[i], visible[i] = x, y, entity.size, vis
        colors[i] = entity.color
    rgb = _rasterize(spec.resolution, BACKGROUND_CODES[spec.background], kinds, xs, ys, sizes, colors, visible,
                     BAR_ASPECT)
    return np.ascontiguousarray(rgb.transpose(2, 0, 1)) * 2.0 - 1.0
