from __future__ import annotations

class MsgvError(ValueError):
    """Base class for every error raised by the library."""


class ShapeError(MsgvError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class NonFiniteError(MsgvError):
    """A forward op or a loss term produced NaN/inf."""

    def __init__(self, what: str, step: int | None = None):
        self.what = what
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite values produced by {what}{where}")


class ConfigError(MsgvError):
    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


class UnknownLayerError(MsgvError, KeyError):
    def __init__(self, layer_id: str):
        self.layer_id = layer_id
        super().__init__(f"unknown layer '{layer_id}'")

    def __str__(self):
        return self.args[0]


class GradCheckError(MsgvError):
    pass


class CheckpointError(MsgvError):
    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass
