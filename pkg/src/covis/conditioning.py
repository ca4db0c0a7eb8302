"""Latent-slot layout for context-conditioned prediction, as pure data.

A conditioning batch concatenates the predicted latent block with one clean
slot per context frame along the frame dimension.  Predicted slots always
occupy positions 0..pred_len-1 regardless of how much context is attached;
context slots follow contiguously (an offset band is configurable).  The
update mask covers exactly the predicted block.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from . import jsonio

TEMPORAL_COMPRESSION = 4


class InvalidFrameCount(Exception):
    """Frame count does not satisfy count = 1 (mod r)."""


def frames_to_latent_len(frame_count: int, r: int = TEMPORAL_COMPRESSION) -> int:
    """Latent count after temporal compression: 1 + (frame_count - 1) / r."""
    if r < 1:
        raise ValueError("compression ratio must be >= 1")
    if frame_count < 1 or (frame_count - 1) % r != 0:
        raise InvalidFrameCount(
            f"frame count {frame_count} must be 1 mod {r} and positive"
        )
    return 1 + (frame_count - 1) // r


@dataclass(frozen=True)
class LatentSlot:
    position_index: int
    is_clean: bool
    frame_id: Optional[int] = None  # set iff the slot carries a context frame

    def __post_init__(self):
        if self.is_clean != (self.frame_id is not None):
            raise ValueError("clean slots carry a frame_id; predicted slots do not")


@dataclass(frozen=True)
class ConditioningBatch:
    slots: tuple[LatentSlot, ...]
    pred_len: int
    context_len: int

    def __post_init__(self):
        if len(self.slots) != self.pred_len + self.context_len:
            raise ValueError("slot count must equal pred_len + context_len")
        for i, slot in enumerate(self.slots[: self.pred_len]):
            if slot.is_clean or slot.position_index != i:
                raise ValueError("predicted block must be noisy at positions 0..pred_len-1")
        ctx = self.slots[self.pred_len :]
        if any(not s.is_clean for s in ctx):
            raise ValueError("context block must be clean")
        if ctx:
            start = ctx[0].position_index
            if [s.position_index for s in ctx] != list(range(start, start + len(ctx))):
                raise ValueError("context positions must be contiguous")
            if start < self.pred_len:
                raise ValueError("context positions must not overlap the predicted block")

    def update_mask(self) -> tuple[bool, ...]:
        """True where the latent is noisy and gets updated each step."""
        return tuple(not s.is_clean for s in self.slots)

    def context_frame_ids(self) -> tuple[int, ...]:
        return tuple(s.frame_id for s in self.slots[self.pred_len :])

    def to_json(self) -> str:
        return jsonio.dumps17(
            {
                "pred_len": self.pred_len,
                "context_len": self.context_len,
                "slots": [
                    {
                        "position_index": s.position_index,
                        "is_clean": s.is_clean,
                        "frame_id": s.frame_id,
                    }
                    for s in self.slots
                ],
            }
        )


def assemble_batch(
    pred_frames: int,
    context_ids: Sequence[int],
    r: int = TEMPORAL_COMPRESSION,
    context_position_offset: int = 0,
) -> ConditioningBatch:
    """Lay out the predicted block followed by one clean slot per context
    frame (ascending frame id).  context_position_offset shifts the context
    band away from pred_len for models that want a gap."""
    if context_position_offset < 0:
        raise ValueError("context_position_offset must be >= 0")
    ids = sorted(context_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("context frame ids must be distinct")
    pred_len = frames_to_latent_len(pred_frames, r)
    slots = [LatentSlot(i, False) for i in range(pred_len)]
    base = pred_len + context_position_offset
    slots.extend(LatentSlot(base + j, True, fid) for j, fid in enumerate(ids))
    return ConditioningBatch(tuple(slots), pred_len, len(ids))
