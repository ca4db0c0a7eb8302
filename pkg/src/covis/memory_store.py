"""Append-only frame history with a spatial hash grid and co-visibility edges.

The store keeps every frame ever generated plus, per frame, the set of
earlier frames its view overlapped at insertion time.  The FOV heuristic
rejects any pair whose origins are more than 2*d_max apart (two sectors of
radius d_max cannot intersect beyond that), so candidate search is confined
to nearby grid cells plus an exact distance filter -- pruned queries return
exactly what a naive full scan would.
"""
from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import jsonio
from .geometry import CameraPose, OverlapConfig, Pairing, fov_overlap_batch
from .world import Panorama, panorama_digest

SNAPSHOT_MAGIC = b"COVIS"
SNAPSHOT_VERSION = 1


class OutOfOrder(Exception):
    """A record's time_index regressed relative to the store tail."""


class CorruptSnapshot(Exception):
    """Snapshot file failed validation; message carries the file offset."""


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    time_index: int
    pose: CameraPose
    payload_digest: int = 0
    panorama: Optional[Panorama] = None

    @classmethod
    def from_panorama(
        cls, frame_id: int, time_index: int, pose: CameraPose, panorama: Panorama
    ) -> "FrameRecord":
        return cls(frame_id, time_index, pose, panorama_digest(panorama), panorama)


class MemoryStore:
    def __init__(
        self,
        cfg: Optional[OverlapConfig] = None,
        cell_size: Optional[float] = None,
        track_edges: bool = True,
    ):
        self.cfg = cfg or OverlapConfig()
        self.cell_size = cell_size if cell_size is not None else self.cfg.d_max
        self.track_edges = track_edges
        self.records: list[FrameRecord] = []
        self.covis_edges: list[set[int]] = []  # edges[i]: earlier frames, i as query
        self._grid: dict[tuple[int, int], list[int]] = {}
        self._cell_cache: dict[tuple[int, int], np.ndarray] = {}
        self._xs = np.empty(16)
        self._ys = np.empty(16)
        self._yaws = np.empty(16)
        self._fovs = np.empty(16)
        # heuristic invocation counter; the pruning acceptance bound compares
        # this against the naive n(n-1)/2 pair count
        self.heuristic_evals = 0

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemoryStore):
            return NotImplemented
        return (
            self.cfg == other.cfg
            and self.cell_size == other.cell_size
            and self.records == other.records
            and self.covis_edges == other.covis_edges
        )

    # -- grid helpers ------------------------------------------------------

    def _cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def _grow(self, n: int) -> None:
        cap = self._xs.shape[0]
        if n <= cap:
            return
        new_cap = max(n, cap * 2)
        for name in ("_xs", "_ys", "_yaws", "_fovs"):
            arr = np.empty(new_cap)
            old = getattr(self, name)
            arr[: len(self.records)] = old[: len(self.records)]
            setattr(self, name, arr)

    def _candidate_ids(self, x: float, y: float) -> np.ndarray:
        """Frame ids within the heuristic's hard reach (2*d_max), gathered
        from the surrounding grid neighborhood."""
        reach = 2.0 * self.cfg.d_max
        r_cells = math.ceil(reach / self.cell_size)
        cx, cy = self._cell_of(x, y)
        chunks = []
        for ix in range(cx - r_cells, cx + r_cells + 1):
            for iy in range(cy - r_cells, cy + r_cells + 1):
                cell = (ix, iy)
                bucket = self._grid.get(cell)
                if not bucket:
                    continue
                cached = self._cell_cache.get(cell)
                if cached is None or cached.shape[0] != len(bucket):
                    cached = np.array(bucket, dtype=np.int64)
                    self._cell_cache[cell] = cached
                chunks.append(cached)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        ids = np.concatenate(chunks)
        dx = self._xs[ids] - x
        dy = self._ys[ids] - y
        keep = dx * dx + dy * dy <= reach * reach
        return ids[keep]

    def _passing(self, query: CameraPose, ids: np.ndarray) -> np.ndarray:
        if ids.shape[0] == 0:
            return ids
        self.heuristic_evals += int(ids.shape[0])
        ok = fov_overlap_batch(
            query, self._xs[ids], self._ys[ids], self._yaws[ids], self._fovs[ids], self.cfg
        )
        return ids[ok]

    # -- public API --------------------------------------------------------

    def append_frame(self, record: FrameRecord) -> int:
        if record.frame_id != len(self.records):
            raise ValueError(
                f"frame_id must equal insertion order: got {record.frame_id}, "
                f"expected {len(self.records)}"
            )
        if self.records and record.time_index < self.records[-1].time_index:
            raise OutOfOrder(
                f"time_index {record.time_index} < tail {self.records[-1].time_index}"
            )
        fid = record.frame_id
        if self.track_edges:
            cands = self._candidate_ids(record.pose.x, record.pose.y)
            edges = set(int(i) for i in self._passing(record.pose, cands))
        else:
            edges = set()
        self._grow(fid + 1)
        self._xs[fid] = record.pose.x
        self._ys[fid] = record.pose.y
        self._yaws[fid] = record.pose.yaw
        self._fovs[fid] = record.pose.fov
        self.records.append(record)
        self.covis_edges.append(edges)
        cell = self._cell_of(record.pose.x, record.pose.y)
        self._grid.setdefault(cell, []).append(fid)
        self._cell_cache.pop(cell, None)
        return fid

    def append_pose(
        self, pose: CameraPose, time_index: int, panorama: Optional[Panorama] = None
    ) -> int:
        fid = len(self.records)
        digest = panorama_digest(panorama) if panorama is not None else 0
        return self.append_frame(FrameRecord(fid, time_index, pose, digest, panorama))

    def query_covisible(self, target: CameraPose) -> list[int]:
        """Frame ids passing the FOV heuristic with `target` as query,
        ascending; identical to a naive full scan by construction."""
        ids = self._passing(target, self._candidate_ids(target.x, target.y))
        return sorted(int(i) for i in ids)

    def naive_query_covisible(self, target: CameraPose) -> list[int]:
        """Reference full-scan implementation (no grid pruning)."""
        n = len(self.records)
        if n == 0:
            return []
        self.heuristic_evals += n
        ok = fov_overlap_batch(
            target, self._xs[:n], self._ys[:n], self._yaws[:n], self._fovs[:n], self.cfg
        )
        return [int(i) for i in np.flatnonzero(ok)]

    def naive_covis_edges(self) -> list[set[int]]:
        """All-pairs recomputation of the edge sets (audit oracle)."""
        out: list[set[int]] = []
        for i, rec in enumerate(self.records):
            if i == 0:
                out.append(set())
                continue
            self.heuristic_evals += i
            ok = fov_overlap_batch(
                rec.pose, self._xs[:i], self._ys[:i], self._yaws[:i], self._fovs[:i], self.cfg
            )
            out.append(set(int(j) for j in np.flatnonzero(ok)))
        return out

    def grid_cells(self) -> dict[tuple[int, int], list[int]]:
        return dict(self._grid)

    # -- persistence -------------------------------------------------------

    def _header(self, fmt: str) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "format": fmt,
            "count": len(self.records),
            "cell_size": self.cell_size,
            "track_edges": self.track_edges,
            "cfg": {
                "d_min": self.cfg.d_min,
                "d_max": self.cfg.d_max,
                "pairing": self.cfg.pairing.value,
                "oracle_samples": self.cfg.oracle_samples,
                "require_both": self.cfg.require_both,
            },
        }

    def _record_doc(self, rec: FrameRecord) -> dict:
        pan = None
        if rec.panorama is not None:
            pan = {
                "ids": list(rec.panorama.ids),
                "depths": [None if math.isnan(d) else d for d in rec.panorama.depths],
            }
        return {
            "frame_id": rec.frame_id,
            "t": rec.time_index,
            "x": rec.pose.x,
            "y": rec.pose.y,
            "yaw": rec.pose.yaw,
            "fov": rec.pose.fov,
            "digest": rec.payload_digest,
            "edges": sorted(self.covis_edges[rec.frame_id]),
            "panorama": pan,
        }

    def _jsonl_payload(self) -> str:
        lines = [jsonio.dumps17(self._header("jsonl"))]
        lines.extend(jsonio.dumps17(self._record_doc(r)) for r in self.records)
        return "\n".join(lines) + "\n"

    def snapshot(self, path: str | Path, fmt: str = "jsonl") -> None:
        path = Path(path)
        if fmt == "jsonl":
            path.write_text(self._jsonl_payload())
        elif fmt == "binary":
            body = zlib.compress(self._jsonl_payload().encode())
            path.write_bytes(
                SNAPSHOT_MAGIC
                + struct.pack(">BI", SNAPSHOT_VERSION, len(body))
                + body
            )
        else:
            raise ValueError(f"unknown snapshot format: {fmt}")


def _parse_jsonl(lines: list[str], origin: str) -> MemoryStore:
    if not lines:
        raise CorruptSnapshot(f"{origin}: empty snapshot")
    try:
        header = jsonio.loads(lines[0])
    except Exception as exc:
        raise CorruptSnapshot(f"{origin}: bad header at line 1: {exc}") from exc
    if header.get("version") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"{origin}: unsupported version {header.get('version')}")
    cfg = OverlapConfig(
        d_min=header["cfg"]["d_min"],
        d_max=header["cfg"]["d_max"],
        pairing=Pairing(header["cfg"]["pairing"]),
        oracle_samples=header["cfg"]["oracle_samples"],
        require_both=header["cfg"]["require_both"],
    )
    store = MemoryStore(cfg, cell_size=header["cell_size"], track_edges=header["track_edges"])
    body = lines[1:]
    if len(body) != header["count"]:
        raise CorruptSnapshot(
            f"{origin}: truncated: header count {header['count']}, got {len(body)} records"
        )
    for lineno, line in enumerate(body, start=2):
        try:
            doc = jsonio.loads(line)
            pan = None
            if doc["panorama"] is not None:
                pan = Panorama(
                    tuple(doc["panorama"]["ids"]),
                    tuple(
                        math.nan if d is None else d for d in doc["panorama"]["depths"]
                    ),
                )
            rec = FrameRecord(
                doc["frame_id"],
                doc["t"],
                CameraPose(doc["x"], doc["y"], doc["yaw"], doc["fov"]),
                doc["digest"],
                pan,
            )
            edges = set(doc["edges"])
        except CorruptSnapshot:
            raise
        except Exception as exc:
            raise CorruptSnapshot(f"{origin}: bad record at line {lineno}: {exc}") from exc
        was_tracking = store.track_edges
        store.track_edges = False
        store.append_frame(rec)
        store.track_edges = was_tracking
        store.covis_edges[-1] = edges
    return store


def load(path: str | Path) -> MemoryStore:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(SNAPSHOT_MAGIC):
        try:
            version, length = struct.unpack_from(">BI", raw, len(SNAPSHOT_MAGIC))
            body = raw[len(SNAPSHOT_MAGIC) + 5 :]
            if version != SNAPSHOT_VERSION:
                raise CorruptSnapshot(f"{path}: unsupported binary version {version}")
            if len(body) != length:
                raise CorruptSnapshot(
                    f"{path}: truncated binary body at offset {len(SNAPSHOT_MAGIC) + 5 + len(body)}"
                )
            text = zlib.decompress(body).decode()
        except CorruptSnapshot:
            raise
        except Exception as exc:
            raise CorruptSnapshot(f"{path}: undecodable binary snapshot: {exc}") from exc
        return _parse_jsonl(text.splitlines(), str(path))
    return _parse_jsonl(raw.decode().splitlines(), str(path))


def snapshot(store: MemoryStore, path: str | Path, fmt: str = "jsonl") -> None:
    store.snapshot(path, fmt)
