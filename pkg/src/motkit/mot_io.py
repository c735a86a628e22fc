"""MOTChallenge text I/O and the Scenario container.

Lines are ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``.
Rows with id -1 are detections; rows with a positive id carry an
identity (ground truth or tracker output). Boxes convert between the
file's top-left origin and the center format used everywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import BoundingBox, box_to_tlwh, tlwh_to_box

IdBox = tuple[int, BoundingBox]


@dataclass(frozen=True, slots=True)
class Detection:
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


@dataclass
class Scenario:
    """One sequence: per-frame detections plus optional identities.

    Frames are contiguous starting at 1; ``frames[i]`` belongs to frame
    i+1, and likewise for ``ground_truth`` when present.
    """

    name: str
    image_size: tuple[int, int]
    frames: list[list[Detection]] = field(default_factory=list)
    ground_truth: list[list[IdBox]] | None = None

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def gt_tracks(self) -> dict[int, list[tuple[int, BoundingBox]]]:
        """Ground truth regrouped per identity as (frame_index, box) lists."""
        if self.ground_truth is None:
            raise ValueError(f"scenario {self.name!r} carries no ground truth")
        tracks: dict[int, list[tuple[int, BoundingBox]]] = {}
        for f, entries in enumerate(self.ground_truth):
            for tid, box in entries:
                tracks.setdefault(tid, []).append((f, box))
        for rows in tracks.values():
            rows.sort(key=lambda r: r[0])
        return tracks


class MotFormatError(ValueError):
    """Raised for malformed MOT lines, with the offending line number."""


def _parse_rows(path) -> tuple[list, int]:
    rows = []
    max_frame = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 7:
                raise MotFormatError(f"{path}:{lineno}: expected >= 7 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                tid = int(float(parts[1]))
                left, top, w, h, conf = (float(p) for p in parts[2:7])
            except ValueError as exc:
                raise MotFormatError(f"{path}:{lineno}: {exc}") from None
            if frame < 1:
                raise MotFormatError(f"{path}:{lineno}: frame index {frame} < 1")
            rows.append((frame, tid, left, top, w, h, conf))
            max_frame = max(max_frame, frame)
    return rows, max_frame


def parse_mot(path, name: str | None = None,
              image_size: tuple[int, int] = (1920, 1080),
              num_frames: int | None = None) -> Scenario:
    """Read a MOT text file into a Scenario.

    Detections (id -1) land in ``frames`` with ``conf`` as their score;
    identity rows land in ``ground_truth``. ``num_frames`` extends the
    frame range beyond the last populated line (the text format cannot
    express trailing empty frames on its own).
    """
    rows, max_frame = _parse_rows(path)
    n = max(max_frame, num_frames or 0)
    frames: list[list[Detection]] = [[] for _ in range(n)]
    gt: list[list[IdBox]] = [[] for _ in range(n)]
    has_gt = False
    for frame, tid, left, top, w, h, conf in rows:
        box = tlwh_to_box((left, top, w, h))
        if tid == -1:
            frames[frame - 1].append(Detection(box=box, score=min(max(conf, 0.0), 1.0)))
        else:
            if tid < 1:
                raise MotFormatError(f"{path}: identity {tid} must be positive or -1")
            has_gt = True
            gt[frame - 1].append((tid, box))
    return Scenario(name=name or Path(path).stem, image_size=image_size,
                    frames=frames, ground_truth=gt if has_gt else None)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def write_mot_detections(path, frames: list[list[Detection]]) -> None:
    """Write per-frame detections (id -1) with 2-decimal fixed precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for f, dets in enumerate(frames, start=1):
            for d in dets:
                left, top, w, h = box_to_tlwh(d.box)
                fh.write(f"{f},-1,{_fmt(left)},{_fmt(top)},{_fmt(w)},{_fmt(h)},"
                         f"{_fmt(d.score)},-1,-1,-1\n")


def write_mot_tracks(path, tracks: list[list[IdBox]]) -> None:
    """Write per-frame (id, box) outputs with 2-decimal fixed precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for f, entries in enumerate(tracks, start=1):
            for tid, box in entries:
                left, top, w, h = box_to_tlwh(box)
                fh.write(f"{f},{tid},{_fmt(left)},{_fmt(top)},{_fmt(w)},{_fmt(h)},"
                         f"1,-1,-1,-1\n")


def load_track_file(path, num_frames: int | None = None) -> list[list[IdBox]]:
    """Read a tracker results file back as per-frame (id, box) lists."""
    rows, max_frame = _parse_rows(path)
    n = max(max_frame, num_frames or 0)
    out: list[list[IdBox]] = [[] for _ in range(n)]
    for frame, tid, left, top, w, h, _conf in rows:
        if tid < 1:
            raise MotFormatError(f"{path}: track rows need positive ids, got {tid}")
        out[frame - 1].append((tid, tlwh_to_box((left, top, w, h))))
    return out


# --- scenario bundles ------------------------------------------------------
# A generated scenario is stored as three sibling files sharing a stem:
# <stem>.det.txt (detections), <stem>.gt.txt (identities) and
# <stem>.info.json (name, image size, frame count).


def scenario_paths(stem) -> dict[str, Path]:
    stem = str(stem)
    return {"det": Path(stem + ".det.txt"),
            "gt": Path(stem + ".gt.txt"),
            "info": Path(stem + ".info.json")}


def save_scenario(stem, scenario: Scenario) -> list[Path]:
    paths = scenario_paths(stem)
    info = {"name": scenario.name, "image_size": list(scenario.image_size),
            "num_frames": scenario.num_frames}
    with open(paths["info"], "w", encoding="utf-8") as fh:
        json.dump(info, fh, sort_keys=True)
        fh.write("\n")
    write_mot_detections(paths["det"], scenario.frames)
    if scenario.ground_truth is not None:
        write_mot_tracks(paths["gt"], scenario.ground_truth)
    return list(paths.values())


def load_scenario(stem) -> Scenario:
    paths = scenario_paths(stem)
    with open(paths["info"], "r", encoding="utf-8") as fh:
        info = json.load(fh)
    image_size = tuple(info["image_size"])
    n = int(info["num_frames"])
    scenario = parse_mot(paths["det"], name=info["name"], image_size=image_size,
                         num_frames=n)
    if paths["gt"].exists():
        gt_scenario = parse_mot(paths["gt"], name=info["name"], image_size=image_size,
                                num_frames=n)
        scenario.ground_truth = gt_scenario.ground_truth
    return scenario
