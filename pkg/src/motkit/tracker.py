"""Online two-stage tracker.

Per frame: detections split at a high score threshold; every live track
(active or inactive) rolls its motion model forward; high-confidence
detections associate first, leftovers of the track pool then try the
low-confidence pool. Unmatched tracks go inactive and keep extrapolating
(the prediction is appended as a pseudo-observation so the motion model
stays warm); tracks inactive past ``max_age`` are removed. Unmatched
high-confidence detections seed new tracks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .assignment import match_stage
from .geometry import BoundingBox
from .kalman import kf_init, kf_predict, kf_update
from .mot_io import Scenario
from .predictor import DEFAULT_WINDOW, PredictorModel, build_window, predict_box


class TrackStatus(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    REMOVED = "removed"


@dataclass(frozen=True)
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    iou_gate_first: float = 0.2
    iou_gate_second: float = 0.3
    max_age: int = 30
    min_score_new_track: float | None = None   # defaults to tau_high
    motion_model: str = "kalman"               # "kalman" | "learned"
    window_length: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ValueError("need 0 <= tau_low < tau_high <= 1")
        for gate in (self.iou_gate_first, self.iou_gate_second):
            if not 0.0 <= gate <= 1.0:
                raise ValueError("IoU gates must lie in [0, 1]")
        if self.max_age < 0:
            raise ValueError("max_age must be >= 0")
        if self.motion_model not in ("kalman", "learned"):
            raise ValueError(f"unknown motion model {self.motion_model!r}")

    @property
    def new_track_threshold(self) -> float:
        return self.tau_high if self.min_score_new_track is None else self.min_score_new_track

    def to_dict(self) -> dict:
        return {"tau_high": self.tau_high, "tau_low": self.tau_low,
                "iou_gate_first": self.iou_gate_first,
                "iou_gate_second": self.iou_gate_second,
                "max_age": self.max_age,
                "min_score_new_track": self.min_score_new_track,
                "motion_model": self.motion_model,
                "window_length": self.window_length}


class Track:
    """One identity: its box history (real and pseudo), lifecycle status
    and the newest motion prediction."""

    __slots__ = ("id", "history", "status", "frames_inactive",
                 "last_prediction", "kf")

    def __init__(self, track_id: int, box: BoundingBox, use_kalman: bool):
        self.id = track_id
        self.history = [box]
        self.status = TrackStatus.ACTIVE
        self.frames_inactive = 0
        self.last_prediction = box
        self.kf = kf_init(box) if use_kalman else None

    def current_box(self) -> BoundingBox:
        if self.kf is not None:
            return self.kf.box()
        return self.history[-1]


class Tracker:
    """Per-sequence association state machine; ids never recycle."""

    def __init__(self, config: TrackerConfig, image_size: tuple[int, int],
                 model: PredictorModel | None = None):
        if config.motion_model == "learned" and model is None:
            raise ValueError("learned motion model requires a predictor model")
        self.config = config
        self.image_size = image_size
        self.model = model
        self.tracks: list[Track] = []
        self._next_id = 1
        self.frame_index = 0

    def _new_track(self, box: BoundingBox) -> Track:
        track = Track(self._next_id, box, use_kalman=self.config.motion_model == "kalman")
        self._next_id += 1
        return track

    def _predict(self, track: Track) -> BoundingBox:
        if self.config.motion_model == "kalman":
            track.kf = kf_predict(track.kf)
            return track.kf.box()
        window = build_window(track.history, self.config.window_length, self.image_size)
        return predict_box(window, self.model)

    def step(self, detections) -> list[tuple[int, BoundingBox]]:
        """Process one frame; returns (id, box) for every track that was
        matched or created this frame."""
        self.frame_index += 1
        cfg = self.config
        dets = list(detections)
        high = [i for i, d in enumerate(dets) if d.score >= cfg.tau_high]
        low = [i for i, d in enumerate(dets) if cfg.tau_low <= d.score < cfg.tau_high]

        live = self.tracks
        for t in live:
            t.last_prediction = self._predict(t)

        first = match_stage([t.last_prediction for t in live],
                            [dets[i].box for i in high], cfg.iou_gate_first)
        det_for: dict[int, int] = {}    # track list index -> detection index
        for ti, di in first.matches:
            det_for[ti] = high[di]

        leftover = list(first.unmatched_tracks)
        second = match_stage([live[ti].last_prediction for ti in leftover],
                             [dets[i].box for i in low], cfg.iou_gate_second)
        for ti, di in second.matches:
            det_for[leftover[ti]] = low[di]

        outputs: list[tuple[int, BoundingBox]] = []
        survivors: list[Track] = []
        for ti, track in enumerate(live):
            if ti in det_for:
                det = dets[det_for[ti]]
                track.history.append(det.box)
                if track.kf is not None:
                    track.kf = kf_update(track.kf, det.box)
                track.status = TrackStatus.ACTIVE
                track.frames_inactive = 0
                outputs.append((track.id, track.current_box()))
                survivors.append(track)
            else:
                track.frames_inactive += 1
                if track.frames_inactive > cfg.max_age:
                    track.status = TrackStatus.REMOVED
                else:
                    track.status = TrackStatus.INACTIVE
                    track.history.append(track.last_prediction)
                    survivors.append(track)

        remaining_high = [high[di] for di in first.unmatched_detections]
        for i in remaining_high:
            if dets[i].score >= cfg.new_track_threshold:
                track = self._new_track(dets[i].box)
                survivors.append(track)
                outputs.append((track.id, track.current_box()))

        self.tracks = survivors
        return outputs


def run_sequence(scenario: Scenario, config: TrackerConfig,
                 model: PredictorModel | None = None) -> list[list[tuple[int, BoundingBox]]]:
    """Run the tracker over all frames of a scenario, in order."""
    tracker = Tracker(config, scenario.image_size, model)
    return [tracker.step(frame) for frame in scenario.frames]
