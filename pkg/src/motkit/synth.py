"""Synthetic scenario generation.

Parametric ground-truth trajectories (linear, sinusoidal, circular,
crossing, occlusion) with configurable observation noise: Gaussian jitter
on detection centers, log-normal jitter on sizes, score noise, missed
detections and an explicit occlusion window. ``path_noise_std`` adds
i.i.d. wobble to the ground-truth path itself, which puts a common
irreducible floor under every motion model's one-step error.

Everything is driven by one seed; identical (kind, params, seed) triples
reproduce identical scenarios bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import BoundingBox
from .mot_io import Detection, Scenario

KINDS = ("linear", "sinusoidal", "circular", "crossing", "occlusion")


@dataclass(frozen=True)
class ScenarioParams:
    num_frames: int = 60
    num_objects: int = 3
    image_size: tuple[int, int] = (1000, 1000)
    box_size_range: tuple[float, float] = (36.0, 64.0)
    speed_range: tuple[float, float] = (6.0, 14.0)

    # sinusoidal motion
    amplitude_range: tuple[float, float] = (40.0, 90.0)
    period_range: tuple[float, float] = (18.0, 36.0)

    # circular motion
    radius_range: tuple[float, float] = (50.0, 120.0)
    angular_speed_range: tuple[float, float] = (0.15, 0.3)

    # crossing geometry: vertical gap between the two paths, as a fraction
    # of box height (0 would make the boxes coincide mid-sequence)
    crossing_gap: float = 0.6

    # occlusion window (frame indices, 0-based; length counts frames hidden)
    occlusion_start: int = 25
    occlusion_length: int = 10

    # ground-truth path wobble
    path_noise_std: float = 0.0

    # detection model
    center_noise_std: float = 0.0
    size_noise_std: float = 0.0
    miss_prob: float = 0.0
    score_mean: float = 0.9
    score_std: float = 0.03

    def with_overrides(self, **kw) -> "ScenarioParams":
        return replace(self, **kw)


def _clip_box(cx, cy, w, h, image_size) -> BoundingBox:
    wi, hi = image_size
    return BoundingBox(cx=float(np.clip(cx, 0.0, wi)), cy=float(np.clip(cy, 0.0, hi)),
                       w=max(float(w), 1.0), h=max(float(h), 1.0))


def _fit_offset(disp: np.ndarray, lo: float, hi: float,
                rng: np.random.Generator) -> float:
    """Start offset placing the displacement curve inside [lo, hi] when it
    fits (uniformly at random), else centered."""
    dmin, dmax = float(disp.min()), float(disp.max())
    lo2, hi2 = lo - dmin, hi - dmax
    if hi2 <= lo2:
        return (lo + hi) / 2.0 - (dmin + dmax) / 2.0
    return float(rng.uniform(lo2, hi2))


def _gt_paths(kind: str, params: ScenarioParams, rng: np.random.Generator):
    """Sample per-object paths.

    Returns (paths, hidden, specs): paths holds (cx, cy, w, h) arrays over
    time, hidden marks frames without a detection, specs records the
    sampled motion parameters (the parametric oracle for tests).
    """
    n = 2 if kind == "crossing" else params.num_objects
    t_total = params.num_frames
    wi, hi = params.image_size
    margin_x, margin_y = 0.1 * wi, 0.1 * hi
    t = np.arange(t_total, dtype=np.float64)
    paths, hidden, specs = [], [], []

    for k in range(n):
        w = rng.uniform(*params.box_size_range)
        h = rng.uniform(*params.box_size_range)
        speed = rng.uniform(*params.speed_range)
        hide = np.zeros(t_total, dtype=bool)
        spec: dict = {"kind": kind, "w": w, "h": h}

        if kind in ("linear", "occlusion"):
            heading = rng.uniform(-math.pi, math.pi)
            dx = speed * math.cos(heading) * t
            dy = speed * math.sin(heading) * t
            spec.update(speed=speed, heading=heading)
            if kind == "occlusion" and k == 0:
                stop = min(params.occlusion_start + params.occlusion_length, t_total)
                hide[params.occlusion_start:stop] = True
                spec.update(occlusion=(params.occlusion_start, stop))
        elif kind == "sinusoidal":
            direction = 1.0 if rng.random() < 0.5 else -1.0
            amp = rng.uniform(*params.amplitude_range)
            period = rng.uniform(*params.period_range)
            phase = rng.uniform(0.0, 2 * math.pi)
            dx = direction * speed * t
            dy = amp * np.sin(2 * math.pi * t / period + phase)
            spec.update(speed=speed, direction=direction, amplitude=amp,
                        period=period, phase=phase)
        elif kind == "circular":
            radius = rng.uniform(*params.radius_range)
            omega = rng.uniform(*params.angular_speed_range)
            if rng.random() < 0.5:
                omega = -omega
            phase = rng.uniform(0.0, 2 * math.pi)
            dx = radius * np.cos(omega * t + phase)
            dy = radius * np.sin(omega * t + phase)
            spec.update(radius=radius, omega=omega, phase=phase)
        elif kind == "crossing":
            gap = params.crossing_gap * h
            sign = 1.0 if k == 0 else -1.0
            dx = sign * speed * (t - t_total / 2.0)
            dy = np.full(t_total, -sign * gap / 2.0)
            spec.update(speed=speed, sign=sign, gap=gap)
        else:
            raise ValueError(f"unknown scenario kind {kind!r}")

        if kind == "crossing":
            x0, y0 = wi / 2.0, hi / 2.0
        else:
            x0 = _fit_offset(dx, margin_x, wi - margin_x, rng)
            y0 = _fit_offset(dy, margin_y, hi - margin_y, rng)
        spec.update(x0=x0, y0=y0)
        cx, cy = x0 + dx, y0 + dy

        if params.path_noise_std > 0:
            cx = cx + rng.normal(0.0, params.path_noise_std, size=t_total)
            cy = cy + rng.normal(0.0, params.path_noise_std, size=t_total)
        paths.append((cx, cy, np.full(t_total, w), np.full(t_total, h)))
        hidden.append(hide)
        specs.append(spec)
    return paths, hidden, specs


def generate_scenario_with_specs(kind: str, params: ScenarioParams, seed: int,
                                 name: str | None = None):
    """Like :func:`generate_scenario` but also returns the sampled motion
    parameters per object."""
    if kind not in KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}; choose from {KINDS}")
    rng = np.random.default_rng(seed)
    paths, hidden, specs = _gt_paths(kind, params, rng)

    frames: list[list[Detection]] = [[] for _ in range(params.num_frames)]
    gt: list[list[tuple[int, BoundingBox]]] = [[] for _ in range(params.num_frames)]
    for k, (cx, cy, w, h) in enumerate(paths):
        tid = k + 1
        for f in range(params.num_frames):
            box = _clip_box(cx[f], cy[f], w[f], h[f], params.image_size)
            gt[f].append((tid, box))
            if hidden[k][f] or (params.miss_prob > 0 and rng.random() < params.miss_prob):
                continue
            dcx = box.cx + (rng.normal(0.0, params.center_noise_std) if params.center_noise_std else 0.0)
            dcy = box.cy + (rng.normal(0.0, params.center_noise_std) if params.center_noise_std else 0.0)
            dw = box.w * (math.exp(rng.normal(0.0, params.size_noise_std)) if params.size_noise_std else 1.0)
            dh = box.h * (math.exp(rng.normal(0.0, params.size_noise_std)) if params.size_noise_std else 1.0)
            score = float(np.clip(rng.normal(params.score_mean, params.score_std), 0.0, 1.0))
            frames[f].append(Detection(box=_clip_box(dcx, dcy, dw, dh, params.image_size),
                                       score=score))
    scenario = Scenario(name=name or f"{kind}-{seed}", image_size=params.image_size,
                        frames=frames, ground_truth=gt)
    return scenario, specs


def generate_scenario(kind: str, params: ScenarioParams, seed: int,
                      name: str | None = None) -> Scenario:
    """Build a full scenario: parametric ground truth plus detections
    derived from it under the configured noise model."""
    scenario, _ = generate_scenario_with_specs(kind, params, seed, name=name)
    return scenario
