"""Experiment descriptions and the deterministic replicate pipeline.

An ExperimentSpec pins down everything a replicate needs: the tessellation
model, core window, buffer, coloring threshold(s), replicate count and the
master seed. Replicate k of an experiment always sees the same tessellation
and uniforms no matter how many workers run, because every draw comes from a
stream keyed by (master_seed, k, tag).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .geometry import Window
from .percolation import Coloring, color
from .point_process import ProcessSpec, sample_process
from .streams import stream
from .tessellation import Tessellation, build_lattice_tessellation, build_voronoi

LATTICE_KINDS = ("square_lattice", "hexagonal_lattice")

DEFAULT_BUFFER_SCALE = 5.0  # buffer = 5 / sqrt(intensity) unless overridden


@dataclass(frozen=True)
class ExperimentSpec:
    process: ProcessSpec
    window: Window
    adjacency: str = "face"
    buffer: float | None = None
    p: float | None = None
    p_grid: tuple | None = None
    replicates: int = 100
    master_seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.adjacency not in ("face", "star"):
            raise ParameterError("adjacency must be 'face' or 'star'")
        if self.p is not None and not (0.0 <= self.p <= 1.0):
            raise ParameterError("p must lie in [0, 1]")
        if self.p_grid is not None:
            object.__setattr__(self, "p_grid", tuple(float(x) for x in self.p_grid))

    def buffer_width(self) -> float:
        if self.buffer is not None:
            return float(self.buffer)
        if self.process.kind in LATTICE_KINDS:
            return 0.0
        return DEFAULT_BUFFER_SCALE / np.sqrt(self.process.intensity())

    def to_json(self) -> dict:
        return {
            "process": self.process.to_json(),
            "window": self.window.to_json(),
            "adjacency": self.adjacency,
            "buffer": self.buffer,
            "p": self.p,
            "p_grid": list(self.p_grid) if self.p_grid is not None else None,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "params": {k: self.params[k] for k in sorted(self.params)},
        }

    @staticmethod
    def from_json(obj) -> "ExperimentSpec":
        return ExperimentSpec(
            process=ProcessSpec.from_json(obj["process"]),
            window=Window.from_json(obj["window"]),
            adjacency=obj.get("adjacency", "face"),
            buffer=obj.get("buffer"),
            p=obj.get("p"),
            p_grid=tuple(obj["p_grid"]) if obj.get("p_grid") else None,
            replicates=int(obj.get("replicates", 100)),
            master_seed=int(obj.get("master_seed", 0)),
            params=dict(obj.get("params", {})),
        )

    def spec_hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def build_tessellation(spec: ExperimentSpec, rep: int) -> Tessellation:
    """The standard per-replicate tessellation for an experiment."""
    kind = spec.process.kind
    if kind in LATTICE_KINDS:
        spacing = float(spec.process.params["spacing"])
        if spec.process.params.get("random_shift", False):
            rng = stream(spec.master_seed, rep, "shift")
            shift = rng.random(2) * spacing
        else:
            shift = np.zeros(2)
        return build_lattice_tessellation(kind.replace("_lattice", ""), spacing, shift,
                                          spec.window)
    rng = stream(spec.master_seed, rep, "tess")
    buffer_width = spec.buffer_width()
    sampling = spec.window.expand(buffer_width)
    config = sample_process(spec.process, sampling, rng)
    return build_voronoi(config, spec.window, buffer_width)


def coloring_for(spec: ExperimentSpec, rep: int, tess: Tessellation,
                 p: float | None = None) -> Coloring:
    rng = stream(spec.master_seed, rep, "color")
    return color(tess, spec.p if p is None else p, rng)


def parallel_map(fn, n: int, workers: int = 1, chunksize: int | None = None) -> list:
    """Apply a picklable fn to 0..n-1, preserving index order.

    Aggregations downstream consume the ordered list, so results are
    identical for every worker count.
    """
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    if chunksize is None:
        chunksize = max(1, n // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), chunksize=chunksize))
