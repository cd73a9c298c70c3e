"""Toy straight-line tracking events.

Particles travel along straight lines ``y = m * x`` through the origin and
cross ``n_layers`` equally spaced vertical detection layers at
``x = 1, 2, ..., n_layers``.  Every pair of hits on adjacent layers is a
candidate segment (doublet); the segments joining two hits of the same
particle form the ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"
MIN_SLOPE_SEPARATION = 0.05
ALIGNMENT_EPSILON = 1e-9


class EventSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Hit:
    layer: int
    x: float
    y: float
    particle_id: int


@dataclass(frozen=True)
class Segment:
    index: int
    from_hit: int
    to_hit: int


@dataclass
class Event:
    n_particles: int
    n_layers: int
    seed: int
    hits: list[Hit]
    segments: list[Segment]
    truth: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def expected_true_segments(self) -> int:
        return self.n_particles * (self.n_layers - 1)

    def segment_gap(self, seg: Segment) -> int:
        return self.hits[seg.from_hit].layer

    def direction(self, seg: Segment) -> np.ndarray:
        a, b = self.hits[seg.from_hit], self.hits[seg.to_hit]
        return np.array([b.x - a.x, b.y - a.y])

    def to_dict(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "n_layers": self.n_layers,
            "seed": self.seed,
            "rng": self.metadata.get("rng", RNG_ALGORITHM),
            "hits": [
                {"layer": h.layer, "x": h.x, "y": h.y, "particle_id": h.particle_id}
                for h in self.hits
            ],
            "segments": [
                {"index": s.index, "from": s.from_hit, "to": s.to_hit}
                for s in self.segments
            ],
            "truth": [int(t) for t in self.truth],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: dict) -> "Event":
        hits = [Hit(int(h["layer"]), float(h["x"]), float(h["y"]), int(h["particle_id"]))
                for h in doc["hits"]]
        segments = [Segment(int(s["index"]), int(s["from"]), int(s["to"]))
                    for s in doc["segments"]]
        return cls(
            n_particles=int(doc["n_particles"]),
            n_layers=int(doc["n_layers"]),
            seed=int(doc["seed"]),
            hits=hits,
            segments=segments,
            truth=np.asarray(doc["truth"], dtype=np.int8),
            metadata={"rng": doc.get("rng", RNG_ALGORITHM)},
        )


def _is_power_of_two(k: int) -> bool:
    return k > 0 and k & (k - 1) == 0


def _draw_slopes(n_particles: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        slopes = rng.uniform(-1.0, 1.0, size=n_particles)
        if n_particles == 1:
            return slopes
        gaps = np.diff(np.sort(slopes))
        if gaps.min() >= MIN_SLOPE_SEPARATION:
            return slopes


def generate_event(n_particles: int, n_layers: int, seed: int) -> Event:
    """Generate a seeded toy event.

    Hits within a layer are ordered by ascending ``y``.  Segments are
    enumerated by (layer, from-hit position, to-hit position), so the
    segment count is ``n_particles**2 * (n_layers - 1)``.

    Raises
    ------
    EventSizeError
        If the segment count is not a power of two of at least 2.
    """
    if n_particles < 1 or n_layers < 2:
        raise EventSizeError(
            f"need n_particles >= 1 and n_layers >= 2, got ({n_particles}, {n_layers})")
    n_segments = n_particles ** 2 * (n_layers - 1)
    if not _is_power_of_two(n_segments) or n_segments < 2:
        raise EventSizeError(
            f"N = n_particles^2 * (n_layers - 1) = {n_particles}^2 * {n_layers - 1} = "
            f"{n_segments} must be a power of two >= 2 so that it maps onto "
            f"log2(N) >= 1 qubits")

    rng = np.random.Generator(np.random.PCG64(seed))
    slopes = _draw_slopes(n_particles, rng)

    hits: list[Hit] = []
    layer_hits: list[list[int]] = []
    for layer in range(n_layers):
        x = float(layer + 1)
        row = sorted(((float(m * x), pid) for pid, m in enumerate(slopes)))
        ids = []
        for y, pid in row:
            ids.append(len(hits))
            hits.append(Hit(layer=layer, x=x, y=y, particle_id=pid))
        layer_hits.append(ids)

    segments: list[Segment] = []
    truth: list[int] = []
    for layer in range(n_layers - 1):
        for a in layer_hits[layer]:
            for b in layer_hits[layer + 1]:
                segments.append(Segment(len(segments), a, b))
                truth.append(int(hits[a].particle_id == hits[b].particle_id))

    return Event(
        n_particles=n_particles,
        n_layers=n_layers,
        seed=seed,
        hits=hits,
        segments=segments,
        truth=np.asarray(truth, dtype=np.int8),
        metadata={"rng": RNG_ALGORITHM, "slopes": slopes.tolist()},
    )


def segment_cosine(event: Event, a: Segment, b: Segment) -> float:
    """Cosine of the angle between two head-to-tail chained segments."""
    if a.to_hit != b.from_hit:
        raise ValueError(
            f"segments {a.index} and {b.index} are not chained: "
            f"{a.index}.to_hit={a.to_hit} != {b.index}.from_hit={b.from_hit}")
    da, db = event.direction(a), event.direction(b)
    cos = float(da @ db / (np.linalg.norm(da) * np.linalg.norm(db)))
    return min(1.0, max(-1.0, cos))


def qubit_count(event: Event) -> int:
    n = event.n_segments.bit_length() - 1
    assert 1 << n == event.n_segments
    return n


def chained_pairs(event: Event) -> list[tuple[Segment, Segment]]:
    """All (a, b) with ``a.to_hit == b.from_hit``, in segment-index order."""
    starting_at: dict[int, list[Segment]] = {}
    for s in event.segments:
        starting_at.setdefault(s.from_hit, []).append(s)
    return [(a, b) for a in event.segments for b in starting_at.get(a.to_hit, [])]


def table1_sizes() -> list[tuple[int, int]]:
    """(particles, layers) rows of the problem-size table, 8x8 up to 256x256."""
    return [(2, 3), (2, 5), (4, 3), (4, 5), (8, 3), (8, 5)]


def size_label(n_particles: int, n_layers: int) -> str:
    n = n_particles ** 2 * (n_layers - 1)
    return f"{n}x{n}"


def qubits_for(n_particles: int, n_layers: int) -> int:
    return int(math.log2(n_particles ** 2 * (n_layers - 1)))
