"""Boolean feature sets over pixel observations.

Two extractor families drive the novelty tests: the raw per-pixel set (one
feature per (x, y, color) triple, the default), and the three-tier tile
cascade of basic, pairwise-offset-in-space, and pairwise-offset-in-time
features for comparisons against tile-based planners.

Feature ids are plain ints, injective across families: ``id = family *
FAMILY_STRIDE + local`` with a per-family mixed-radix local encoding, so sets
from different tiers never collide and any id can be decoded for debugging.
A FeatureSet is a sorted tuple of ids.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigMismatch
from .mdp import Observation

FeatureSet = tuple[int, ...]

FAMILY_PIXEL = 0
FAMILY_BASIC = 1
FAMILY_BPROS = 2
FAMILY_BPROT = 3

FAMILY_STRIDE = 1 << 42

MODE_RAW_PIXEL = "raw-pixel"
MODE_BPROST = "bprost"


@dataclass(frozen=True)
class ExtractorConfig:
    """Feature extraction parameters for one observation geometry.

    tile_cols x tile_rows is the tile grid; it must exactly cover the
    observation. max_offset_* cap the |i|, |j| relative offsets of the
    pairwise tiers; None means the full tile-grid span.
    """

    mode: str = MODE_RAW_PIXEL
    width: int = 10
    height: int = 10
    palette_size: int = 4
    tile_cols: int | None = None
    tile_rows: int | None = None
    max_offset_cols: int | None = None
    max_offset_rows: int | None = None

    def __post_init__(self):
        if self.mode not in (MODE_RAW_PIXEL, MODE_BPROST):
            raise ConfigMismatch(f"unknown extractor mode {self.mode!r}")
        if self.tile_cols is None:
            object.__setattr__(self, "tile_cols", self.width)
        if self.tile_rows is None:
            object.__setattr__(self, "tile_rows", self.height)
        if self.width % self.tile_cols or self.height % self.tile_rows:
            raise ConfigMismatch(
                f"{self.tile_cols}x{self.tile_rows} tiles do not cover a "
                f"{self.width}x{self.height} observation"
            )

    @property
    def tile_pixel_size(self) -> tuple[int, int]:
        return self.width // self.tile_cols, self.height // self.tile_rows

    @property
    def offset_span(self) -> tuple[int, int]:
        ci = self.tile_cols - 1 if self.max_offset_cols is None else self.max_offset_cols
        cj = self.tile_rows - 1 if self.max_offset_rows is None else self.max_offset_rows
        return ci, cj

    def check_observation(self, obs: Observation) -> None:
        if (obs.width, obs.height) != (self.width, self.height):
            raise ConfigMismatch(
                f"observation {obs.width}x{obs.height} does not match config "
                f"{self.width}x{self.height}"
            )
        if obs.palette_size > self.palette_size:
            raise ConfigMismatch(
                f"observation palette {obs.palette_size} exceeds config {self.palette_size}"
            )

    # -- id encoding ------------------------------------------------------

    def encode_pixel(self, x: int, y: int, c: int) -> int:
        return (y * self.width + x) * self.palette_size + c

    def encode_basic(self, w: int, h: int, c: int) -> int:
        local = (h * self.tile_cols + w) * self.palette_size + c
        return FAMILY_BASIC * FAMILY_STRIDE + local

    def _encode_pair(self, family: int, c1: int, c2: int, i: int, j: int) -> int:
        # Offsets are encoded over the full span so ids stay stable when the
        # configured cap shrinks the generated set.
        si, sj = self.tile_cols - 1, self.tile_rows - 1
        local = (c1 * self.palette_size + c2) * (2 * si + 1) * (2 * sj + 1)
        local += (i + si) * (2 * sj + 1) + (j + sj)
        return family * FAMILY_STRIDE + local

    def encode_bpros(self, c1: int, c2: int, i: int, j: int) -> int:
        return self._encode_pair(FAMILY_BPROS, c1, c2, i, j)

    def encode_bprot(self, c1: int, c2: int, i: int, j: int) -> int:
        return self._encode_pair(FAMILY_BPROT, c1, c2, i, j)

    def decode(self, feature_id: int) -> tuple:
        """Inverse of the encoders; returns a (family-name, fields...) tuple."""
        family, local = divmod(feature_id, FAMILY_STRIDE)
        if family == FAMILY_PIXEL:
            cell, c = divmod(local, self.palette_size)
            y, x = divmod(cell, self.width)
            return ("pixel", x, y, c)
        if family == FAMILY_BASIC:
            cell, c = divmod(local, self.palette_size)
            h, w = divmod(cell, self.tile_cols)
            return ("basic", w, h, c)
        if family in (FAMILY_BPROS, FAMILY_BPROT):
            si, sj = self.tile_cols - 1, self.tile_rows - 1
            pair, rest = divmod(local, (2 * si + 1) * (2 * sj + 1))
            c1, c2 = divmod(pair, self.palette_size)
            iq, jq = divmod(rest, 2 * sj + 1)
            name = "bpros" if family == FAMILY_BPROS else "bprot"
            return (name, c1, c2, iq - si, jq - sj)
        raise ValueError(f"unknown feature family in id {feature_id}")

    def universe_size(self) -> int:
        """Number of distinct feature ids the active mode can emit."""
        pixel = self.width * self.height * self.palette_size
        if self.mode == MODE_RAW_PIXEL:
            return pixel
        ci, cj = self.offset_span
        basic = self.tile_cols * self.tile_rows * self.palette_size
        pair = self.palette_size**2 * (2 * ci + 1) * (2 * cj + 1)
        return basic + 2 * pair


def pixel_features(obs: Observation, cfg: ExtractorConfig) -> FeatureSet:
    """One feature per pixel: true iff pixel (x, y) holds color c."""
    cfg.check_observation(obs)
    c = cfg.palette_size
    # Pixel index is row-major, so ids come out already sorted.
    return tuple(idx * c + v for idx, v in enumerate(obs.pixels))


def _basic_triples(obs: Observation, cfg: ExtractorConfig) -> set[tuple[int, int, int]]:
    px_w, px_h = cfg.tile_pixel_size
    seen: set[tuple[int, int, int]] = set()
    for idx, v in enumerate(obs.pixels):
        y, x = divmod(idx, obs.width)
        seen.add((x // px_w, y // px_h, v))
    return seen


def basic_tile_features(obs: Observation, cfg: ExtractorConfig) -> FeatureSet:
    """Tile features: f(w, h, c) iff tile (w, h) contains a pixel of color c."""
    cfg.check_observation(obs)
    return tuple(sorted(cfg.encode_basic(w, h, c) for w, h, c in _basic_triples(obs, cfg)))


def _decode_basic_set(basic: FeatureSet, cfg: ExtractorConfig) -> list[tuple[int, int, int]]:
    out = []
    for fid in basic:
        kind, w, h, c = cfg.decode(fid)
        if kind != "basic":
            raise ConfigMismatch(f"feature {fid} is not a basic tile feature")
        out.append((w, h, c))
    return out


def bpros_features(basic: FeatureSet, cfg: ExtractorConfig) -> FeatureSet:
    """Pairwise relative offsets in space over one frame's basic set.

    f(c1, c2, i, j) is present iff some tile (w, h) holds c1 while tile
    (w+i, h+j) holds c2. The self pair (c, c, 0, 0) is always included for
    any occupied tile.
    """
    triples = _decode_basic_set(basic, cfg)
    ci, cj = cfg.offset_span
    found: set[int] = set()
    for w1, h1, c1 in triples:
        for w2, h2, c2 in triples:
            i, j = w2 - w1, h2 - h1
            if abs(i) <= ci and abs(j) <= cj:
                found.add(cfg.encode_bpros(c1, c2, i, j))
    return tuple(sorted(found))


def bprot_features(
    basic_now: FeatureSet, basic_prev: FeatureSet, cfg: ExtractorConfig
) -> FeatureSet:
    """Pairwise relative offsets in time: current frame against the previous one.

    f_t(c1, c2, i, j) is present iff the current frame holds c1 at tile (w, h)
    and the previous frame holds c2 at tile (w+i, h+j).
    """
    now = _decode_basic_set(basic_now, cfg)
    prev = _decode_basic_set(basic_prev, cfg)
    ci, cj = cfg.offset_span
    found: set[int] = set()
    for w1, h1, c1 in now:
        for w2, h2, c2 in prev:
            i, j = w2 - w1, h2 - h1
            if abs(i) <= ci and abs(j) <= cj:
                found.add(cfg.encode_bprot(c1, c2, i, j))
    return tuple(sorted(found))


def background_observation(cfg: ExtractorConfig) -> Observation:
    """All-background frame standing in for the previous frame at episode start."""
    return Observation(cfg.width, cfg.height, cfg.palette_size, (0,) * (cfg.width * cfg.height))


def bprost_features(
    obs_now: Observation, obs_prev: Observation | None, cfg: ExtractorConfig
) -> FeatureSet:
    """Disjoint-family union of basic, space-offset, and time-offset sets."""
    if obs_prev is None:
        obs_prev = background_observation(cfg)
    basic_now = basic_tile_features(obs_now, cfg)
    basic_prev = basic_tile_features(obs_prev, cfg)
    merged = (
        basic_now
        + bpros_features(basic_now, cfg)
        + bprot_features(basic_now, basic_prev, cfg)
    )
    return tuple(sorted(merged))


class FeatureExtractor:
    """Mode-dispatching facade used by the planners.

    Pure value-in/value-out: the only temporal context is the explicit
    previous-frame argument consumed by the time-offset tier.
    """

    def __init__(self, cfg: ExtractorConfig):
        self.cfg = cfg

    def features(self, obs: Observation, prev_obs: Observation | None = None) -> FeatureSet:
        if self.cfg.mode == MODE_RAW_PIXEL:
            return pixel_features(obs, self.cfg)
        return bprost_features(obs, prev_obs, self.cfg)

    def universe_size(self) -> int:
        return self.cfg.universe_size()

    @classmethod
    def for_observation(cls, obs: Observation, mode: str = MODE_RAW_PIXEL, **kwargs):
        cfg = ExtractorConfig(
            mode=mode,
            width=obs.width,
            height=obs.height,
            palette_size=obs.palette_size,
            **kwargs,
        )
        return cls(cfg)
