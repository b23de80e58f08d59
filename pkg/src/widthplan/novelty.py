"""Novelty tables driving rollout pruning.

Two tests are supported plus a pass-through mode:

* classic -- a state is novel iff some feature in it has never been seen by
  any admitted state.
* depth -- a state generated at depth d is novel iff some feature is unseen
  or was only ever seen strictly deeper than d.
* none -- everything is novel (pruning disabled).

Queries never mutate; updates happen exactly when a node is admitted to the
tree. Updating with a non-novel feature set is a no-op by construction, so
admission can update unconditionally.

Revisits: a node admitted earlier in the same planning episode is re-tested
when a rollout passes through it. An admitted classic-novel node keeps its
claim permanently (it remains the first state to have set some feature), while
depth re-tests non-strictly (min_depth[f] >= d): the node stays novel while it
is still a shallowest witness for one of its features, and is pruned once
every feature has been reached strictly shallower elsewhere.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable

from .features import FeatureSet


class NoveltyMode(Enum):
    CLASSIC = "classic"
    DEPTH = "depth"
    NONE = "none"

    @classmethod
    def from_string(cls, s: str) -> "NoveltyMode":
        return cls(s.lower())


class ClassicTable:
    """Monotone seen-set: once a feature is seen it stays seen."""

    def __init__(self):
        self.seen: set[int] = set()

    def is_novel(self, fs: Iterable[int]) -> bool:
        seen = self.seen
        return any(f not in seen for f in fs)

    def update(self, fs: Iterable[int]) -> None:
        self.seen.update(fs)

    def reset(self) -> None:
        self.seen.clear()

    def __len__(self) -> int:
        return len(self.seen)


class DepthTable:
    """Per-feature minimum admission depth; absent means unseen."""

    def __init__(self):
        self.min_depth: dict[int, int] = {}

    def is_novel(self, fs: Iterable[int], depth: int) -> bool:
        table = self.min_depth
        for f in fs:
            d = table.get(f)
            if d is None or d > depth:
                return True
        return False

    def is_novel_revisit(self, fs: Iterable[int], depth: int) -> bool:
        # Non-strict: the node's own admission entry counts as a claim.
        table = self.min_depth
        for f in fs:
            d = table.get(f)
            if d is None or d >= depth:
                return True
        return False

    def update(self, fs: Iterable[int], depth: int) -> None:
        table = self.min_depth
        for f in fs:
            d = table.get(f)
            if d is None or depth < d:
                table[f] = depth

    def reset(self) -> None:
        self.min_depth.clear()

    def __len__(self) -> int:
        return len(self.min_depth)


class NoveltyTable:
    """Mode-dispatching novelty record for one planning episode."""

    def __init__(self, mode: NoveltyMode | str):
        self.mode = NoveltyMode(mode) if isinstance(mode, str) else mode
        self._classic = ClassicTable()
        self._depth = DepthTable()

    def is_novel(self, fs: FeatureSet, depth: int) -> bool:
        """Admission-time test for a newly generated node."""
        if self.mode is NoveltyMode.NONE:
            return True
        if self.mode is NoveltyMode.CLASSIC:
            return self._classic.is_novel(fs)
        return self._depth.is_novel(fs, depth)

    def is_novel_revisit(self, fs: FeatureSet, depth: int) -> bool:
        """Re-test for a previously admitted (and then novel) node."""
        if self.mode is NoveltyMode.DEPTH:
            return self._depth.is_novel_revisit(fs, depth)
        return True

    def update(self, fs: FeatureSet, depth: int) -> None:
        if self.mode is NoveltyMode.CLASSIC:
            self._classic.update(fs)
        elif self.mode is NoveltyMode.DEPTH:
            self._depth.update(fs, depth)

    def reset(self) -> None:
        self._classic.reset()
        self._depth.reset()
