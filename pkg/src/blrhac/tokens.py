"""208-token vocabulary and fixed-length encoding of interaction histories.

Layout of an encoded window: left PAD, then BOS, then one (object, proposal,
correction) token triple per past step, then the object token of the current
pick. Sequence length is 3k + 2 for history length k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VOCAB_SIZE = 208
PAD, BOS, SEP_STEP, SEP_FIELDS = 0, 1, 2, 3  # ids 4-7 reserved
LOC_BASE = 8  # location l -> 8 + l,   l in [0, 100)
OBJ_BASE = 108  # object o  -> 108 + o,  o in [0, 100)

DEFAULT_HISTORY_LEN = 50


def location_token(l: int) -> int:
    if not 0 <= l < 100:
        raise ValueError(f"location id {l} outside vocabulary range")
    return LOC_BASE + l


def object_token(o: int) -> int:
    if not 0 <= o < 100:
        raise ValueError(f"object id {o} outside vocabulary range")
    return OBJ_BASE + o


def sequence_length(k: int) -> int:
    return 3 * k + 2


@dataclass
class HistoryWindow:
    """Last k (a_h, a_r, a_c) triples under the current preference, oldest first.

    current_pick is None before the leader has picked (e.g. when bootstrapping
    theta at session start); the sequence then ends at the BOS / last triple.
    """

    current_pick: int | None
    entries: list[tuple[int, int, int]] = field(default_factory=list)
    k: int = DEFAULT_HISTORY_LEN

    def __post_init__(self):
        if len(self.entries) > self.k:
            self.entries = self.entries[-self.k :]


@dataclass
class TokenSequence:
    tokens: np.ndarray  # (3k+2,) int64
    attention_mask: np.ndarray  # (3k+2,) bool, True on non-PAD positions


def encode_history(window: HistoryWindow, spec) -> TokenSequence:
    for a_h, a_r, a_c in window.entries:
        if not (0 <= a_h < spec.num_objects):
            raise ValueError(f"object id {a_h} outside environment range")
        if not (0 <= a_r < spec.num_locations and 0 <= a_c < spec.num_locations):
            raise ValueError("location id outside environment range")
    if window.current_pick is not None and not 0 <= window.current_pick < spec.num_objects:
        raise ValueError(f"pick {window.current_pick} outside environment range")

    body = [BOS]
    for a_h, a_r, a_c in window.entries[-window.k :]:
        body += [object_token(a_h), location_token(a_r), location_token(a_c)]
    if window.current_pick is not None:
        body.append(object_token(window.current_pick))

    n = sequence_length(window.k)
    tokens = np.full(n, PAD, dtype=np.int64)
    tokens[n - len(body) :] = body
    mask = np.zeros(n, dtype=bool)
    mask[n - len(body) :] = True
    return TokenSequence(tokens=tokens, attention_mask=mask)
