"""Word-level edit alignment between an original translation and a perturbed one.

Two aligners are provided:

* :func:`levenshtein_align` — classic unit-cost edit-distance alignment
  (match / substitute / delete / insert) with a pinned traceback order so
  that cost ties always resolve to the same operation sequence.
* :func:`tercom_align` — the same, extended with block shifts: a greedy
  loop repeatedly moves one contiguous hypothesis block (content-matching
  some reference span) wherever that strictly lowers ``edit distance + 1``,
  then finishes with a plain Levenshtein pass. Each accepted shift costs 1.

:func:`project` turns an alignment into the per-reference-position token row
consumed by consistency classification: reference positions with no
counterpart get the empty sentinel (``None``); hypothesis tokens aligned to
nothing are dropped and only counted.

Tokens are compared by plain equality; callers normalize tokens (NFC, and
optionally case folding) before aligning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import InternalInvariantError


@dataclass(frozen=True)
class Match:
    ref_index: int
    hyp_index: int


@dataclass(frozen=True)
class Substitute:
    ref_index: int
    hyp_index: int


@dataclass(frozen=True)
class Delete:
    ref_index: int


@dataclass(frozen=True)
class Insert:
    hyp_index: int


@dataclass(frozen=True)
class Shift:
    """Move ``length`` hypothesis tokens starting at ``start`` so that the
    block begins at index ``new_position`` of the sequence with the block
    removed. Shifts apply sequentially, each in the coordinates produced by
    the previous one; Match/Substitute/Insert indices refer to the sequence
    after all shifts.
    """

    start: int
    length: int
    new_position: int


EditOp = Union[Match, Substitute, Delete, Insert, Shift]


@dataclass(frozen=True)
class Alignment:
    """An operation sequence aligning a hypothesis to a reference.

    ``cost`` equals the number of non-Match operations (each substitute,
    delete, insert and shift counts 1).
    """

    ops: tuple[EditOp, ...]
    cost: int

    @property
    def shifts(self) -> tuple[Shift, ...]:
        return tuple(op for op in self.ops if isinstance(op, Shift))

    @property
    def edit_ops(self) -> tuple[EditOp, ...]:
        return tuple(op for op in self.ops if not isinstance(op, Shift))


@dataclass(frozen=True)
class AlignedVariant:
    """One perturbed translation projected onto the original's positions.

    ``projected[j]`` is the hypothesis token standing at reference position
    ``j``, or ``None`` where nothing aligned there. ``dropped_hyp_tokens``
    counts hypothesis tokens (Insert operations) that aligned to no
    reference position and were discarded.
    """

    projected: tuple[Optional[str], ...]
    dropped_hyp_tokens: int = 0


def levenshtein_align(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Align ``hyp`` to ``ref`` minimizing unit-cost edit operations.

    Among cost-equal alignments the traceback prefers, at every step,
    Match > Substitute > Delete > Insert, which pins down a single
    deterministic operation sequence.
    """
    nr, nh = len(ref), len(hyp)
    dp = [[0] * (nh + 1) for _ in range(nr + 1)]
    for i in range(1, nr + 1):
        dp[i][0] = i
    for j in range(1, nh + 1):
        dp[0][j] = j
    for i in range(1, nr + 1):
        row = dp[i]
        prev = dp[i - 1]
        rtok = ref[i - 1]
        for j in range(1, nh + 1):
            best = prev[j - 1] + (rtok != hyp[j - 1])
            up = prev[j] + 1
            if up < best:
                best = up
            left = row[j - 1] + 1
            if left < best:
                best = left
            row[j] = best

    ops: list[EditOp] = []
    i, j = nr, nh
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            ops.append(Match(i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            ops.append(Substitute(i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            ops.append(Delete(i - 1))
            i -= 1
        else:
            ops.append(Insert(j - 1))
            j -= 1
    ops.reverse()
    return Alignment(ops=tuple(ops), cost=dp[nr][nh])


def _edit_cost(ref: Sequence[str], hyp: Sequence[str], limit: Optional[int] = None) -> int:
    """Edit distance only, with optional early exit.

    When ``limit`` is given and the true distance is >= limit, any value
    >= limit may be returned.
    """
    nr, nh = len(ref), len(hyp)
    if nr == 0:
        return nh
    if nh == 0:
        return nr
    prev = list(range(nh + 1))
    cur = [0] * (nh + 1)
    for i in range(1, nr + 1):
        cur[0] = i
        rtok = ref[i - 1]
        best_in_row = cur[0]
        for j in range(1, nh + 1):
            c = prev[j - 1] + (rtok != hyp[j - 1])
            up = prev[j] + 1
            if up < c:
                c = up
            left = cur[j - 1] + 1
            if left < c:
                c = left
            cur[j] = c
            if c < best_in_row:
                best_in_row = c
        if limit is not None and best_in_row >= limit:
            return best_in_row
        prev, cur = cur, prev
    return prev[nh]


def _ref_landing_map(ref_len: int, aln: Alignment) -> tuple[dict[int, int], list[bool]]:
    """Map each ref index to the hyp index aligned with it (Match/Substitute),
    plus a per-ref-index flag for 'covered by a Match'."""
    ref_to_hyp: dict[int, int] = {}
    matched = [False] * ref_len
    for op in aln.ops:
        if isinstance(op, Match):
            ref_to_hyp[op.ref_index] = op.hyp_index
            matched[op.ref_index] = True
        elif isinstance(op, Substitute):
            ref_to_hyp[op.ref_index] = op.hyp_index
    return ref_to_hyp, matched


def _landing_positions(
    i: int,
    length: int,
    k: int,
    ref_len: int,
    cur_len: int,
    ref_to_hyp: dict[int, int],
) -> list[int]:
    """Candidate insertion indices (in block-removed coordinates) that place
    the block at hyp[i:i+length] roughly where ref position k sits."""

    def to_remainder(pos: int) -> int:
        if pos >= i + length:
            return pos - length
        if pos <= i:
            return pos
        return i

    out = []
    pos = ref_to_hyp.get(k)
    if pos is None:
        for d in range(1, ref_len + 1):
            if k - d in ref_to_hyp:
                pos = ref_to_hyp[k - d] + d
                break
            if k + d in ref_to_hyp:
                pos = ref_to_hyp[k + d] - d
                break
    if pos is None:
        pos = k
    hi = cur_len - length
    out.append(max(0, min(to_remainder(pos), hi)))
    out.append(max(0, min(k, hi)))
    return out


def _shift_candidates(
    ref: Sequence[str],
    cur: list[str],
    aln: Alignment,
    max_block_length: int,
    max_shift_distance: int,
) -> list[tuple[int, int, int]]:
    """All (start, length, new_position) shift candidates: contiguous hyp
    blocks whose content equals some reference span that is not already fully
    matched, moved at most ``max_shift_distance`` positions."""
    nr, nh = len(ref), len(cur)
    ref_to_hyp, matched = _ref_landing_map(nr, aln)
    # prefix sums of matched flags, for O(1) "span fully matched" queries
    pref = [0]
    for m in matched:
        pref.append(pref[-1] + m)

    cands: set[tuple[int, int, int]] = set()
    for i in range(nh):
        for k in range(nr):
            if cur[i] != ref[k]:
                continue
            length = 1
            while True:
                span_fully_matched = pref[k + length] - pref[k] == length
                if not span_fully_matched:
                    for j in _landing_positions(i, length, k, nr, nh, ref_to_hyp):
                        if j != i and abs(i - j) <= max_shift_distance:
                            cands.add((i, length, j))
                if (
                    length >= max_block_length
                    or i + length >= nh
                    or k + length >= nr
                    or cur[i + length] != ref[k + length]
                ):
                    break
                length += 1
    return sorted(cands)


def _apply_shift(seq: list[str], start: int, length: int, new_position: int) -> list[str]:
    block = seq[start:start + length]
    rest = seq[:start] + seq[start + length:]
    return rest[:new_position] + block + rest[new_position:]


def tercom_align(
    ref: Sequence[str],
    hyp: Sequence[str],
    *,
    max_block_length: int = 10,
    max_shift_distance: int = 50,
) -> Alignment:
    """Shift-aware alignment: greedy block shifts, then Levenshtein.

    Each iteration evaluates every shift candidate and accepts the one with
    the largest strict improvement of ``edit distance + 1`` over the current
    edit distance; ties go to the smallest block start, then the smallest
    target position, then the shortest block. The loop stops when no shift
    strictly improves, and the recorded cost is ``#shifts + final edit
    distance`` (never more than the plain Levenshtein cost).
    """
    cur = [str(t) for t in hyp]
    ref = list(ref)
    shifts: list[Shift] = []
    cost_cache: dict[tuple[str, ...], int] = {}

    while True:
        aln = levenshtein_align(ref, cur)
        if aln.cost <= 1:
            # a shift costs 1, so nothing can strictly improve on cost <= 1
            break
        best_key: Optional[tuple[int, int, int, int]] = None
        best_seq: Optional[list[str]] = None
        for i, length, j in _shift_candidates(
            ref, cur, aln, max_block_length, max_shift_distance
        ):
            seq = _apply_shift(cur, i, length, j)
            key = tuple(seq)
            cost = cost_cache.get(key)
            if cost is None:
                cost = _edit_cost(ref, seq, limit=aln.cost - 1)
                cost_cache[key] = cost
            gain = aln.cost - (cost + 1)
            if gain <= 0:
                continue
            cand_key = (-gain, i, j, length)
            if best_key is None or cand_key < best_key:
                best_key = cand_key
                best_seq = seq
        if best_key is None:
            break
        _, i, j, length = best_key
        shifts.append(Shift(start=i, length=length, new_position=j))
        cur = best_seq  # type: ignore[assignment]

    return Alignment(ops=tuple(shifts) + aln.ops, cost=len(shifts) + aln.cost)


def project(alignment: Alignment, hyp: Sequence[str], ref_len: int) -> AlignedVariant:
    """Project an aligned hypothesis onto the reference's token positions."""
    seq = [str(t) for t in hyp]
    for op in alignment.ops:
        if isinstance(op, Shift):
            if not (0 <= op.start <= len(seq) - op.length and op.length >= 1):
                raise InternalInvariantError(f"shift out of range: {op}")
            seq = _apply_shift(seq, op.start, op.length, op.new_position)

    unset = object()
    projected: list[object] = [unset] * ref_len
    hyp_seen = [False] * len(seq)
    dropped = 0
    for op in alignment.ops:
        if isinstance(op, (Match, Substitute)):
            if not (0 <= op.ref_index < ref_len and 0 <= op.hyp_index < len(seq)):
                raise InternalInvariantError(f"operation out of range: {op}")
            if projected[op.ref_index] is not unset or hyp_seen[op.hyp_index]:
                raise InternalInvariantError(f"position covered twice: {op}")
            projected[op.ref_index] = seq[op.hyp_index]
            hyp_seen[op.hyp_index] = True
        elif isinstance(op, Delete):
            if not 0 <= op.ref_index < ref_len or projected[op.ref_index] is not unset:
                raise InternalInvariantError(f"bad delete: {op}")
            projected[op.ref_index] = None
        elif isinstance(op, Insert):
            if not 0 <= op.hyp_index < len(seq) or hyp_seen[op.hyp_index]:
                raise InternalInvariantError(f"bad insert: {op}")
            hyp_seen[op.hyp_index] = True
            dropped += 1
    if any(p is unset for p in projected) or not all(hyp_seen):
        raise InternalInvariantError("alignment does not cover all positions")
    return AlignedVariant(projected=tuple(projected), dropped_hyp_tokens=dropped)  # type: ignore[arg-type]


def get_aligner(name: str):
    """Resolve an aligner by its config name ('levenshtein' or 'tercom')."""
    if name == "levenshtein":
        return levenshtein_align
    if name == "tercom":
        return tercom_align
    raise InternalInvariantError(f"unknown aligner: {name!r}")
