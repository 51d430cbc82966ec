"""Simulated-I/O external sort engine.

Two run-formation strategies over the same replacement-selection core:

* ``sort_srs``: standard replacement selection.  Runs roughly twice memory
  on random input, a single run on sorted input; every tuple is written to a
  simulated run and read back through the merge.
* ``sort_mrs``: segment-aware variant for input already sorted on a key
  prefix.  Tuples sharing a prefix value form a segment; the heap is emptied
  at every segment boundary, so segments that fit in memory are sorted and
  emitted with no simulated I/O at all, and output starts after the first
  segment instead of after the whole input.

I/O is counted in blocks against in-memory "runs"; nothing touches the file
system.  Comparison counts are logical key comparisons; the number of key
positions actually inspected is tracked separately.
"""

from __future__ import annotations

import heapq
import math
import random
import struct
import tempfile
from dataclasses import dataclass

from .catalog_stats import BlockConfig
from .errors import ConfigError, UnsortedPrefix, ValidationError


@dataclass(frozen=True, slots=True)
class Record:
    """A sort tuple: fixed integer key vector plus a simulated byte width."""

    keys: tuple[int, ...]
    payload_bytes: int


@dataclass(frozen=True)
class SortSpec:
    target_order_len: int
    known_prefix_len: int
    cfg: BlockConfig
    file_backed: bool = False  # spill runs to real temp files instead of lists

    def __post_init__(self) -> None:
        if self.target_order_len < 1:
            raise ValidationError("target_order_len must be >= 1")
        if not (0 <= self.known_prefix_len < self.target_order_len):
            raise ValidationError("known_prefix_len must be in [0, target_order_len)")


@dataclass
class SortMetrics:
    run_blocks_written: int = 0
    run_blocks_read: int = 0
    comparisons: int = 0
    positions_inspected: int = 0
    tuples_in_before_first_out: int = 0
    runs_generated: int = 0


class _Source:
    """One-slot lookahead over the input; only take() counts as consumed."""

    __slots__ = ("_it", "_head", "_has_head", "taken")

    def __init__(self, it):
        self._it = iter(it)
        self._head = None
        self._has_head = False
        self.taken = 0

    def peek(self):
        if not self._has_head:
            self._head = next(self._it, None)
            self._has_head = True
        return self._head

    def take(self):
        r = self.peek()
        if r is None:
            raise StopIteration
        self._has_head = False
        self.taken += 1
        return r


class _Cmp:
    """Counted key comparison over key positions [lo, hi)."""

    __slots__ = ("met", "lo", "hi")

    def __init__(self, met: SortMetrics, lo: int, hi: int):
        self.met = met
        self.lo = lo
        self.hi = hi

    def less(self, a: tuple, b: tuple) -> bool:
        self.met.comparisons += 1
        for i in range(self.lo, self.hi):
            self.met.positions_inspected += 1
            if a[i] != b[i]:
                return a[i] < b[i]
        return False


class _Item:
    """Heap entry; the run tag orders entries across runs for free."""

    __slots__ = ("run", "rec", "cmp")

    def __init__(self, run: int, rec: Record, cmp: _Cmp):
        self.run = run
        self.rec = rec
        self.cmp = cmp

    def __lt__(self, other: "_Item") -> bool:
        if self.run != other.run:
            return self.run < other.run
        return self.cmp.less(self.rec.keys, other.rec.keys)


def _run_blocks(records, block_bytes: int) -> int:
    total = sum(r.payload_bytes for r in records)
    return math.ceil(total / block_bytes) if total else 0


def _fanin(cfg: BlockConfig) -> int:
    if cfg.memory_blocks < 3:
        raise ConfigError("external merging needs memory_blocks >= 3")
    return cfg.memory_blocks - 1


class _Run:
    """One sorted run: an in-memory list, or a real temp file when the sort
    is file-backed."""

    __slots__ = ("blocks", "count", "_records", "_file")

    def __init__(self, records: list[Record], block_bytes: int, file_backed: bool):
        self.blocks = _run_blocks(records, block_bytes)
        self.count = len(records)
        if file_backed:
            self._records = None
            self._file = tempfile.TemporaryFile()
            for r in records:
                keys = r.keys
                self._file.write(struct.pack(f"<H{len(keys)}qq", len(keys), *keys, r.payload_bytes))
            self._file.flush()
        else:
            self._records = records
            self._file = None

    def stream(self):
        if self._records is not None:
            yield from self._records
            return
        self._file.seek(0)
        head = struct.Struct("<H")
        while True:
            raw = self._file.read(head.size)
            if not raw:
                return
            (n,) = head.unpack(raw)
            body = struct.Struct(f"<{n}qq")
            vals = body.unpack(self._file.read(body.size))
            yield Record(tuple(vals[:n]), vals[n])


def _merge_streams(streams, cmp: _Cmp):
    """K-way merge of sorted record iterators with counted comparisons."""
    iters = [iter(s) for s in streams]
    heap = []
    for idx, it in enumerate(iters):
        first = next(it, None)
        if first is not None:
            heap.append((_Item(0, first, cmp), idx))
    heapq.heapify(heap)
    while heap:
        item, idx = heapq.heappop(heap)
        yield item.rec
        nxt = next(iters[idx], None)
        if nxt is not None:
            heapq.heappush(heap, (_Item(0, nxt, cmp), idx))


def _reduce_runs(runs: list[_Run], keep_slots: int, met: SortMetrics, cmp: _Cmp, spec: SortSpec) -> None:
    """Merge the smallest runs together until at most keep_slots remain.

    Intermediate merges read their inputs and write the merged run; only the
    final merge (done by the caller) streams without writing.
    """
    fanin = _fanin(spec.cfg)
    while len(runs) > keep_slots:
        runs.sort(key=lambda r: (r.blocks, r.count))
        chosen = runs[: min(fanin, len(runs))]
        del runs[: len(chosen)]
        for r in chosen:
            met.run_blocks_read += r.blocks
        merged = _Run(
            list(_merge_streams([r.stream() for r in chosen], cmp)),
            spec.cfg.block_bytes,
            spec.file_backed,
        )
        met.run_blocks_written += merged.blocks
        runs.append(merged)


def sort_srs(records, spec: SortSpec):
    """Standard replacement selection; returns (output stream, metrics).

    Metrics are complete once the stream is exhausted.
    """
    met = SortMetrics()
    return _srs_stream(records, spec, met), met


def _srs_stream(records, spec: SortSpec, met: SortMetrics):
    cfg = spec.cfg
    cmp = _Cmp(met, 0, spec.target_order_len)
    src = _Source(records)
    capacity = cfg.memory_bytes

    buf: list[Record] = []
    used = 0
    while (r := src.peek()) is not None:
        if buf and used + r.payload_bytes > capacity:
            break
        src.take()
        buf.append(r)
        used += r.payload_bytes

    if src.peek() is None:
        # Whole input fit: one in-memory run, no simulated I/O.
        if buf:
            met.runs_generated = 1
            out = sorted(_Item(0, r, cmp) for r in buf)
            met.tuples_in_before_first_out = src.taken
            for item in out:
                yield item.rec
        return

    heap = [_Item(0, r, cmp) for r in buf]
    heapq.heapify(heap)
    runs: list[_Run] = []
    current: list[Record] = []
    current_run = 0

    def close_run() -> None:
        run = _Run(current, cfg.block_bytes, spec.file_backed)
        met.run_blocks_written += run.blocks
        runs.append(run)

    while heap:
        item = heapq.heappop(heap)
        if item.run != current_run:
            close_run()
            current = []
            current_run = item.run
        current.append(item.rec)
        nxt = src.peek()
        if nxt is not None:
            src.take()
            run = current_run if not cmp.less(nxt.keys, item.rec.keys) else current_run + 1
            heapq.heappush(heap, _Item(run, nxt, cmp))
    close_run()

    met.runs_generated = len(runs)
    _reduce_runs(runs, _fanin(cfg), met, cmp, spec)
    assert len(runs) <= _fanin(cfg)
    for r in runs:
        met.run_blocks_read += r.blocks
    first = True
    for rec in _merge_streams([r.stream() for r in runs], cmp):
        if first:
            met.tuples_in_before_first_out = src.taken
            first = False
        yield rec


def sort_mrs(records, spec: SortSpec):
    """Segment-aware replacement selection; returns (output stream, metrics).

    The input must already be sorted on its first known_prefix_len key
    positions; each maximal group of tuples sharing a prefix value is sorted
    independently and emitted as soon as the next segment starts.
    """
    met = SortMetrics()
    return _mrs_stream(records, spec, met), met


def _mrs_stream(records, spec: SortSpec, met: SortMetrics):
    cfg = spec.cfg
    k = spec.known_prefix_len
    cmp = _Cmp(met, k, spec.target_order_len)
    src = _Source(records)
    capacity = cfg.memory_bytes
    prev_prefix = None
    emitted_any = False

    while (head := src.peek()) is not None:
        prefix = head.keys[:k]
        if prev_prefix is not None and not prev_prefix < prefix:
            raise UnsortedPrefix(
                f"prefix {prefix} arrived after {prev_prefix}; input is not "
                f"sorted on the first {k} key positions"
            )
        prev_prefix = prefix

        buf: list[Record] = []
        used = 0
        heap: list[_Item] = []
        runs: list[_Run] = []
        current: list[Record] = []
        current_run = 0
        spilling = False
        while (r := src.peek()) is not None and r.keys[:k] == prefix:
            src.take()
            if not spilling:
                if not buf or used + r.payload_bytes <= capacity:
                    buf.append(r)
                    used += r.payload_bytes
                    continue
                heap = [_Item(0, b, cmp) for b in buf]
                heapq.heapify(heap)
                buf = []
                spilling = True
            item = heapq.heappop(heap)
            if item.run != current_run:
                run = _Run(current, cfg.block_bytes, spec.file_backed)
                met.run_blocks_written += run.blocks
                runs.append(run)
                current = []
                current_run = item.run
            current.append(item.rec)
            run = current_run if not cmp.less(r.keys, item.rec.keys) else current_run + 1
            heapq.heappush(heap, _Item(run, r, cmp))

        if not spilling:
            # Segment fit in memory: sort and stream, no simulated I/O.
            met.runs_generated += 1 if buf else 0
            out = sorted(_Item(0, b, cmp) for b in buf)
            for item in out:
                if not emitted_any:
                    met.tuples_in_before_first_out = src.taken
                    emitted_any = True
                yield item.rec
            continue

        if current:
            last = _Run(current, cfg.block_bytes, spec.file_backed)
            met.run_blocks_written += last.blocks
            runs.append(last)
        met.runs_generated += len(runs)
        # Residual heap becomes a live in-memory run: one rebuild, no write.
        residual = [x.rec for x in sorted(_Item(0, h.rec, cmp) for h in heap)]
        _reduce_runs(runs, _fanin(cfg) - (1 if residual else 0), met, cmp, spec)
        for r_ in runs:
            met.run_blocks_read += r_.blocks
        streams = [r_.stream() for r_ in runs] + ([iter(residual)] if residual else [])
        assert len(streams) <= _fanin(cfg)
        for rec in _merge_streams(streams, cmp):
            if not emitted_any:
                met.tuples_in_before_first_out = src.taken
                emitted_any = True
            yield rec


def gen_segmented_input(rows: int, segment_rows: int, key_positions: int, payload_bytes: int, seed: int):
    """Deterministic pseudo-random stream: the first key position is constant
    within a segment and increases across segments; the rest are uniform."""
    if rows < 0 or segment_rows < 1 or key_positions < 1 or payload_bytes < 1:
        raise ValidationError("rows >= 0, segment_rows/key_positions/payload_bytes >= 1")
    rng = random.Random(seed)
    for i in range(rows):
        keys = (i // segment_rows,) + tuple(
            rng.randrange(2**31) for _ in range(key_positions - 1)
        )
        yield Record(keys, payload_bytes)
