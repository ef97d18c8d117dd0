"""Trace-driven variable-bit-rate video sources.

A trace is an ordered frame schedule (decoding number, frame type, size).
The streamer replays it open-loop at a fixed frame period, starting from a
random index and cycling the whole trace with a fresh random start each
cycle so concurrent streams from one trace never lock phases.  Emission
indices restart the decode numbering so the receiver-side display timeline
stays monotone across cycles.
"""

import math
from dataclasses import dataclass, field

import numpy as np

FRAME_I, FRAME_P, FRAME_B = 0, 1, 2
_TYPE_CHARS = "IPB"
_TYPE_CODES = {"I": FRAME_I, "P": FRAME_P, "B": FRAME_B}


class TraceError(Exception):
    pass


@dataclass(frozen=True)
class VideoTrace:
    name: str
    decoding_numbers: np.ndarray
    frame_types: np.ndarray   # uint8 codes, FRAME_I/P/B
    frame_sizes: np.ndarray   # bytes
    frame_period: float
    gop_size: int
    n_b_frames: int

    def __len__(self):
        return len(self.frame_sizes)

    @property
    def mean_bit_rate(self):
        return float(self.frame_sizes.sum()) * 8.0 / (len(self) * self.frame_period)


def gop_pattern(gop_size, n_b_frames):
    """Frame-type cycle for one group of pictures.

    An I frame leads; each following reference (P) frame is preceded by
    n_b_frames B frames, e.g. gop 12 with 2 Bs gives I BB P BB P BB P BB.
    """
    if gop_size < 1:
        raise ValueError("gop_size must be >= 1")
    if n_b_frames < 0:
        raise ValueError("n_b_frames must be >= 0")
    step = n_b_frames + 1
    types = [FRAME_I]
    for pos in range(1, gop_size):
        types.append(FRAME_P if pos % step == 0 else FRAME_B)
    return np.array(types, dtype=np.uint8)


# Relative size weights by frame type, loosely typical of H.264 encodings.
_TYPE_WEIGHT = {FRAME_I: 5.0, FRAME_P: 2.2, FRAME_B: 1.0}


def gen_synthetic_trace(gop_size, n_b_frames, mean_bit_rate, n_frames,
                        frame_period=1.0 / 30.0, seed=0, name="synthetic"):
    """Deterministic synthetic trace whose mean bit rate hits the target.

    Per-frame sizes are type-weighted with lognormal jitter, then rescaled
    so the whole-trace rate equals mean_bit_rate before integer rounding.
    """
    if n_frames < gop_size:
        raise ValueError("n_frames must cover at least one GoP")
    rng = np.random.default_rng(seed)
    pattern = gop_pattern(gop_size, n_b_frames)
    reps = math.ceil(n_frames / gop_size)
    types = np.tile(pattern, reps)[:n_frames]
    weights = np.array([_TYPE_WEIGHT[FRAME_I], _TYPE_WEIGHT[FRAME_P],
                        _TYPE_WEIGHT[FRAME_B]])[types]
    jitter = rng.lognormal(0.0, 0.25, n_frames)
    raw = weights * jitter
    target_bytes = mean_bit_rate * n_frames * frame_period / 8.0
    sizes = np.maximum(1, np.rint(raw * (target_bytes / raw.sum())).astype(np.int64))
    return VideoTrace(
        name=name,
        decoding_numbers=np.arange(n_frames, dtype=np.int64),
        frame_types=types,
        frame_sizes=sizes,
        frame_period=frame_period,
        gop_size=gop_size,
        n_b_frames=n_b_frames,
    )


def _bundled(which):
    if which == "cif":
        return gen_synthetic_trace(16, 3, 1.63e6, 3600, seed=1631, name="cif")
    if which == "hd":
        return gen_synthetic_trace(12, 2, 28.6e6, 3600, seed=2862, name="hd")
    raise KeyError(which)


_BUNDLED_CACHE = {}


def bundled_trace(which):
    """Built-in synthetic traces: "cif" (~1.63 Mbit/s) and "hd" (~28.6 Mbit/s)."""
    if which not in _BUNDLED_CACHE:
        _BUNDLED_CACHE[which] = _bundled(which)
    return _BUNDLED_CACHE[which]


def load_trace(path, name=None):
    """Parse a trace file: one `decoding_number frame_type size_bytes` per line.

    Lines starting with `#` are comments; `# key value` directives may set
    frame_period, gop_size, and n_b_frames.
    """
    meta = {"frame_period": 1.0 / 30.0, "gop_size": 0, "n_b_frames": 0}
    numbers, types, sizes = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                parts = text[1:].split()
                if len(parts) == 2 and parts[0] in meta:
                    meta[parts[0]] = type(meta[parts[0]])(float(parts[1]))
                continue
            parts = text.split()
            if len(parts) != 3:
                raise TraceError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            try:
                num = int(parts[0])
                code = _TYPE_CODES[parts[1].upper()]
                size = int(parts[2])
            except (ValueError, KeyError) as exc:
                raise TraceError(f"{path}:{lineno}: malformed frame line: {exc}") from None
            if size <= 0:
                raise TraceError(f"{path}:{lineno}: frame size must be positive")
            if numbers and num <= numbers[-1]:
                raise TraceError(
                    f"{path}:{lineno}: decoding numbers must be strictly increasing"
                )
            numbers.append(num)
            types.append(code)
            sizes.append(size)
    if not numbers:
        raise TraceError(f"{path}: trace contains no frames")
    types = np.array(types, dtype=np.uint8)
    gop, n_b = meta["gop_size"], meta["n_b_frames"]
    if not gop:
        gop, n_b = _infer_structure(types)
    return VideoTrace(
        name=name or str(path),
        decoding_numbers=np.array(numbers, dtype=np.int64),
        frame_types=types,
        frame_sizes=np.array(sizes, dtype=np.int64),
        frame_period=meta["frame_period"],
        gop_size=gop,
        n_b_frames=n_b,
    )


def _infer_structure(types):
    i_pos = np.flatnonzero(types == FRAME_I)
    gop = int(i_pos[1] - i_pos[0]) if len(i_pos) > 1 else len(types)
    first_ref = np.flatnonzero((types == FRAME_P) | (types == FRAME_I))
    after = first_ref[first_ref > 0]
    n_b = int(after[0] - 1) if len(after) else 0
    return gop, n_b


def write_trace(trace, path):
    with open(path, "w") as fh:
        fh.write(f"# frame_period {trace.frame_period!r}\n")
        fh.write(f"# gop_size {trace.gop_size}\n")
        fh.write(f"# n_b_frames {trace.n_b_frames}\n")
        for num, code, size in zip(trace.decoding_numbers, trace.frame_types,
                                   trace.frame_sizes):
            fh.write(f"{num} {_TYPE_CHARS[code]} {size}\n")


@dataclass
class VideoStreamer:
    """Open-loop trace replay: strictly periodic, random cycle starts.

    ``next_emission()`` returns (size_bytes, emission_index, emission_time)
    and advances the cursor; the emission index is the re-based decode
    number.  ``emitted_types`` accumulates the frame type of every emission
    for receiver-side decodability accounting.
    """

    trace: VideoTrace
    rng: object
    start_time: float = 0.0
    cursor: int = -1
    emission_index: int = 0
    cycles: int = 0
    emitted_types: list = field(default_factory=list)

    def _new_cycle(self):
        self.cursor = int(self.rng.integers(0, len(self.trace)))
        self.cycles += 1

    def next_emission(self):
        if self.cursor < 0 or self.cursor >= len(self.trace):
            self._new_cycle()
        idx = self.emission_index
        size = int(self.trace.frame_sizes[self.cursor])
        self.emitted_types.append(int(self.trace.frame_types[self.cursor]))
        when = self.start_time + idx * self.trace.frame_period
        self.cursor += 1
        self.emission_index += 1
        return size, idx, when

    def emission_time(self, index):
        return self.start_time + index * self.trace.frame_period
