"""Block representation of interferometer programs, the text DSL, validation and geometry generators.

A program is a flat chain of blocks::

    timing tau_S=18 tau_pi=12      # optional header, microseconds
    Q(0) S+ P S- S+ P S- Q(1.57)

``Q(phase)`` is a pi/2 pulse, ``S+``/``S-`` a spin-dependent shift, ``P`` a pi
pulse, ``I(us)`` an idle block and ``A(m/s^2,us)`` an acceleration window.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Union

from .constants import A_CRIT, TimingParams


@dataclass(frozen=True)
class Split:
    probe_phase: float = 0.0


@dataclass(frozen=True)
class Shift:
    direction: int

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError(f"shift direction must be +1 or -1, got {self.direction!r}")


@dataclass(frozen=True)
class PiPulse:
    pass


@dataclass(frozen=True)
class Idle:
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"idle duration must be positive, got {self.duration!r}")


@dataclass(frozen=True)
class AccelWindow:
    accel: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"acceleration window duration must be positive, got {self.duration!r}")


Block = Union[Split, Shift, PiPulse, Idle, AccelWindow]


def block_duration(block: Block, timing: TimingParams) -> float:
    if isinstance(block, Split):
        return timing.tau_pi2
    if isinstance(block, Shift):
        return timing.tau_S
    if isinstance(block, PiPulse):
        return timing.tau_pi
    return block.duration


@dataclass(frozen=True)
class Sequence:
    blocks: tuple
    timing: TimingParams = field(default_factory=TimingParams)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def durations(self) -> list[float]:
        return [block_duration(b, self.timing) for b in self.blocks]

    def start_times(self) -> list[float]:
        t, out = 0.0, []
        for dt in self.durations():
            out.append(t)
            t += dt
        return out

    @property
    def total_duration(self) -> float:
        return sum(self.durations())

    @property
    def n_shifts(self) -> int:
        return sum(isinstance(b, Shift) for b in self.blocks)

    def count(self, kind: type) -> int:
        return sum(isinstance(b, kind) for b in self.blocks)


# ---------------------------------------------------------------------------
# DSL


class DSLSyntaxError(ValueError):
    """Raised on malformed DSL text. Carries 1-based line, column and token index."""

    def __init__(self, message: str, line: int, column: int, token_index: int | None = None):
        self.line = line
        self.column = column
        self.token_index = token_index
        where = f"line {line}, column {column}"
        if token_index is not None:
            where += f", token {token_index}"
        super().__init__(f"{message} ({where})")


_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = {
    "Q": re.compile(rf"Q\(({_NUM})\)$"),
    "I": re.compile(rf"I\(({_NUM})\)$"),
    "A": re.compile(rf"A\(({_NUM}),({_NUM})\)$"),
}
_HEADER_RE = re.compile(rf"(tau_S|tau_pi)=({_NUM})$")


def _us_to_s(text: str) -> float:
    return float(Decimal(text).scaleb(-6))


def _s_to_us(value: float) -> str:
    return _fmt_decimal(Decimal(repr(float(value))).scaleb(6))


def _fmt_decimal(dec: Decimal) -> str:
    dec = dec.normalize()
    if dec == 0:
        return "0"
    text = format(dec, "f")
    return text


def _fmt_float(value: float) -> str:
    value = float(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _parse_token(tok: str, line: int, col: int, index: int) -> Block:
    if tok == "S+":
        return Shift(1)
    if tok == "S-":
        return Shift(-1)
    if tok == "P":
        return PiPulse()
    head = tok[:1]
    rx = _TOKEN_RE.get(head)
    m = rx.match(tok) if rx else None
    if m is None:
        raise DSLSyntaxError(f"unknown token {tok!r}", line, col, index)
    if head == "Q":
        return Split(float(m.group(1)))
    if head == "I":
        dur = _us_to_s(m.group(1))
        if not dur > 0:
            raise DSLSyntaxError(f"non-positive duration in {tok!r}", line, col, index)
        return Idle(dur)
    dur = _us_to_s(m.group(2))
    if not dur > 0:
        raise DSLSyntaxError(f"non-positive duration in {tok!r}", line, col, index)
    return AccelWindow(float(m.group(1)), dur)


def parse_sequence(text: str) -> Sequence:
    """Parse DSL text into a :class:`Sequence`.

    Raises :class:`DSLSyntaxError` with line, column and (1-based) token index
    for unknown tokens, malformed headers and non-positive durations.
    """
    timing_kw: dict[str, float] = {}
    blocks: list[Block] = []
    index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]
        if not tokens:
            continue
        if tokens[0][1] == "timing":
            if blocks or timing_kw:
                raise DSLSyntaxError("timing header must come first and only once", lineno, tokens[0][0])
            for col, tok in tokens[1:]:
                m = _HEADER_RE.match(tok)
                if m is None:
                    raise DSLSyntaxError(f"bad timing field {tok!r}", lineno, col)
                value = _us_to_s(m.group(2))
                if not value > 0:
                    raise DSLSyntaxError(f"non-positive duration in {tok!r}", lineno, col)
                timing_kw[m.group(1)] = value
            continue
        for col, tok in tokens:
            index += 1
            blocks.append(_parse_token(tok, lineno, col, index))
    return Sequence(tuple(blocks), TimingParams(**timing_kw))


def _block_token(block: Block) -> str:
    if isinstance(block, Split):
        return f"Q({_fmt_float(block.probe_phase)})"
    if isinstance(block, Shift):
        return "S+" if block.direction > 0 else "S-"
    if isinstance(block, PiPulse):
        return "P"
    if isinstance(block, Idle):
        return f"I({_s_to_us(block.duration)})"
    return f"A({_fmt_float(block.accel)},{_s_to_us(block.duration)})"


def serialize_sequence(seq: Sequence) -> str:
    body = " ".join(_block_token(b) for b in seq.blocks)
    if seq.timing == TimingParams():
        return body
    header = f"timing tau_S={_s_to_us(seq.timing.tau_S)} tau_pi={_s_to_us(seq.timing.tau_pi)}"
    return f"{header}\n{body}"


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    block_index: int | None  # 0-based; None for whole-sequence problems
    message: str

    def __str__(self):
        if self.block_index is None:
            return self.message
        return f"block {self.block_index}: {self.message}"


def arm_positions(seq: Sequence) -> list[tuple[int, int, int]]:
    """Arm positions in integer half-steps (d/2) after every block.

    Returns ``(xL, xR, spinL)`` per boundary, starting with the state before
    the first block. The left arm starts spin-up (+1).
    """
    xl = xr = 0
    spin_l = 1
    out = [(xl, xr, spin_l)]
    for b in seq.blocks:
        if isinstance(b, Shift):
            xl += spin_l * b.direction
            xr -= spin_l * b.direction
        elif isinstance(b, PiPulse):
            spin_l = -spin_l
        out.append((xl, xr, spin_l))
    return out


def validate_sequence(seq: Sequence) -> list[Violation]:
    """Return every violation found; an empty list means the sequence is valid."""
    out: list[Violation] = []
    blocks = seq.blocks
    if len(blocks) < 2:
        out.append(Violation(None, "sequence needs at least the two Ramsey pi/2 blocks"))
    if not blocks or not isinstance(blocks[0], Split):
        out.append(Violation(0 if blocks else None, "first block must be a pi/2 split Q(0)"))
    elif blocks[0].probe_phase != 0:
        out.append(Violation(0, "first split must have zero phase"))
    if len(blocks) >= 2 and not isinstance(blocks[-1], Split):
        out.append(Violation(len(blocks) - 1, "last block must be a pi/2 split Q(phi)"))
    for i, b in enumerate(blocks[1:-1], start=1):
        if isinstance(b, Split):
            out.append(Violation(i, "pi/2 split inside the interferometer body"))
    for i, b in enumerate(blocks):
        if isinstance(b, Shift) and b.direction not in (1, -1):
            out.append(Violation(i, "shift direction must be +1 or -1"))
        if isinstance(b, (Idle, AccelWindow)) and not b.duration > 0:
            out.append(Violation(i, "duration must be positive"))
        if isinstance(b, AccelWindow) and not abs(b.accel) < A_CRIT:
            out.append(
                Violation(i, f"acceleration {b.accel:g} m/s^2 exceeds Landau-Zener guard {A_CRIT:g} m/s^2")
            )
    xl, xr, _ = arm_positions(seq)[-1]
    if xl != xr:
        k = abs(xl - xr) // 2  # each unmatched shift moves both arms one half-step apart
        out.append(Violation(None, f"arms end separated by {k} half-step unit(s) per arm ({k} d apart)"))
    return out


def is_valid(seq: Sequence) -> bool:
    return not validate_sequence(seq)


class InvalidSequenceError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def require_valid(seq: Sequence) -> Sequence:
    violations = validate_sequence(seq)
    if violations:
        raise InvalidSequenceError(violations)
    return seq


# ---------------------------------------------------------------------------
# Geometry generators


class Geometry(str, Enum):
    SINGLE = "single"
    DOUBLE = "double"
    HOLD = "hold"
    ACCEL = "accel"


@dataclass(frozen=True)
class GeometrySpec:
    kind: Geometry
    n_shifts: int
    t_hold: float = 0.0  # s, total time held open at the apex (pi pulses included)
    accel: float = 0.0  # m/s^2
    t_acc: float = 0.0  # s, summed duration of the acceleration windows
    probe_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Geometry(self.kind))
        n = self.n_shifts
        if not isinstance(n, int) or n < 2 or n % 2:
            raise ValueError(f"n_shifts must be an even integer >= 2, got {n!r}")
        if self.kind is Geometry.DOUBLE and n % 4:
            raise ValueError(f"double diamond needs n_shifts divisible by 4, got {n}")
        if self.t_hold < 0 or self.t_acc < 0:
            raise ValueError("hold and acceleration times must be non-negative")
        if self.kind is Geometry.ACCEL and not self.t_acc > 0:
            raise ValueError("accel diamond needs t_acc > 0")
        # the Landau-Zener guard is left to validation so violations carry a block index


def _diamond_halves(n: int) -> tuple[list[Block], list[Block]]:
    # Shift directions alternate across every pi pulse so both arms keep separating;
    # the apex carries no pi pulse and the first closing shift reverses the last opening one.
    m = n // 2
    opening: list[Block] = []
    for k in range(m):
        if k:
            opening.append(PiPulse())
        opening.append(Shift(1 if k % 2 == 0 else -1))
    last = opening[-1].direction
    closing: list[Block] = []
    for k in range(m):
        if k:
            closing.append(PiPulse())
        closing.append(Shift(-last if k % 2 == 0 else last))
    return opening, closing


def _diamond_body(n: int, apex: list[Block] = ()) -> list[Block]:
    opening, closing = _diamond_halves(n)
    return opening + list(apex) + closing


def _echo_apex(total: float, make) -> list[Block]:
    # [x/4, P, x/2, P, x/4]: double spin echo at maximum separation
    quarter, half = total / 4, total / 2
    out: list[Block] = []
    for i, dur in enumerate((quarter, half, quarter)):
        if i:
            out.append(PiPulse())
        if dur > 0:
            out.append(make(dur))
    return out


def build_geometry(spec: GeometrySpec, timing: TimingParams | None = None) -> Sequence:
    """Generate the block chain for one of the standard interferometer geometries.

    ``HOLD`` treats ``t_hold`` as the full time spent at maximum separation,
    i.e. the two echo pi pulses are counted inside it, so ``t_hold`` must be
    zero or at least ``2 * tau_pi``.
    """
    timing = timing or TimingParams()
    n = spec.n_shifts
    if spec.kind is Geometry.SINGLE:
        body = _diamond_body(n)
    elif spec.kind is Geometry.DOUBLE:
        half = _diamond_body(n // 2)
        body = half + [PiPulse()] + half
    elif spec.kind is Geometry.HOLD:
        if spec.t_hold == 0:
            body = _diamond_body(n)
        else:
            idle_total = spec.t_hold - 2 * timing.tau_pi
            if idle_total < -1e-15:
                raise ValueError(
                    f"t_hold={spec.t_hold:g} s is shorter than the two echo pulses ({2 * timing.tau_pi:g} s)"
                )
            body = _diamond_body(n, _echo_apex(max(idle_total, 0.0), Idle))
    else:
        body = _diamond_body(n, _echo_apex(spec.t_acc, lambda dur: AccelWindow(spec.accel, dur)))
    seq = Sequence((Split(0.0), *body, Split(spec.probe_phase)), timing)
    return require_valid(seq)
