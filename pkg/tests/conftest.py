import math
import random

import pytest

from digiatom.constants import HBAR, LatticeConfig, TimingParams
from digiatom.sequence import AccelWindow, Idle, PiPulse, Sequence, Shift, Split, arm_positions

REF_GRADIENT_HZ = 324.5


@pytest.fixture
def lat():
    return LatticeConfig()


@pytest.fixture
def timing():
    return TimingParams()


@pytest.fixture
def site_gradient(lat):
    return 2 * math.pi * HBAR * REF_GRADIENT_HZ / lat.d


def brute_force_phase(tokens, potential_fn, d=433e-9, tau_s=18e-6, tau_pi=12e-6, steps=4000, x0=0.0):
    """Independent midpoint-rule phase for a token list like ['Q', 'S+', 'P', 'S-', 'Q'].

    Only the shift rule is shared with the package: the spin-up arm moves by
    +dir*d/2 per shift, the spin-down arm by -dir*d/2. Idle tokens are ('I', seconds).
    """
    xl = xr = x0
    spin_l = 1
    t = 0.0
    total = 0.0
    for tok in tokens:
        if tok == "Q":
            t += tau_pi / 2
            continue
        if tok == "P":
            dur, vl, vr = tau_pi, 0.0, 0.0
        elif tok in ("S+", "S-"):
            direction = 1 if tok == "S+" else -1
            dur = tau_s
            vl = spin_l * direction * d / 2 / dur
            vr = -spin_l * direction * d / 2 / dur
        else:
            dur, vl, vr = tok[1], 0.0, 0.0
        h = dur / steps
        for k in range(steps):
            tm = (k + 0.5) * h
            total += (potential_fn(xl + vl * tm, t + tm) - potential_fn(xr + vr * tm, t + tm)) * h
        xl += vl * dur
        xr += vr * dur
        t += dur
        if tok == "P":
            spin_l = -spin_l
    return total / HBAR


def random_sequence(rng: random.Random, n_blocks: int) -> Sequence:
    """Random valid-by-construction chain: balanced shifts, mixed idle/accel/pi blocks."""
    body = []
    while len(body) < n_blocks - 2:
        r = rng.random()
        if r < 0.4:
            body.append(Shift(rng.choice((1, -1))))
        elif r < 0.6:
            body.append(PiPulse())
        elif r < 0.8:
            body.append(Idle(rng.uniform(0.1, 500.0) * 1e-6))
        else:
            body.append(AccelWindow(rng.uniform(-4e4, 4e4), rng.uniform(0.5, 50.0) * 1e-6))
    seq = Sequence([Split(0.0), *body])
    xl, xr, spin = arm_positions(seq)[-1]
    # close the arms with shifts pointing back toward each other
    gap = xl - xr
    closing = [Shift(-1 if gap * spin > 0 else 1)] * (abs(gap) // 2)
    return Sequence([Split(0.0), *body, *closing, Split(rng.uniform(-3.2, 3.2))])


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    """Store and print one pass/fail line; the terminal summary repeats them in order."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
