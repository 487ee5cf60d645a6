"""Closed-form replica bounds for mobile Byzantine agents in the ITB models.

All quantities are exact integers.  The vanishing ε that appears in the
closed forms (``⌈(y ± ε)/Δ⌉``) is eliminated analytically by
:func:`ceil_plus` and :func:`ceil_minus`.

Per-agent quantities (``f = 1``) are computed first and the composed values
are scaled by ``f``, since every agent can independently realise the same
worst case on its own group of servers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass


def ramp(x: int) -> int:
    """``x`` if it is non-negative, else 0."""
    return x if x >= 0 else 0


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def ceil_plus(y: int, period: int) -> int:
    """``lim ε→0⁺ ⌈(y + ε)/period⌉`` = ⌊y/period⌋ + 1."""
    return y // period + 1


def ceil_minus(y: int, period: int) -> int:
    """``lim ε→0⁺ ⌈(y − ε)/period⌉`` = ⌊(y − 1)/period⌋ + 1."""
    return (y - 1) // period + 1


MODELS = ("CAM", "CUM")


@dataclass(frozen=True)
class BoundsInput:
    delta: int        # message delay bound δ
    Delta: int        # minimum agent dwell Δ
    gamma: int        # curing time γ
    T_r: int          # read duration
    f: int = 1
    model: str = "CAM"

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if min(self.delta, self.Delta, self.T_r) < 1 or self.gamma < 0:
            raise ValueError("durations must be positive (γ may be 0)")
        if self.T_r < 2 * self.delta:
            raise ValueError("a request/reply read needs T_r ≥ 2δ")
        if self.f < 0:
            raise ValueError("f must be non-negative")

    def with_(self, **kw) -> "BoundsInput":
        return BoundsInput(**{**asdict(self), **kw})


def max_b(T_r: int, Delta: int, f: int) -> int:
    """Most servers that can be Byzantine at some point of a window of length ``T_r``."""
    return (ceil_div(T_r, Delta) + 1) * f


def max_cu(p: BoundsInput) -> int:
    """Per-agent count of servers cured at the start of the window."""
    if p.model == "CAM":
        return ramp(ceil_plus(p.gamma - p.Delta, p.Delta))
    return ramp(ceil_minus(p.T_r - ceil_div(p.T_r, p.Delta) * p.Delta + p.gamma, p.Delta))


def max_sil(p: BoundsInput) -> int:
    """Per-agent count of servers that stay cured (silent) long enough to miss the read."""
    if p.model == "CAM":
        return ramp(ceil_plus(p.gamma - p.Delta - p.T_r + p.delta, p.Delta))
    return ramp(ceil_minus(p.gamma + p.delta - ceil_div(p.T_r, p.Delta) * p.Delta, p.Delta))


def _min_cbc_aware(p: BoundsInput) -> int:
    return (ramp(ceil_div(p.T_r, p.Delta) - ceil_div(p.delta, p.Delta))
            + ramp(ceil_div(p.T_r - p.gamma - p.delta, p.Delta)))


def min_cbc(p: BoundsInput) -> int:
    """Per-agent count of faulty-in-window servers that still answer correctly once."""
    if p.model == "CAM":
        return _min_cbc_aware(p)
    cu = max_cu(p)
    if cu == 0:
        return _min_cbc_aware(p)
    return (ceil_minus(p.T_r - p.delta, p.Delta)
            + ramp(ceil_div(p.T_r, p.Delta) - ceil_div(p.gamma + p.delta, p.Delta))
            + (cu - max_sil(p)))


def n_lb(p: BoundsInput) -> int:
    """Largest ``n`` for which no register emulation exists; protocols need ``n_lb + 1``."""
    b1 = max_b(p.T_r, p.Delta, 1)
    if p.model == "CAM":
        per_agent = 2 * b1 + max_sil(p) - min_cbc(p)
    else:
        per_agent = 2 * (b1 + max_cu(p)) - min_cbc(p)
    return per_agent * p.f


def reply_counts(p: BoundsInput, n: int) -> tuple[int, int]:
    """(most incorrect replies, fewest correct replies) a reader may collect."""
    f = p.f
    b = max_b(p.T_r, p.Delta, f)
    cbc = min_cbc(p) * f
    if p.model == "CAM":
        return b, n - (b + max_sil(p) * f) + cbc
    cu = max_cu(p) * f
    return b + cu, n - (b + cu) + cbc


@dataclass(frozen=True)
class BoundsOutput:
    max_b: int
    max_cu: int
    max_sil: int
    min_cbc: int
    max_b_f: int
    max_cu_f: int
    max_sil_f: int
    min_cbc_f: int
    n_lb: int

    @property
    def n_min(self) -> int:
        return self.n_lb + 1

    def to_json(self) -> dict:
        return {**asdict(self), "n_min": self.n_min}


def evaluate(p: BoundsInput) -> BoundsOutput:
    b1, cu1, sil1, cbc1 = max_b(p.T_r, p.Delta, 1), max_cu(p), max_sil(p), min_cbc(p)
    return BoundsOutput(b1, cu1, sil1, cbc1, b1 * p.f, cu1 * p.f, sil1 * p.f, cbc1 * p.f, n_lb(p))


def table_cells(f: int, delta: int = 10) -> list[tuple[str, str, BoundsInput]]:
    """The four (model, regime) cells of the replica table at T_r = 2δ."""
    cells = []
    for model, gamma in (("CAM", 2 * delta), ("CUM", 4 * delta)):
        for regime, Delta in (("Δ=δ (k=2)", delta), ("Δ=2δ (k=1)", 2 * delta)):
            cells.append((model, regime, BoundsInput(delta, Delta, gamma, 2 * delta, f, model)))
    return cells


def default_grid(model: str) -> list[BoundsInput]:
    """δ ∈ {2,3}, Δ ∈ 2..8, T_r ∈ 4..12 (T_r ≥ 2δ), γ ∈ {2δ, 4δ}; f = 1."""
    out = []
    for delta in (2, 3):
        for Delta in range(2, 9):
            for T_r in range(max(4, 2 * delta), 13):
                for gamma in (2 * delta, 4 * delta):
                    out.append(BoundsInput(delta, Delta, gamma, T_r, 1, model))
    return out
