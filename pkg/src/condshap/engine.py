"""Exact Shapley value computation from a complete coalition table.

The attribution of a game v over M players is the unique vector satisfying
efficiency, symmetry, dummy, and linearity:

    phi_j = sum over S not containing j of
            |S|! (M - |S| - 1)! / M!  *  (v(S u {j}) - v(S))

Weights are computed from exact integer factorials (one final division),
which keeps phi bit-reproducible across platforms. Tables must be complete
over all 2^M coalitions; incomplete tables are a hard error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coalitions import MAX_FEATURES, full_mask
from .errors import AxiomViolation, ConfigError, IncompleteTableError

EFFICIENCY_RTOL = 1e-10


def shapley_weight(s: int, m: int) -> float:
    """Permutation weight s!(M-s-1)!/M! for a coalition of size s."""
    if not 1 <= m <= MAX_FEATURES:
        raise ConfigError(f"M must be in 1..{MAX_FEATURES}, got {m}")
    if not 0 <= s <= m - 1:
        raise ConfigError(f"coalition size must be in 0..{m - 1}, got {s}")
    return math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m)


def weight_table(m: int) -> np.ndarray:
    """shapley_weight(s, m) for s = 0..m-1, plus a trailing 0 for size m.

    The trailing entry lets kernels index by popcount without branching;
    masks of size m never occur on the without-j side of the sum.
    """
    w = np.zeros(m + 1, dtype=np.float64)
    for s in range(m):
        w[s] = shapley_weight(s, m)
    return w


@dataclass(frozen=True)
class Explanation:
    """Attribution of one prediction: baseline phi0 and per-feature phis.

    efficiency_residual is v(full) - v(empty) - sum(phis) and must vanish
    numerically for exact computation.
    """

    phi0: float
    phis: np.ndarray
    efficiency_residual: float

    def to_dict(self) -> dict:
        return {
            "phi0": self.phi0,
            "phis": [float(p) for p in self.phis],
            "efficiency_residual": self.efficiency_residual,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class CoalitionTable:
    """The evaluated game for one instance: mask -> v(S).

    `values` is dense, indexed by mask; entry 0 is v(empty) and entry
    2^M - 1 is v(full) = f(x*).
    """

    m: int
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def from_entries(cls, m: int, entries: dict, v_empty: float, v_full: float) -> "CoalitionTable":
        """Build from a mask -> value mapping over the nontrivial coalitions."""
        values = np.full(1 << m, np.nan)
        values[0] = v_empty
        values[full_mask(m)] = v_full
        for mask, v in entries.items():
            mask = int(mask)
            if mask <= 0 or mask >= full_mask(m):
                raise ConfigError(f"entry mask {mask:#x} is trivial or out of range")
            values[mask] = v
        return cls(m=m, values=values)

    def validate(self) -> None:
        bad = np.flatnonzero(~np.isfinite(self.values))
        if bad.size:
            shown = ", ".join(f"{int(b):#x}" for b in bad[:8])
            raise IncompleteTableError(
                f"coalition table incomplete or non-finite at {bad.size} masks: {shown}"
                + ("..." if bad.size > 8 else ""),
                missing=[int(b) for b in bad],
            )

    @property
    def v_empty(self) -> float:
        return float(self.values[0])

    @property
    def v_full(self) -> float:
        return float(self.values[full_mask(self.m)])


def compute_shapley(table: CoalitionTable, m: int | None = None) -> Explanation:
    """Exact Shapley values of a complete coalition table."""
    if m is None:
        m = table.m
    if m != table.m:
        raise ConfigError(f"table is over M={table.m}, got M={m}")
    table.validate()
    phis = kernels.shapley_aggregate(table.values, weight_table(m), m)
    residual = table.v_full - table.v_empty - float(phis.sum())
    tol = EFFICIENCY_RTOL * max(1.0, abs(table.v_full))
    if abs(residual) > tol:
        raise AxiomViolation(
            "efficiency",
            f"residual {residual:g} exceeds {tol:g}",
            json.dumps({"m": m, "values": [float(v) for v in table.values]}),
        )
    return Explanation(phi0=table.v_empty, phis=phis, efficiency_residual=residual)


def compute_shapley_batch(values: np.ndarray, m: int) -> np.ndarray:
    """Shapley values for many instances at once.

    `values` is (n, 2^M) of complete tables; returns (n, M). The efficiency
    identity is asserted for every row.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise IncompleteTableError("batch contains non-finite coalition values")
    phis = kernels.shapley_aggregate_batch(values, weight_table(m), m)
    v_full = values[:, full_mask(m)]
    residual = v_full - values[:, 0] - phis.sum(axis=1)
    tol = EFFICIENCY_RTOL * np.maximum(1.0, np.abs(v_full))
    if np.any(np.abs(residual) > tol):
        i = int(np.argmax(np.abs(residual) - tol))
        raise AxiomViolation(
            "efficiency",
            f"instance {i}: residual {residual[i]:g} exceeds {tol[i]:g}",
            json.dumps({"m": m, "values": [float(v) for v in values[i]]}),
        )
    return phis


def _random_game(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.normal(size=1 << m)


def _swap_players(values: np.ndarray, j: int, k: int, m: int) -> np.ndarray:
    """Game with players j and k relabeled (0-based)."""
    masks = np.arange(1 << m)
    bj = (masks >> j) & 1
    bk = (masks >> k) & 1
    swapped = masks & ~((1 << j) | (1 << k)) | (bk << j) | (bj << k)
    out = np.empty_like(values)
    out[swapped] = values
    return out


@dataclass
class AxiomReport:
    m: int
    trials: int
    max_efficiency_residual: float = 0.0
    max_symmetry_gap: float = 0.0
    max_dummy_phi: float = 0.0
    max_linearity_gap: float = 0.0

    def summary(self) -> str:
        return (
            f"M={self.m} trials={self.trials}: "
            f"efficiency<={self.max_efficiency_residual:.3g} "
            f"symmetry<={self.max_symmetry_gap:.3g} "
            f"dummy<={self.max_dummy_phi:.3g} "
            f"linearity<={self.max_linearity_gap:.3g}"
        )


def verify_axioms(game_generator, m: int, trials: int, rtol: float = 1e-10) -> AxiomReport:
    """Check efficiency, symmetry, dummy and linearity on random games.

    `game_generator(rng, m)` returns a dense value vector of length 2^M;
    pass None for standard normal games. Raises AxiomViolation with the
    failing game serialized as JSON.
    """
    if m > 10:
        raise ConfigError(f"axiom verification is capped at M=10, got {m}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    gen = game_generator or _random_game
    rng = np.random.default_rng(20_000 + m)
    report = AxiomReport(m=m, trials=trials)
    w = weight_table(m)

    def game_json(values):
        return json.dumps({"m": m, "values": [float(v) for v in values]})

    for _ in range(trials):
        v = np.asarray(gen(rng, m), dtype=np.float64)
        scale = max(1.0, float(np.abs(v).max()))
        phi = kernels.shapley_aggregate(v, w, m)

        res = abs(v[-1] - v[0] - phi.sum())
        report.max_efficiency_residual = max(report.max_efficiency_residual, res / scale)
        if res > rtol * scale:
            raise AxiomViolation("efficiency", f"residual {res:g}", game_json(v))

        j, k = rng.choice(m, size=2, replace=False) if m >= 2 else (0, 0)
        if m >= 2:
            v_swapped = _swap_players(v, int(j), int(k), m)
            phi_sw = kernels.shapley_aggregate(v_swapped, w, m)
            expect = phi.copy()
            expect[[j, k]] = expect[[k, j]]
            gap = float(np.abs(phi_sw - expect).max())
            report.max_symmetry_gap = max(report.max_symmetry_gap, gap / scale)
            if gap > rtol * scale:
                raise AxiomViolation("symmetry", f"gap {gap:g}", game_json(v))

        d = int(rng.integers(m))
        v_dummy = v.copy()
        masks = np.arange(1 << m)
        without = masks[(masks >> d) & 1 == 0]
        v_dummy[without | (1 << d)] = v_dummy[without]
        phi_d = kernels.shapley_aggregate(v_dummy, w, m)
        report.max_dummy_phi = max(report.max_dummy_phi, abs(phi_d[d]) / scale)
        if abs(phi_d[d]) > rtol * scale:
            raise AxiomViolation("dummy", f"phi[{d}]={phi_d[d]:g}", game_json(v_dummy))

        v2 = np.asarray(gen(rng, m), dtype=np.float64)
        c1, c2 = rng.normal(size=2)
        phi2 = kernels.shapley_aggregate(v2, w, m)
        combo = kernels.shapley_aggregate(c1 * v + c2 * v2, w, m)
        gap = float(np.abs(combo - (c1 * phi + c2 * phi2)).max())
        lin_scale = max(1.0, abs(c1) * scale + abs(c2) * float(np.abs(v2).max()))
        report.max_linearity_gap = max(report.max_linearity_gap, gap / lin_scale)
        if gap > rtol * lin_scale:
            raise AxiomViolation("linearity", f"gap {gap:g}", game_json(v))

    return report
