"""Flux trapping in a ring, the particle-on-a-ring spectrum, and the topology test
that decides whether single-valuedness can force quantization at all.

A condensate of charge q around a hole must have 2*pi*q*nu in 2*pi*Z, so the
trapped flux is locked to nu = n/q.  For q = 2 that is half an electron flux
quantum.  Whether the argument applies is topological: the flux has to sit in
a forbidden region that the allowed region encloses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .gauge import check_charge


def allowed_flux(n: int, q: int = 2) -> Fraction:
    """The n-th allowed trapped flux n/q, exact."""
    return Fraction(int(n), check_charge(q))


def _nearest_index(x) -> int:
    # round() on floats and Fractions already breaks exact ties toward the even integer
    return int(round(x))


def quantize_flux(nu_external, q: int = 2) -> tuple[int, Fraction]:
    """Allowed flux nearest to the applied one; exact ties go to even n."""
    q = check_charge(q)
    if isinstance(nu_external, (int, Fraction)):
        n = _nearest_index(Fraction(nu_external) * q)
    else:
        n = _nearest_index(float(nu_external) * q)
    return n, Fraction(n, q)


class StairStep(NamedTuple):
    nu_external: float
    n: int
    nu_trapped: Fraction


def staircase(sweep, q: int = 2) -> list[StairStep]:
    sweep = list(sweep)
    if not sweep:
        raise InvalidInputError("staircase needs a nonempty sweep")
    return [StairStep(nu, *quantize_flux(nu, q)) for nu in sweep]


def locate_jumps(sweep, q: int = 2, tol: float = 1e-13) -> list[float]:
    """Applied flux values where the trapped flux changes, refined by bisection."""
    steps = staircase(sorted(sweep), q)
    jumps = []
    for a, b in zip(steps[:-1], steps[1:]):
        if a.n == b.n:
            continue
        lo, hi = float(a.nu_external), float(b.nu_external)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if quantize_flux(mid, q)[0] == a.n:
                lo = mid
            else:
                hi = mid
        jumps.append(0.5 * (lo + hi))
    return jumps


@dataclass(frozen=True)
class RingSpectrum:
    """Levels (n, E_n) of a charge-q particle on a ring threaded by flux nu.

    Energies are in units of hbar^2/(m R^2): E_n = (n - q*nu)^2 / 2.  Degenerate
    levels are listed with even n first, matching the trapping tie rule.
    """

    levels: tuple[tuple[int, float], ...]
    q: int
    nu: float

    @property
    def ground(self) -> tuple[int, float]:
        return self.levels[0]

    def energies(self) -> list:
        return [e for _, e in self.levels]


def ring_spectrum(n_range, q: int, nu) -> RingSpectrum:
    q = check_charge(q)
    ns = list(n_range)
    if not ns:
        raise InvalidInputError("n_range is empty")
    shift = Fraction(nu) * q if isinstance(nu, (int, Fraction)) else float(nu) * q
    levels = [(int(n), (n - shift) ** 2 / 2) for n in ns]
    levels.sort(key=lambda lv: (lv[1], lv[0] % 2, lv[0]))
    return RingSpectrum(tuple(levels), q, nu)


# --- topology ---------------------------------------------------------------------

class Verdict(enum.Enum):
    QUANTIZATION_APPLIES = "QuantizationApplies"
    NO_QUANTIZATION = "NoQuantization"


@dataclass(frozen=True)
class DomainMask:
    """Cells where the wavefunction may live (True) plus the cell holding the flux."""

    allowed: np.ndarray
    flux_cell: tuple[int, int]

    def __post_init__(self):
        a = np.array(self.allowed, dtype=bool)
        if a.ndim != 2:
            raise InvalidInputError("mask must be two-dimensional")
        if not a.any():
            raise InvalidInputError("mask has no allowed cell")
        i, j = self.flux_cell
        if not (0 <= i < a.shape[0] and 0 <= j < a.shape[1]):
            raise InvalidInputError(f"flux cell {self.flux_cell} is outside the {a.shape} mask")
        a.setflags(write=False)
        object.__setattr__(self, "allowed", a)
        object.__setattr__(self, "flux_cell", (int(i), int(j)))


@dataclass(frozen=True)
class TopologyVerdict:
    verdict: Verdict
    witness: np.ndarray
    reason: str

    @property
    def quantized(self) -> bool:
        return self.verdict is Verdict.QUANTIZATION_APPLIES

    def record(self, flux_cell) -> str:
        return (f"{self.verdict.value} flux_cell={flux_cell[0]},{flux_cell[1]} "
                f"witness_cells={int(self.witness.sum())} reason={self.reason}")


_FOUR = ndimage.generate_binary_structure(2, 1)


def topology_check(mask: DomainMask) -> TopologyVerdict:
    """Decide whether a loop around the flux is trapped in the allowed region.

    Forbidden cells are grouped by 4-connectivity (8-connectivity would let a
    region leak diagonally through a one-cell wall).  If the forbidden region
    holding the flux is closed off by allowed cells, loops around it cannot be
    shrunk and quantization applies.  If it reaches the grid edge, or the flux
    cell is itself allowed, the loop can be contracted and nothing is quantized.
    """
    allowed, (i, j) = mask.allowed, mask.flux_cell
    if allowed[i, j]:
        witness = np.zeros_like(allowed)
        witness[i, j] = True
        return TopologyVerdict(Verdict.NO_QUANTIZATION, witness, "flux region accessible to the particle")
    labels, _ = ndimage.label(~allowed, structure=_FOUR)
    component = labels == labels[i, j]
    edge = np.zeros_like(allowed)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    if np.any(component & edge):
        return TopologyVerdict(Verdict.NO_QUANTIZATION, component, "forbidden region open to the boundary")
    return TopologyVerdict(Verdict.QUANTIZATION_APPLIES, component, "flux enclosed by the allowed region")
