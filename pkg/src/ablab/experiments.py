"""Two-slit Aharonov-Bohm experiment on the lattice and fringe-shift analysis.

Layout (lattice units, particle travelling in -x)::

    x:  0 | sponge | ... screen ... | barrier (slits, flux cell) | ... packet ... | nx-1

The solenoid is a single plaquette inside the barrier, between the two slits, so
both paths run through field-free lattice.  The screen records the
time-integrated probability current crossing one column.

Sign convention: delta_phi is the fringe phase phi in I ~ cos(k*y - phi) of the
pattern minus that of the baseline, i.e. positive when fringes move toward +y.
For positive nu the loop source -> upper slit -> screen -> lower slit is
counter-clockwise around the flux, the upper path gains +2*pi*q*nu relative to
the lower one, and the pattern moves toward the upper slit.  With the default
downward cut this is the slit whose path does not cross the cut.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .errors import InvalidInputError, NoFringesError
from .gauge import TWO_PI, PhaseValue, check_charge, reduce_phase, wrap_phase
from .io import write_csv
from .lattice import (
    CrankNicolson,
    FluxString,
    LatticeGrid,
    WaveState,
    apply_flux_string,
    build_grid,
    gaussian_packet,
    link_currents,
    slit_rows,
    sponge_profile,
    two_slit_mask,
)

SLIT_NAMES = ("lower", "upper")
CUT_DIRECTIONS = ("down", "up", "left")
MIN_VISIBILITY = 0.05
CENTRAL_FRACTION = 0.6
MIN_SCREEN_TOTAL = 1e-9  # below this nothing meaningful reached the screen


def two_path_superposition(psi1: complex, psi2: complex, nu, q=1) -> float:
    """|psi1 exp(2 pi i q nu) + psi2|^2; the common phase factor drops out of the modulus."""
    theta = TWO_PI * float((check_charge(q) * nu) % 1)
    return abs(psi1 * complex(math.cos(theta), math.sin(theta)) + psi2) ** 2


def predicted_shift(nu, q=1) -> PhaseValue:
    """Expected fringe shift 2*pi*q*nu, reduced to [0, 2*pi)."""
    return PhaseValue(reduce_phase(TWO_PI * float((check_charge(q) * nu) % 1)))


@dataclass(frozen=True)
class TwoSlitConfig:
    """Geometry and physics of one run. Positions and widths are in lattice sites."""

    nx: int = 384
    ny: int = 192
    dx: float = 1.0
    mass: float = 1.0
    barrier_x: int = 220
    barrier_thickness: int = 4
    slit_separation: float = 24.0
    slit_width: int = 6
    open_slits: tuple[str, ...] = SLIT_NAMES
    flux_cell: tuple[int, int] | None = None
    cut: str = "down"
    screen_x: int = 120
    packet_x: float = 284.0
    packet_y: float | None = None
    packet_width: float = 10.0
    momentum: float = math.pi / 4
    q: int = 1
    nu: float = 0.0
    steps: int = 1600
    dt: float | None = None
    sponge_width: int = 12
    sponge_peak: float = 0.5

    @property
    def axis_y(self) -> float:
        return (self.ny - 1) / 2

    @property
    def slit_centers(self) -> tuple[float, float]:
        return (self.axis_y - self.slit_separation / 2, self.axis_y + self.slit_separation / 2)

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else 0.25 * self.mass * self.dx**2

    @property
    def flux_plaquette(self) -> tuple[int, int]:
        if self.flux_cell is not None:
            return tuple(self.flux_cell)
        return (self.barrier_x + (self.barrier_thickness - 1) // 2, (self.ny - 2) // 2)

    def with_nu(self, nu) -> TwoSlitConfig:
        return dataclasses.replace(self, nu=nu)

    def geometry_hash(self) -> str:
        """Digest of everything except the flux, so patterns of one sweep share it."""
        d = dataclasses.asdict(self)
        d.pop("nu")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> None:
        def bad(msg):
            raise InvalidInputError(msg)

        if self.nx < 16 or self.ny < 16:
            bad("grid must be at least 16x16")
        if not (self.dx > 0 and self.mass > 0):
            bad("dx and mass must be positive")
        check_charge(self.q)
        if not math.isfinite(self.nu):
            bad("nu must be finite")
        if self.steps < 1 or not self.time_step > 0:
            bad("steps and dt must be positive")
        if self.barrier_thickness < 2:
            bad("barrier must be at least 2 columns thick to hold the flux cell")
        if not 1 <= self.barrier_x or self.barrier_x + self.barrier_thickness > self.nx - 1:
            bad("barrier lies outside the grid")
        if not (self.sponge_width + 1 <= self.screen_x < self.barrier_x - 1):
            bad("screen column must lie between the sponge and the barrier")
        if self.slit_width < 1 or self.slit_separation <= self.slit_width:
            bad("slits overlap: separation must exceed width")
        if not set(self.open_slits) <= set(SLIT_NAMES):
            bad(f"open_slits must be drawn from {SLIT_NAMES}")
        if self.cut not in CUT_DIRECTIONS:
            bad(f"cut must be one of {CUT_DIRECTIONS} (a rightward cut would cross the source region)")
        lower, upper = (slit_rows(c, self.slit_width, self.ny) for c in self.slit_centers)
        fi, fj = self.flux_plaquette
        if not (self.barrier_x <= fi and fi + 1 < self.barrier_x + self.barrier_thickness):
            bad("flux cell must sit inside the barrier columns")
        if not (lower[-1] < fj and fj + 1 < upper[0]):
            bad("flux cell must lie strictly between the two slits")
        if self.packet_x - 5 * self.packet_width <= self.barrier_x + self.barrier_thickness:
            bad("packet overlaps the barrier")
        # with both slits shut the screen side must be cut off from the source
        shut = two_slit_mask(self.nx, self.ny, self.barrier_x, self.barrier_thickness, self.slit_centers,
                             self.slit_width, open_slits=())
        labels, _ = ndimage.label(shut)
        if labels[self.screen_x, int(self.axis_y)] == labels[int(self.packet_x), int(self.axis_y)]:
            bad("barrier does not separate the screen from the source")

    def build(self) -> tuple[LatticeGrid, FluxString]:
        self.validate()
        open_idx = [k for k, name in enumerate(SLIT_NAMES) if name in self.open_slits]
        mask = two_slit_mask(self.nx, self.ny, self.barrier_x, self.barrier_thickness, self.slit_centers,
                             self.slit_width, open_slits=open_idx)
        t = 1.0 / (2 * self.mass * self.dx**2)
        absorber = sponge_profile(self.nx, self.ny, self.sponge_width, self.sponge_peak * t, "left")
        grid = build_grid(self.nx, self.ny, self.dx, self.mass, mask_spec=mask, absorber=absorber)
        string = FluxString.straight(self.flux_plaquette, self.cut, grid.shape)
        return apply_flux_string(grid, string, self.nu, self.q), string


@dataclass(frozen=True)
class ScreenPattern:
    y: np.ndarray
    intensity: np.ndarray
    q: int = 1
    nu: float = 0.0
    config_hash: str = ""
    undelivered: float = 0.0

    def __post_init__(self):
        y, inten = np.asarray(self.y, float), np.asarray(self.intensity, float)
        if y.shape != inten.shape or y.ndim != 1:
            raise InvalidInputError("y and intensity must be 1-D arrays of equal length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "intensity", inten)

    @property
    def total(self) -> float:
        return float(self.intensity.sum())

    def mirrored(self) -> ScreenPattern:
        """Reflect about the screen centre (y -> y_max + y_min - y)."""
        return dataclasses.replace(self, intensity=self.intensity[::-1].copy())

    def to_csv(self, path) -> None:
        write_csv(path, ["y", "intensity"], zip(self.y, self.intensity))


@dataclass(frozen=True)
class FringeReport:
    delta_phi: PhaseValue
    predicted: PhaseValue
    visibility: float
    wavenumber: float = field(default=float("nan"))
    nu: float = 0.0
    q: int = 1

    @property
    def error(self) -> float:
        """Signed measured-minus-predicted shift, wrapped to [-pi, pi)."""
        return float(wrap_phase(self.delta_phi - self.predicted))


def source_packet(config: TwoSlitConfig, grid: LatticeGrid) -> WaveState:
    """Initial packet, confined to the source side of the barrier.

    The Gaussian tail that would sit in the slits or beyond is cut off.  Any
    amplitude there would be multiplied by the cut phase in some gauges and
    not in others, so different cuts would no longer be equivalent.
    """
    y0 = config.axis_y if config.packet_y is None else config.packet_y
    state = gaussian_packet(grid, (config.packet_x * config.dx, y0 * config.dx), config.packet_width * config.dx,
                            (-config.momentum, 0.0))
    psi = state.amplitude.copy()
    psi[: config.barrier_x + config.barrier_thickness, :] = 0.0
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * config.dx**2)
    return WaveState(psi, state.time)


def run_two_slit(config: TwoSlitConfig, record_every: int = 0) -> ScreenPattern | tuple[ScreenPattern, list]:
    """Propagate a packet through the apparatus and integrate the current at the screen.

    With ``record_every > 0`` also return a WaveState snapshot every that many steps.
    """
    grid, _ = config.build()
    dt = config.time_step
    state = source_packet(config, grid)
    prop = CrankNicolson(grid, dt)
    sx = config.screen_x

    def screen_flux(psi):
        # probability per unit time crossing from column sx to sx-1 (the -x direction)
        jx, _ = link_currents(grid, psi)
        return -jx[sx - 1, :]

    acc = np.zeros(config.ny)
    prev = screen_flux(state.amplitude)
    snapshots = []
    for n in range(1, config.steps + 1):
        state = prop.step(state)
        cur = screen_flux(state.amplitude)
        acc += 0.5 * dt * (prev + cur)
        prev = cur
        if record_every and n % record_every == 0:
            snapshots.append(WaveState(state.amplitude.copy(), state.time))

    crossed = float(acc.sum())
    behind = float(np.sum(state.density()[sx:config.barrier_x, :]) * config.dx**2)
    if crossed < 0.5 * (crossed + behind):
        warnings.warn(
            f"only {crossed:.3f} of the transmitted probability {crossed + behind:.3f} reached the screen; "
            "pattern is under-integrated (increase steps)",
            stacklevel=2,
        )
    intensity = np.maximum(acc, 0.0)
    pattern = ScreenPattern(
        y=(np.arange(config.ny) - config.axis_y) * config.dx,
        intensity=intensity,
        q=config.q,
        nu=config.nu,
        config_hash=config.geometry_hash(),
        undelivered=behind,
    )
    return (pattern, snapshots) if record_every else pattern


def _central(pattern: ScreenPattern, fraction: float):
    n = len(pattern.y)
    keep = max(8, int(round(fraction * n)))
    lo = (n - keep) // 2
    return pattern.y[lo:lo + keep], pattern.intensity[lo:lo + keep]


def _fringe_fit(y, intensity, k, residual=False):
    """Hann-weighted least squares of I ~ poly2(y) + a cos(ky) + b sin(ky).

    Returns (a, b), or the weighted residual norm when ``residual`` is set.
    """
    u = (y - y.mean()) / (np.ptp(y) / 2 or 1.0)
    sw = np.sqrt(np.hanning(len(y) + 2)[1:-1])
    basis = np.column_stack([np.ones_like(u), u, u * u, np.cos(k * y), np.sin(k * y)]) * sw[:, None]
    target = intensity * sw
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    if residual:
        return float(np.linalg.norm(basis @ coef - target))
    return coef[3], coef[4]


def fringe_wavenumber(y, intensity) -> float:
    """Dominant nonzero spatial frequency, refined beyond the FFT grid."""
    n = len(y)
    dy = float(y[1] - y[0])
    u = (y - y.mean()) / (np.ptp(y) / 2)
    detrended = intensity - np.polyval(np.polyfit(u, intensity, 2), u)
    pad = 32 * n
    spec = np.abs(np.fft.rfft(detrended * np.hanning(n), pad))
    k = TWO_PI * np.fft.rfftfreq(pad, dy)
    # at least 1.5 cycles across the window to count as a fringe rather than the envelope
    kmin = TWO_PI * 1.5 / (n * dy)
    spec[k < kmin] = 0.0
    k0 = k[int(np.argmax(spec))]
    if k0 == 0.0:
        raise NoFringesError("no fringe frequency found")
    step = TWO_PI / (n * dy)
    res = optimize.minimize_scalar(
        lambda kk: _fringe_fit(y, intensity, kk, residual=True),
        bounds=(max(k0 - step, kmin), k0 + step),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


def visibility(intensity) -> float:
    hi, lo = float(np.max(intensity)), float(np.min(intensity))
    return (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0


def extract_fringe_shift(pattern: ScreenPattern, baseline: ScreenPattern,
                         fraction: float = CENTRAL_FRACTION) -> FringeReport:
    """Shift of the fundamental fringe component of ``pattern`` relative to ``baseline``."""
    if pattern.config_hash != baseline.config_hash or pattern.q != baseline.q:
        raise InvalidInputError("patterns come from different apparatus or charges")
    if not np.array_equal(pattern.y, baseline.y):
        raise InvalidInputError("patterns are sampled on different screens")
    if baseline.total < MIN_SCREEN_TOTAL:
        raise NoFringesError(f"baseline screen received only {baseline.total:.2e} probability")
    yb, ib = _central(baseline, fraction)
    yp, ip = _central(pattern, fraction)
    vis_b = visibility(ib)
    if vis_b < MIN_VISIBILITY:
        raise NoFringesError(f"baseline visibility {vis_b:.3f} is below {MIN_VISIBILITY}")
    k = fringe_wavenumber(yb, ib)
    ab, bb = _fringe_fit(yb, ib, k)
    ap, bp = _fringe_fit(yp, ip, k)
    delta = math.atan2(bp, ap) - math.atan2(bb, ab)
    return FringeReport(
        delta_phi=PhaseValue(reduce_phase(delta)),
        predicted=predicted_shift(pattern.nu - baseline.nu, pattern.q),
        visibility=min(1.0, max(0.0, visibility(ip))),
        wavenumber=k,
        nu=pattern.nu,
        q=pattern.q,
    )


def flux_sweep(config: TwoSlitConfig, nu_values, csv_path=None, baseline_nu=0.0,
               runner=run_two_slit) -> list[FringeReport]:
    """One report per flux value, each measured against the baseline run."""
    nu_values = list(nu_values)
    if len(nu_values) < 2:
        raise InvalidInputError("a sweep needs at least two flux values")
    cache = {}

    def pattern(nu):
        if nu not in cache:
            cache[nu] = runner(config.with_nu(nu))
        return cache[nu]

    base = pattern(baseline_nu)
    reports = [extract_fringe_shift(pattern(nu), base) for nu in nu_values]
    if csv_path is not None:
        write_reports_csv(csv_path, reports)
    return reports


def write_reports_csv(path, reports) -> None:
    write_csv(path, ["nu", "q", "delta_phi_measured", "delta_phi_predicted", "visibility"],
              [(float(r.nu), r.q, float(r.delta_phi), float(r.predicted), float(r.visibility)) for r in reports])
