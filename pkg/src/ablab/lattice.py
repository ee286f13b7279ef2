"""Minimal-coupling Schrodinger dynamics on a square lattice.

The vector potential enters only through unit-modulus Peierls phases on the
nearest-neighbour links.  A point-like solenoid is a single plaquette whose
oriented link product is exp(2*pi*i*q*nu); all other plaquettes carry no flux,
so the particle moves through a field-free region exactly as in the
Aharonov-Bohm setup.

Array conventions: site (i, j) sits at x = i*dx, y = j*dx; arrays have shape
(nx, ny).  ``ux[i, j]`` multiplies the amplitude hopping (i, j) -> (i+1, j) and
``uy[i, j]`` the amplitude hopping (i, j) -> (i, j+1); the reverse hops use the
complex conjugates, which makes link_phase(j->i) = conj(link_phase(i->j)) hold
by construction.
"""
from __future__ import annotations

import dataclasses
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, NumericError
from .gauge import check_charge

SOLVE_TOL = 1e-10
PACKET_MASK_TOL = 1e-6


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatticeGrid:
    nx: int
    ny: int
    dx: float
    mass: float
    mask: np.ndarray
    potential: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    absorber: np.ndarray

    def __post_init__(self):
        shape = (self.nx, self.ny)
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("mask", _frozen(self.mask, bool))
        set_("potential", _frozen(self.potential, float))
        set_("absorber", _frozen(self.absorber, float))
        ux = np.array(self.ux, dtype=complex)
        uy = np.array(self.uy, dtype=complex)
        for name, arr, want in [
            ("mask", self.mask, shape),
            ("potential", self.potential, shape),
            ("absorber", self.absorber, shape),
            ("ux", ux, (self.nx - 1, self.ny)),
            ("uy", uy, (self.nx, self.ny - 1)),
        ]:
            if arr.shape != want:
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {want}")
        if np.any(ux == 0) or np.any(uy == 0):
            raise InvalidInputError("link phases must be nonzero")
        set_("ux", _frozen(ux / np.abs(ux), complex))
        set_("uy", _frozen(uy / np.abs(uy), complex))

    @property
    def hopping(self) -> float:
        return 1.0 / (2.0 * self.mass * self.dx**2)

    @property
    def n_links(self) -> int:
        return self.ux.size + self.uy.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return i * self.dx, j * self.dx

    def plaquette_products(self) -> np.ndarray:
        """Counter-clockwise link products, shape (nx-1, ny-1)."""
        ux, uy = self.ux, self.uy
        return ux[:, :-1] * uy[1:, :] * np.conj(ux[:, 1:]) * np.conj(uy[:-1, :])

    def replace(self, **changes) -> LatticeGrid:
        return dataclasses.replace(self, **changes)


def _site_array(spec, grid_shape, coords, dtype, default):
    if spec is None:
        return np.full(grid_shape, default, dtype=dtype)
    if callable(spec):
        spec = spec(*coords)
    arr = np.asarray(spec, dtype=dtype)
    if arr.ndim == 0:
        return np.full(grid_shape, arr, dtype=dtype)
    if arr.shape != grid_shape:
        raise InvalidInputError(f"spec has shape {arr.shape}, grid is {grid_shape}")
    return arr


def build_grid(nx, ny, dx=1.0, mass=1.0, mask_spec=None, potential_spec=None, absorber=None) -> LatticeGrid:
    """Grid with all link phases 1.

    ``mask_spec`` / ``potential_spec`` may be None, a scalar, an (nx, ny) array or a
    callable of the site coordinate arrays (x, y).
    """
    if int(nx) != nx or int(ny) != ny or nx < 4 or ny < 4:
        raise InvalidInputError(f"grid must be at least 4x4 integers, got {nx}x{ny}")
    if not dx > 0 or not mass > 0:
        raise InvalidInputError("dx and mass must be positive")
    nx, ny = int(nx), int(ny)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    coords = (i * dx, j * dx)
    mask = _site_array(mask_spec, (nx, ny), coords, bool, True)
    potential = _site_array(potential_spec, (nx, ny), coords, float, 0.0)
    absorber = _site_array(absorber, (nx, ny), coords, float, 0.0)
    if np.any(absorber < 0):
        raise InvalidInputError("absorbing potential must be nonnegative")
    return LatticeGrid(
        nx, ny, float(dx), float(mass), mask, potential,
        np.ones((nx - 1, ny), complex), np.ones((nx, ny - 1), complex), absorber,
    )


# --- mask and potential helpers ------------------------------------------------

def frame_mask(nx, ny) -> np.ndarray:
    """Everything allowed except the outermost ring of sites (hard walls)."""
    m = np.ones((nx, ny), bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = False
    return m


def slit_rows(center, width, ny) -> np.ndarray:
    lo = math.ceil(center - width / 2)
    rows = np.arange(lo, lo + int(width))
    if rows[0] < 1 or rows[-1] > ny - 2:
        raise InvalidInputError(f"slit rows {rows[0]}..{rows[-1]} leave the grid interior")
    return rows


def two_slit_mask(nx, ny, barrier_x, thickness, slit_centers, slit_width, open_slits=None) -> np.ndarray:
    """Framed grid with a barrier of ``thickness`` columns starting at ``barrier_x``."""
    m = frame_mask(nx, ny)
    if not (1 <= barrier_x and barrier_x + thickness <= nx - 1):
        raise InvalidInputError("barrier must lie inside the grid")
    cols = slice(barrier_x, barrier_x + thickness)
    m[cols, :] = False
    for k, c in enumerate(slit_centers):
        if open_slits is None or k in open_slits:
            m[cols, slit_rows(c, slit_width, ny)] = True
    return m


def annulus_mask(nx, ny, center, r_in, r_out, dx=1.0) -> np.ndarray:
    x, y = np.meshgrid(np.arange(nx) * dx, np.arange(ny) * dx, indexing="ij")
    r = np.hypot(x - center[0], y - center[1])
    return (r >= r_in) & (r <= r_out)


def sponge_profile(nx, ny, width, peak, edge="left") -> np.ndarray:
    """Quadratic absorbing ramp over ``width`` interior columns at one x edge."""
    w = np.zeros((nx, ny))
    if width <= 0 or peak == 0:
        return w
    depth = (np.arange(1, width + 1) / width) ** 2 * peak
    if edge == "left":
        w[1:width + 1, :] = depth[::-1, None]
    elif edge == "right":
        w[nx - 1 - width:nx - 1, :] = depth[:, None]
    else:
        raise InvalidInputError(f"unknown sponge edge {edge!r}")
    return w


# --- flux strings ----------------------------------------------------------------

_STEPS = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}


@dataclass(frozen=True)
class FluxString:
    """A point flux in plaquette ``flux_cell`` plus the cut carrying its phase.

    ``cut`` is a walk over plaquettes (dual sites) that starts at the flux cell and
    ends one step outside the grid; each step crosses exactly one link.
    """

    flux_cell: tuple[int, int]
    cut: tuple[tuple[int, int], ...]

    @classmethod
    def straight(cls, flux_cell, direction, shape) -> FluxString:
        nx, ny = shape
        di, dj = _STEPS[direction]
        a, b = flux_cell
        cut = [(a, b)]
        while 0 <= a < nx - 1 and 0 <= b < ny - 1:
            a, b = a + di, b + dj
            cut.append((a, b))
        return cls(tuple(flux_cell), tuple(cut))

    def crossed_links(self, shape):
        """Yield (axis, index, sign): link array 'x'/'y', its index, and the phase exponent sign."""
        nx, ny = shape
        px, py = nx - 1, ny - 1
        inside = lambda p: 0 <= p[0] < px and 0 <= p[1] < py  # noqa: E731
        cut = self.cut
        if len(cut) < 2 or tuple(cut[0]) != tuple(self.flux_cell):
            raise InvalidInputError("cut must start at the flux cell")
        if not inside(cut[0]):
            raise InvalidInputError(f"flux cell {self.flux_cell} is not a plaquette of the grid")
        if inside(cut[-1]):
            raise InvalidInputError("cut does not reach the grid boundary")
        if len(set(map(tuple, cut))) != len(cut):
            raise InvalidInputError("cut revisits a plaquette")
        for (a, b), (c, d) in zip(cut[:-1], cut[1:]):
            if not inside((a, b)):
                raise InvalidInputError("cut leaves the grid before its last step")
            step = (c - a, d - b)
            if step == (1, 0):
                yield "y", (a + 1, b), +1
            elif step == (-1, 0):
                yield "y", (a, b), -1
            elif step == (0, 1):
                yield "x", (a, b + 1), -1
            elif step == (0, -1):
                yield "x", (a, b), +1
            else:
                raise InvalidInputError(f"cut step {(a, b)} -> {(c, d)} is not between neighbours")


def flux_phase_angle(nu, q) -> float:
    """2*pi*q*nu reduced to [0, 2*pi) before exponentiation, so nu and nu + 1/q agree."""
    frac = (check_charge(q) * nu) % 1
    return 2.0 * math.pi * float(frac)


def apply_flux_string(grid: LatticeGrid, string: FluxString, nu, q=1) -> LatticeGrid:
    theta = flux_phase_angle(nu, q)
    ux, uy = grid.ux.copy(), grid.uy.copy()
    for axis, idx, sign in string.crossed_links(grid.shape):
        target = ux if axis == "x" else uy
        target[idx] *= complex(math.cos(sign * theta), math.sin(sign * theta))
    return grid.replace(ux=ux, uy=uy)


# --- Hamiltonian -------------------------------------------------------------------

def _check_state_shape(grid, psi):
    psi = np.asarray(psi)
    if psi.shape != grid.shape:
        raise InvalidInputError(f"state shape {psi.shape} does not match grid {grid.shape}")
    return psi


def hamiltonian_apply(grid: LatticeGrid, psi) -> np.ndarray:
    """(H psi)_i = sum_j -t U_ij psi_j + (4t + V_i - i W_i) psi_i on allowed sites.

    W is the absorbing sponge; without it H is Hermitian.
    """
    psi = np.where(grid.mask, _check_state_shape(grid, psi), 0).astype(complex)
    t = grid.hopping
    out = (4 * t + grid.potential - 1j * grid.absorber) * psi
    out[1:, :] -= t * grid.ux * psi[:-1, :]
    out[:-1, :] -= t * np.conj(grid.ux) * psi[1:, :]
    out[:, 1:] -= t * grid.uy * psi[:, :-1]
    out[:, :-1] -= t * np.conj(grid.uy) * psi[:, 1:]
    out[~grid.mask] = 0
    return out


def hamiltonian_matrix(grid: LatticeGrid) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse H restricted to allowed sites, and the flat indices of those sites."""
    nx, ny = grid.shape
    t = grid.hopping
    flat = np.arange(nx * ny).reshape(nx, ny)
    active = np.flatnonzero(grid.mask.ravel())
    pos = np.full(nx * ny, -1)
    pos[active] = np.arange(active.size)

    rows, cols, vals = [], [], []
    # hop (i,j) -> (i+1,j): H[dst, src] = -t ux, H[src, dst] = -t conj(ux)
    for src, dst, u in [
        (flat[:-1, :], flat[1:, :], grid.ux),
        (flat[:, :-1], flat[:, 1:], grid.uy),
    ]:
        s, d, u = pos[src.ravel()], pos[dst.ravel()], u.ravel()
        keep = (s >= 0) & (d >= 0)
        s, d, u = s[keep], d[keep], u[keep]
        rows += [d, s]
        cols += [s, d]
        vals += [-t * u, -t * np.conj(u)]
    diag = (4 * t + grid.potential - 1j * grid.absorber).ravel()[active]
    rows.append(np.arange(active.size))
    cols.append(np.arange(active.size))
    vals.append(diag)
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(active.size, active.size),
    )
    return H, active


# --- states --------------------------------------------------------------------------

@dataclass
class WaveState:
    amplitude: np.ndarray
    time: float = 0.0

    def norm(self, dx=1.0) -> float:
        return float(np.sum(np.abs(self.amplitude) ** 2) * dx**2)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


def gaussian_packet(grid: LatticeGrid, center, width, momentum) -> WaveState:
    """Normalized Gaussian whose density has standard deviation ``width`` per axis.

    ``momentum`` is a wavevector (kx, ky) or a scalar kx.
    """
    if not width > 0:
        raise InvalidInputError("packet width must be positive")
    kx, ky = (momentum, 0.0) if np.ndim(momentum) == 0 else momentum
    x, y = grid.coordinates()
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    psi = np.exp(-r2 / (4 * width**2)) * np.exp(1j * (kx * x + ky * y))
    total = np.sum(np.abs(psi) ** 2)
    leaked = np.sum(np.abs(psi[~grid.mask]) ** 2) / total
    if leaked > PACKET_MASK_TOL:
        raise InvalidInputError(f"packet puts {leaked:.2e} of its weight on forbidden sites")
    psi[~grid.mask] = 0
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx**2)
    return WaveState(psi, 0.0)


def momentum_expectation(grid: LatticeGrid, state: WaveState) -> tuple[float, float]:
    """Spectral <k> per axis from the discrete Fourier transform of the amplitude."""
    f = np.abs(np.fft.fft2(state.amplitude)) ** 2
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.ny, grid.dx)
    total = f.sum()
    return float(kx @ f.sum(axis=1) / total), float(ky @ f.sum(axis=0) / total)


def link_currents(grid: LatticeGrid, psi) -> tuple[np.ndarray, np.ndarray]:
    """Probability flow per unit time along +x links (nx-1, ny) and +y links (nx, ny-1).

    Satisfies d/dt(|psi_i|^2 dx^2) = -(net outflow) for the Hermitian part of H.
    """
    c = 2 * grid.hopping * grid.dx**2
    jx = c * np.imag(np.conj(grid.ux) * np.conj(psi[:-1, :]) * psi[1:, :])
    jy = c * np.imag(np.conj(grid.uy) * np.conj(psi[:, :-1]) * psi[:, 1:])
    return jx, jy


# --- time stepping -----------------------------------------------------------------

class CrankNicolson:
    """Cayley propagator (1 + i dt H/2)^-1 (1 - i dt H/2) for a fixed grid and dt.

    The implicit side is factorized once (sparse LU); every solve is checked
    against ``tol`` and polished by iterative refinement if needed.
    """

    def __init__(self, grid: LatticeGrid, dt: float, tol: float = SOLVE_TOL, max_refine: int = 3):
        if not dt > 0:
            raise InvalidInputError("dt must be positive")
        if dt > grid.mass * grid.dx**2:
            warnings.warn(f"dt={dt} exceeds mass*dx^2={grid.mass * grid.dx**2}; phase errors grow", stacklevel=2)
        self.grid, self.dt, self.tol, self.max_refine = grid, float(dt), tol, max_refine
        H, self.active = hamiltonian_matrix(grid)
        eye = sp.identity(H.shape[0], dtype=complex, format="csr")
        self.A = (eye + 0.5j * dt * H).tocsr()
        self.B = (eye - 0.5j * dt * H).tocsr()
        self._lu = spla.splu(self.A.tocsc(), permc_spec="MMD_AT_PLUS_A")
        self.last_residual = 0.0

    def solve_active(self, v: np.ndarray) -> np.ndarray:
        b = self.B @ v
        x = self._lu.solve(b)
        scale = max(np.linalg.norm(b), 1e-300)
        for _ in range(self.max_refine + 1):
            r = b - self.A @ x
            res = np.linalg.norm(r) / scale
            if res < self.tol:
                self.last_residual = res
                return x
            x = x + self._lu.solve(r)
        raise NumericError(f"Crank-Nicolson solve stalled at relative residual {res:.3e}")

    def step(self, state: WaveState) -> WaveState:
        psi = _check_state_shape(self.grid, state.amplitude)
        flat = psi.ravel()
        out = np.zeros(flat.size, dtype=complex)
        out[self.active] = self.solve_active(flat[self.active])
        return WaveState(out.reshape(self.grid.shape), state.time + self.dt)


@functools.lru_cache(maxsize=4)
def _propagator(grid: LatticeGrid, dt: float) -> CrankNicolson:
    return CrankNicolson(grid, dt)


def crank_nicolson_step(grid: LatticeGrid, state: WaveState, dt: float) -> WaveState:
    """One Cayley step; the factorization is cached per (grid, dt)."""
    return _propagator(grid, float(dt)).step(state)
