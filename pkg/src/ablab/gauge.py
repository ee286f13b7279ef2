"""Planar vector potentials, gauge transformations, path phases and winding numbers.

Units throughout: hbar = c = 1 and charges are integers in units of the electron
charge, so a flux quantum 2*pi*hbar*c/e equals 2*pi in phase units.  Fluxes are
therefore passed around as the dimensionless fraction ``nu`` of that quantum and
the phase a charge ``q`` picks up on a loop winding ``w`` times is 2*pi*q*w*nu.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, GeometryError, InvalidInputError, NumericError

TWO_PI = 2.0 * math.pi
EPS_GEOM = 1e-9
QUAD_TOL = 1e-10
WINDING_RESIDUAL = 0.01

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class PhaseValue(float):
    """A phase in radians; ``.reduced`` gives the representative in [0, 2*pi)."""

    @property
    def reduced(self) -> float:
        return reduce_phase(float(self))


def reduce_phase(radians: float) -> float:
    r = math.fmod(radians, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


def wrap_phase(radians):
    """Map phases to the symmetric interval [-pi, pi)."""
    return (np.asarray(radians) + math.pi) % TWO_PI - math.pi


def phase_distance(a: float, b: float) -> float:
    """Circular distance between two phases, in [0, pi]."""
    return abs(float(wrap_phase(a - b)))


def check_charge(q) -> int:
    if isinstance(q, bool) or int(q) != q:
        raise InvalidInputError(f"charge multiple must be an integer, got {q!r}")
    if q == 0:
        raise InvalidInputError("charge multiple must be nonzero")
    return int(q)


@dataclass(frozen=True)
class PolylinePath:
    """Piecewise-linear path. A closed path joins its last vertex back to the first."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidInputError(f"vertices must have shape (n, 2), got {v.shape}")
        if self.closed and len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 2:
            raise InvalidInputError("a path needs at least 2 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("path vertices must be finite")
        starts, ends = _segments(v, self.closed)
        if np.any(np.all(starts == ends, axis=1)):
            raise InvalidInputError("consecutive path vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return _segments(self.vertices, self.closed)

    def reversed(self) -> PolylinePath:
        return PolylinePath(self.vertices[::-1], self.closed)

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[0] if self.closed else self.vertices[-1]

    @classmethod
    def arc(cls, center, radius, theta0, theta1, n=64) -> PolylinePath:
        """Open polyline with ``n`` segments inscribed in a circular arc."""
        t = np.linspace(theta0, theta1, n + 1)
        c = np.asarray(center, dtype=float)
        return cls(c + radius * np.column_stack([np.cos(t), np.sin(t)]), closed=False)

    @classmethod
    def circle(cls, center, radius, n=64, turns=1) -> PolylinePath:
        """Closed regular polygon traversed ``turns`` times (negative = clockwise)."""
        if turns == 0:
            raise InvalidInputError("turns must be nonzero")
        total = n * abs(turns)
        t = np.sign(turns) * TWO_PI * np.arange(total) / n
        c = np.asarray(center, dtype=float)
        return cls(c + radius * np.column_stack([np.cos(t), np.sin(t)]), closed=True)


def _segments(v, closed):
    if closed:
        return v, np.roll(v, -1, axis=0)
    return v[:-1], v[1:]


class VectorPotentialField:
    """A planar vector potential evaluable on arrays of points."""

    def __call__(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def tube(self) -> IdealFluxTube:
        raise NotImplementedError

    def breakpoints(self, a, b) -> list[float]:
        """Parameters s in (0, 1) where the field is not smooth along a + s*(b - a)."""
        return []


@dataclass(frozen=True)
class IdealFluxTube(VectorPotentialField):
    """Infinitely long solenoid seen in cross-section, azimuthal (symmetric) gauge.

    Outside the core A = nu/r in the azimuthal direction, so the potential is the
    gradient of nu*theta and carries no field; inside, the field is uniform.
    """

    center: tuple[float, float] = (0.0, 0.0)
    core_radius: float = 0.1
    nu: float = 0.0

    def __post_init__(self):
        if not self.core_radius > 0:
            raise InvalidInputError("core_radius must be positive")
        if not math.isfinite(self.nu):
            raise InvalidInputError("flux must be finite")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def __call__(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r2 = dx * dx + dy * dy
        R2 = self.core_radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r2 > R2, self.nu / r2, self.nu / R2)
        return -dy * scale, dx * scale

    @property
    def tube(self) -> IdealFluxTube:
        return self

    def breakpoints(self, a, b):
        # crossings of the core circle, where the derivative of A jumps
        d = np.asarray(b, dtype=float) - a
        f = np.asarray(a, dtype=float) - self.center
        qa, qb, qc = d @ d, 2 * f @ d, f @ f - self.core_radius**2
        disc = qb * qb - 4 * qa * qc
        if disc <= 0:
            return []
        root = math.sqrt(disc)
        return sorted(s for s in ((-qb - root) / (2 * qa), (-qb + root) / (2 * qa)) if 0 < s < 1)


@dataclass(frozen=True)
class GaugeFunction:
    """Static, single-valued gauge function lambda(x, y) with its gradient."""

    value: Callable
    gradient: Callable
    label: str = field(default="", compare=False)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.value(x, y), np.broadcast(x, y).shape) + 0.0

    def grad(self, x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        gx, gy = self.gradient(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.broadcast_to(gx, shape) + 0.0, np.broadcast_to(gy, shape) + 0.0

    @classmethod
    def constant(cls, c: float) -> GaugeFunction:
        return cls(lambda x, y: c + 0.0 * x, lambda x, y: (0.0 * x, 0.0 * x), label=str(c))

    @classmethod
    def linear(cls, a: float, b: float, c: float = 0.0) -> GaugeFunction:
        return cls(
            lambda x, y: a * x + b * y + c,
            lambda x, y: (a + 0.0 * x, b + 0.0 * x),
            label=f"{a}*x + {b}*y + {c}",
        )

    @classmethod
    def from_expression(cls, text: str) -> GaugeFunction:
        """Parse an expression in ``x`` and ``y`` such as ``"3x + y"`` or ``"x^2 sin(y)"`` (``^`` is a power)."""
        import sympy
        from sympy.parsing.sympy_parser import (
            convert_xor,
            implicit_multiplication_application,
            parse_expr,
            standard_transformations,
        )

        x, y = sympy.symbols("x y", real=True)
        try:
            expr = parse_expr(
                text,
                local_dict={"x": x, "y": y},
                transformations=standard_transformations + (implicit_multiplication_application, convert_xor),
            )
        except Exception as exc:
            raise InvalidInputError(f"cannot parse gauge function {text!r}: {exc}") from exc
        extra = expr.free_symbols - {x, y}
        if extra:
            raise InvalidInputError(f"gauge function may only use x and y, found {sorted(map(str, extra))}")
        value = sympy.lambdify((x, y), expr, "numpy")
        gx = sympy.lambdify((x, y), sympy.diff(expr, x), "numpy")
        gy = sympy.lambdify((x, y), sympy.diff(expr, y), "numpy")
        return cls(value, lambda px, py: (gx(px, py), gy(px, py)), label=text)

    def check_gradient(self, points, h: float = 1e-5, tol: float = 1e-6) -> float:
        """Compare the gradient with central differences; return the worst deviation.

        A multivalued "gauge function" (e.g. an angle with a branch cut) shows up here
        as a mismatch near the cut.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = p[:, 0], p[:, 1]
        fx = (self(x + h, y) - self(x - h, y)) / (2 * h)
        fy = (self(x, y + h) - self(x, y - h)) / (2 * h)
        gx, gy = self.grad(x, y)
        err = float(np.max(np.hypot(fx - gx, fy - gy)))
        if err > tol:
            raise InvalidInputError(f"gauge gradient inconsistent with its values (defect {err:.3g})")
        return err


@dataclass(frozen=True)
class GaugeShifted(VectorPotentialField):
    base: VectorPotentialField
    gauge: GaugeFunction

    def __call__(self, x, y):
        ax, ay = self.base(x, y)
        gx, gy = self.gauge.grad(x, y)
        return ax + gx, ay + gy

    @property
    def tube(self) -> IdealFluxTube:
        return self.base.tube

    def breakpoints(self, a, b):
        return self.base.breakpoints(a, b)


def gauge_transform(field: VectorPotentialField, lam: GaugeFunction) -> VectorPotentialField:
    """Return the field A + grad(lambda)."""
    return GaugeShifted(field, lam)


def _segment_integral(field, a, b, tol=QUAD_TOL, max_depth=48) -> float:
    """Integral of A . dl along the straight segment a -> b.

    Adaptive composite 8-point Gauss-Legendre: a subinterval is accepted once its
    two halves agree with the whole to within its share of ``tol``.
    """
    d = b - a

    def gl(s0, s1):
        s = 0.5 * (s1 - s0) * _GL_X + 0.5 * (s1 + s0)
        ax, ay = field(a[0] + s * d[0], a[1] + s * d[1])
        return 0.5 * (s1 - s0) * float(_GL_W @ (ax * d[0] + ay * d[1]))

    total = 0.0
    knots = [0.0, *field.breakpoints(a, b), 1.0]
    stack = [(s0, s1, gl(s0, s1), 0) for s0, s1 in zip(knots[:-1], knots[1:])]
    while stack:
        s0, s1, whole, depth = stack.pop()
        m = 0.5 * (s0 + s1)
        left, right = gl(s0, m), gl(m, s1)
        if abs(left + right - whole) <= max(tol * (s1 - s0), 1e-15):
            total += left + right
        elif depth >= max_depth:
            raise NumericError(f"quadrature did not converge on segment {a} -> {b}")
        else:
            stack.append((s0, m, left, depth + 1))
            stack.append((m, s1, right, depth + 1))
    return total


def _segment_distances(starts, ends, point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    d = ends - starts
    t = np.einsum("ij,ij->i", p - starts, d) / np.einsum("ij,ij->i", d, d)
    t = np.clip(t, 0.0, 1.0)
    closest = starts + t[:, None] * d
    return np.hypot(*(closest - p).T)


def path_phase(path: PolylinePath, field: VectorPotentialField, q=1, exclude_core=False) -> PhaseValue:
    """Phase q * integral of A . dl along ``path``.

    With ``exclude_core`` the path may not have a vertex inside the tube core.
    """
    q = check_charge(q)
    if not isinstance(path, PolylinePath):
        path = PolylinePath(path)
    if exclude_core:
        tube = field.tube
        r = np.hypot(*(path.vertices - np.asarray(tube.center)).T)
        if np.any(r <= tube.core_radius):
            raise DomainError("path vertex lies inside the flux-tube core")
    starts, ends = path.segments()
    return PhaseValue(q * sum(_segment_integral(field, a, b) for a, b in zip(starts, ends)))


def loop_phase(path: PolylinePath, field: VectorPotentialField, q=1) -> PhaseValue:
    """Holonomy of a closed path; equals 2*pi*q*w*nu for a loop avoiding the core."""
    if not path.closed:
        raise InvalidInputError("loop_phase needs a closed path")
    tube = field.tube
    starts, ends = path.segments()
    if np.min(_segment_distances(starts, ends, tube.center)) <= tube.core_radius:
        raise DomainError("closed path enters the flux-tube core")
    return path_phase(path, field, q)


def enclosed_flux(path: PolylinePath, field: VectorPotentialField) -> float:
    """Flux (in flux quanta) linked by a closed path, counted with its winding."""
    return float(loop_phase(path, field, 1)) / TWO_PI


def winding_number(path: PolylinePath, point, eps: float = EPS_GEOM) -> int:
    """Signed number of turns of a closed path around ``point`` by angle summation."""
    if not path.closed:
        raise InvalidInputError("winding number needs a closed path")
    starts, ends = path.segments()
    if np.min(_segment_distances(starts, ends, point)) <= eps:
        raise GeometryError(f"point {tuple(point)} lies on the path")
    p = np.asarray(point, dtype=float)
    u, v = starts - p, ends - p
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    dot = np.einsum("ij,ij->i", u, v)
    turns = float(np.sum(np.arctan2(cross, dot))) / TWO_PI
    w = round(turns)
    if abs(turns - w) >= WINDING_RESIDUAL:
        raise NumericError(f"angle sum {turns:.6f} turns is not near an integer")
    return int(w)
