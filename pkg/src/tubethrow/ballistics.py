"""Planar projectile flight: flight time, landing flowmap, gradients, release
velocity, and membership in the backward reachable tube (BRT).

All quantities live in the vertical throwing plane: ``r`` is the horizontal
coordinate along the throw direction, ``z`` is height. A flying state is
``(r, z, r_dot, z_dot)``. Under gravity-only dynamics the horizontal landing
position of a state released at height ``z`` with landing plane ``z_land`` is

    r_land = r + r_dot * (z_dot + sqrt(z_dot**2 + 2*g*(z - z_land))) / g

which is exact, so the BRT is evaluated analytically through this flowmap
rather than by set discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.81  # m/s^2

# Below this discriminant the gradient term 1/sqrt(disc) is considered singular
# (apex grazing the landing plane).
MIN_GRADIENT_DISCRIMINANT = 1e-9

# Package-wide landing success slack: a throw counts as on target when the
# landing point is within this distance of the target.
DEFAULT_LANDING_SLACK = 0.25  # m


class DomainError(ValueError):
    """Raised when a trajectory never reaches the landing plane at a future time."""


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True, slots=True)
class FlightState:
    """Planar flying state of the object or end-effector.

    Attributes:
        r: horizontal position in the throwing plane (m)
        z: height (m)
        r_dot: horizontal velocity (m/s), nonnegative for throw states
        z_dot: vertical velocity (m/s)
    """

    r: float
    z: float
    r_dot: float
    z_dot: float

    def __post_init__(self):
        for name in ("r", "z", "r_dot", "z_dot"):
            _require_finite(name, getattr(self, name))
        if self.r_dot < 0.0:
            raise ValueError(f"throw states move forward in the plane: r_dot={self.r_dot}")


@dataclass(frozen=True, slots=True)
class TargetSpec:
    """Landing target set: position with slack, optional landing-velocity box.

    ``v_land_box`` is ``((r_dot_lo, r_dot_hi), (z_dot_lo, z_dot_hi))`` bounds on
    the ballistic landing velocity, or ``None`` for a position-only target.
    """

    r_target: float
    z_land: float = 0.0
    r_slack: float = DEFAULT_LANDING_SLACK
    v_land_box: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        _require_finite("r_target", self.r_target)
        _require_finite("z_land", self.z_land)
        if not self.r_slack >= 0.0:
            raise ValueError(f"r_slack must be >= 0, got {self.r_slack}")
        if self.v_land_box is not None:
            for lo, hi in self.v_land_box:
                if not lo <= hi:
                    raise ValueError(f"empty landing-velocity interval ({lo}, {hi})")


@dataclass(frozen=True, slots=True)
class BallisticsConstants:
    """Physical constants of the flight model."""

    g: float = GRAVITY

    def __post_init__(self):
        if not self.g > 0.0:
            raise ValueError(f"g must be positive, got {self.g}")


def flight_time(z: float, z_dot: float, z_land: float = 0.0, g: float = GRAVITY) -> float:
    """Time until a ballistic trajectory from height ``z`` with vertical velocity
    ``z_dot`` descends through the landing plane ``z_land``.

    Raises:
        DomainError: the trajectory never reaches ``z_land`` at a future time,
            either because the apex stays below the plane (negative
            discriminant) or because the state is below the plane and moving
            away from it.
    """
    disc = z_dot * z_dot + 2.0 * g * (z - z_land)
    if disc < 0.0:
        raise DomainError(
            f"apex below landing height: z={z}, z_dot={z_dot}, z_land={z_land}"
        )
    t = (z_dot + math.sqrt(disc)) / g
    if t < 0.0:
        raise DomainError(
            f"state below landing plane and descending: z={z}, z_dot={z_dot}, z_land={z_land}"
        )
    return t


def landing_position(state: FlightState, z_land: float = 0.0, g: float = GRAVITY) -> float:
    """Horizontal landing position (the flowmap) of a ballistic trajectory."""
    return state.r + state.r_dot * flight_time(state.z, state.z_dot, z_land, g)


def _flowmap_partials(
    z: float, r_dot: float, z_dot: float, z_land: float, g: float
) -> tuple[float, float, float]:
    """Flight time and landing-position partials, on raw floats.

    Shared by the public gradient and the QP assembly, which must also accept
    degraded measurements (e.g. a momentarily backward-drifting end-effector)
    that the FlightState constructor rejects.
    """
    disc = z_dot * z_dot + 2.0 * g * (z - z_land)
    if disc <= MIN_GRADIENT_DISCRIMINANT:
        raise DomainError(f"gradient singular near apex grazing: discriminant={disc}")
    root = math.sqrt(disc)
    t = (z_dot + root) / g
    if t < 0.0:
        raise DomainError("state below landing plane and descending")
    return t, t, r_dot * (1.0 + z_dot / root) / g


def flowmap_gradient(
    state: FlightState, z_land: float = 0.0, g: float = GRAVITY
) -> tuple[float, float]:
    """Partials of the landing position with respect to (r_dot, z_dot).

    Returns:
        ``(d r_land / d r_dot, d r_land / d z_dot)``. The first equals the
        flight time; the second is ``r_dot * (1 + z_dot / sqrt(disc)) / g``.

    Raises:
        DomainError: within ``MIN_GRADIENT_DISCRIMINANT`` of the apex-grazing
            singularity, where ``1/sqrt(disc)`` blows up.
    """
    _, d_rdot, d_zdot = _flowmap_partials(state.z, state.r_dot, state.z_dot, z_land, g)
    return d_rdot, d_zdot


def landing_velocity(
    state: FlightState, z_land: float = 0.0, g: float = GRAVITY
) -> tuple[float, float]:
    """Velocity at the landing instant: ``(r_dot, z_dot - g * flight_time)``."""
    t = flight_time(state.z, state.z_dot, z_land, g)
    return state.r_dot, state.z_dot - g * t


def propagate(state: FlightState, t: float, g: float = GRAVITY) -> FlightState:
    """Coast a state ballistically (no actuation) for duration ``t``."""
    return FlightState(
        r=state.r + state.r_dot * t,
        z=state.z + state.z_dot * t - 0.5 * g * t * t,
        r_dot=state.r_dot,
        z_dot=state.z_dot - g * t,
    )


def nominal_release_velocity(
    release_pos: tuple[float, float],
    target: TargetSpec,
    r_dot_spec: float,
    g: float = GRAVITY,
) -> float:
    """Vertical release velocity that lands a parabolic flight on the target.

    Given the release position, the target, and a specified horizontal release
    velocity, solves the parabola through both points: with
    ``t = (r_target - r) / r_dot`` the required vertical velocity is
    ``(z_land - z) / t + g * t / 2``.

    Raises:
        DomainError: ``r_dot_spec <= 0`` or the target is not ahead of the
            release position.
    """
    r, z = release_pos
    if r_dot_spec <= 0.0:
        raise DomainError(f"horizontal release velocity must be positive, got {r_dot_spec}")
    if target.r_target <= r:
        raise DomainError(
            f"target r={target.r_target} is behind release position r={r}"
        )
    t = (target.r_target - r) / r_dot_spec
    return (target.z_land - z) / t + 0.5 * g * t


def in_brt(state: FlightState, target: TargetSpec, g: float = GRAVITY) -> bool:
    """Whether a state's unforced ballistic flight enters the landing target set.

    Total function: states that never reach the landing plane are not in the
    backward reachable tube.
    """
    try:
        t = flight_time(state.z, state.z_dot, target.z_land, g)
    except DomainError:
        return False
    r_land = state.r + state.r_dot * t
    if abs(r_land - target.r_target) > target.r_slack:
        return False
    if target.v_land_box is not None:
        (rd_lo, rd_hi), (zd_lo, zd_hi) = target.v_land_box
        zd_land = state.z_dot - g * t
        if not (rd_lo <= state.r_dot <= rd_hi and zd_lo <= zd_land <= zd_hi):
            return False
    return True
