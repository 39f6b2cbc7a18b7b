"""Velocity model: linear fundamental diagram, route-choice fields, composition.

All functions accept scalars or numpy arrays; points are arrays whose last
axis has length 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EPSILON_DIR = 1e-12
EPSILON_CENTER = 1e-9


@dataclass(frozen=True)
class ModelParams:
    v_free: float = 1.3
    rho_jam: float = 5.4
    beta_dyn: float = 0.5
    zigzag_a: float = math.pi / 2
    zigzag_b: float = 1.0 / (2.0 * math.pi)
    spiral_center: tuple[float, float] = (60.0, 60.0)
    spiral_b: float = 0.2

    def __post_init__(self):
        if not self.v_free > 0:
            raise ValueError(f"v_free must be positive, got {self.v_free}")
        if not self.rho_jam > 0:
            raise ValueError(f"rho_jam must be positive, got {self.rho_jam}")
        if not self.beta_dyn >= 0:
            raise ValueError(f"beta_dyn must be nonnegative, got {self.beta_dyn}")
        if not self.zigzag_a > 0:
            raise ValueError(f"zigzag_a must be positive, got {self.zigzag_a}")


def fundamental_speed(rho, p: ModelParams):
    """Linear speed-density relation, clamped at zero above jam density."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise ValueError("density must be nonnegative")
    v = np.maximum(0.0, p.v_free * (1.0 - rho_arr / p.rho_jam))
    return float(v) if v.ndim == 0 else v


def _points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError(f"points must have a trailing axis of length 2, got shape {pts.shape}")
    return pts


def static_field_straight(x, p: ModelParams | None = None) -> np.ndarray:
    pts = _points(x)
    out = np.zeros(pts.shape)
    out[..., 0] = 1.0
    return out


def static_field_zigzag(x, p: ModelParams) -> np.ndarray:
    pts = _points(x)
    s = np.sin(p.zigzag_b * pts[..., 0])
    norm = np.sqrt(p.zigzag_a**2 + s**2)
    return np.stack([p.zigzag_a / norm, s / norm], axis=-1)


def static_field_spiral(x, p: ModelParams, eps: float = EPSILON_CENTER) -> np.ndarray:
    """Inward counter-clockwise spiral around ``p.spiral_center``.

    Streamlines satisfy ``dr/dtheta = -spiral_b``.  Returns the zero vector
    within ``eps`` of the centre.
    """
    pts = _points(x)
    xt = pts[..., 0] - p.spiral_center[0]
    yt = pts[..., 1] - p.spiral_center[1]
    r = np.hypot(xt, yt)
    b = p.spiral_b
    dx = -b * xt - r * yt
    dy = -b * yt + r * xt
    norm = np.hypot(dx, dy)
    at_center = r < eps
    safe = np.where(at_center, 1.0, norm)
    return np.stack([np.where(at_center, 0.0, dx / safe), np.where(at_center, 0.0, dy / safe)], axis=-1)


_BUILTIN = {
    "straight": static_field_straight,
    "zigzag": static_field_zigzag,
    "spiral": static_field_spiral,
}


@dataclass(frozen=True)
class StaticField:
    """A route-choice direction field.

    ``kind`` is one of ``straight``, ``zigzag``, ``spiral`` or ``custom``; a
    custom field supplies ``func(points) -> directions``.
    """

    kind: str
    params: ModelParams = ModelParams()
    func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind == "custom":
            if self.func is None:
                raise ValueError("custom static field needs a func")
        elif self.kind not in _BUILTIN:
            raise ValueError(f"unknown static field kind {self.kind!r}")

    def __call__(self, points) -> np.ndarray:
        if self.kind == "custom":
            return np.asarray(self.func(_points(points)), dtype=float)
        return _BUILTIN[self.kind](points, self.params)


def compose_velocity(e_stat, grad_rho, rho, p: ModelParams, eps_dir: float = EPSILON_DIR):
    """Velocity from static direction, density gradient and local density.

    The direction ``e_stat - beta_dyn * grad_rho`` is normalised and scaled by
    the fundamental speed.  A direction shorter than ``eps_dir`` gives rest.
    """
    e = np.asarray(e_stat, dtype=float)
    g = np.asarray(grad_rho, dtype=float)
    d = e - p.beta_dyn * g
    norm = np.linalg.norm(d, axis=-1)
    speed = np.asarray(fundamental_speed(rho, p))
    ok = norm >= eps_dir
    scale = np.where(ok, speed / np.where(ok, norm, 1.0), 0.0)
    return d * scale[..., None]
