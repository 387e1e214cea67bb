"""Run configuration: quadrature settings, tolerances, sampling grids."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np


@dataclass(frozen=True)
class QuadConfig:
    """Tensor-product Gauss-Legendre settings for swept-volume integrals."""

    order: int = 8
    cells: int = 16
    t_cells: int = 8

    def halved(self) -> "QuadConfig":
        return replace(self, order=max(self.order // 2, 1))


@dataclass(frozen=True)
class Tolerances:
    """Named numerical tolerances; every CLI subcommand accepts --tol-* overrides."""

    on_manifold: float = 1e-10
    contact_coeff: float = 1e-11
    grad: float = 1e-12
    ambiguous_foot: float = 1e-6
    ambiguous_dist: float = 1e-9
    immersion: float = 1e-8
    degree_guard: float = 1e-9
    vanish: float = 1e-9
    flow_residual: float = 1e-8
    flow_drift: float = 1e-6
    ruled: float = 1e-8
    vol_zero: float = 1e-13
    dist_zero: float = 1e-13
    decay_floor: float = 1e-12
    fit_residual: float = 1e-9
    min_speed: float = 1e-6
    cubic_residual: float = 1e-9
    reparam_gap: float = 1e-6

    def override(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def geometric_grid(t0: float = 0.2, steps: int = 8) -> np.ndarray:
    """t_i = t0 * 2^-i, i = 0..steps-1 (descending); spans two decades at defaults."""
    return t0 * 0.5 ** np.arange(steps, dtype=float)


@dataclass(frozen=True)
class RunParams:
    """Per-scene numeric parameters with library-wide defaults."""

    t0: float = 0.2
    t_steps: int = 8
    quad: QuadConfig = field(default_factory=QuadConfig)
    span: float = 1.0
    samples: int = 3
    tspan: float = 0.2
    eps_max: float = 0.5
    margin: float = 0.15
    tube_rho_max: float | None = None
    tol: Tolerances = field(default_factory=Tolerances)

    def t_grid(self) -> np.ndarray:
        return geometric_grid(self.t0, self.t_steps)
