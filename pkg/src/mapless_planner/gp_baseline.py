"""RBF Gaussian-process upsampling of a sparse scan to a dense one.

Used to feed sparse range findings to planners that expect a full scan. Only
the posterior mean is computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from mapless_planner.constants import (
    DEFAULT_GP_LENGTHSCALE,
    DEFAULT_GP_NOISE_VAR,
    DEFAULT_GP_OUT_BEAMS,
    DEFAULT_GP_OUT_FOV,
    DEFAULT_GP_SIGNAL_VAR,
)
from mapless_planner.sim2d import LidarSpec, RobotState, WorldSpec, cast_rays


class GpError(ValueError):
    """The GP system could not be solved."""


@dataclass(frozen=True)
class GpConfig:
    lengthscale: float = DEFAULT_GP_LENGTHSCALE
    signal_var: float = DEFAULT_GP_SIGNAL_VAR
    noise_var: float = DEFAULT_GP_NOISE_VAR
    out_fov: float = DEFAULT_GP_OUT_FOV
    out_beams: int = DEFAULT_GP_OUT_BEAMS

    def __post_init__(self) -> None:
        if not self.lengthscale > 0.0:
            raise ValueError("lengthscale must be > 0")
        if not self.signal_var > 0.0:
            raise ValueError("signal_var must be > 0")
        if self.noise_var < 0.0:
            raise ValueError("noise_var must be >= 0")
        if not self.out_fov > 0.0:
            raise ValueError("out_fov must be > 0")
        if self.out_beams < 2:
            raise ValueError("out_beams must be >= 2")


def rbf_kernel(a, b, cfg: GpConfig):
    """sigma_f^2 * exp(-(a - b)^2 / (2 l^2)); broadcasts over arrays."""
    diff = np.subtract(a, b)
    return cfg.signal_var * np.exp(-(diff * diff) / (2.0 * cfg.lengthscale**2))


def query_angles(cfg: GpConfig) -> np.ndarray:
    """Equally spaced output angles centered on the robot heading."""
    half = cfg.out_fov / 2.0
    return np.linspace(-half, half, cfg.out_beams)


def gp_upsample(angles_in, ranges_in, cfg: GpConfig | None = None) -> np.ndarray:
    """Posterior mean of the ranges at every query angle.

    Args:
        angles_in: Sparse beam angles (radians, robot frame), distinct
        ranges_in: Range at each sparse angle
        cfg: Kernel and output grid

    Returns:
        Array of ``cfg.out_beams`` predicted ranges
    """
    cfg = cfg or GpConfig()
    x = np.asarray(angles_in, dtype=np.float64).reshape(-1)
    y = np.asarray(ranges_in, dtype=np.float64).reshape(-1)
    if x.shape != y.shape or x.size == 0:
        raise GpError("angles_in and ranges_in must be non-empty and of equal length")
    if np.unique(x).size != x.size:
        raise GpError("input angles must be distinct")

    mean = y.mean()
    K = rbf_kernel(x[:, None], x[None, :], cfg) + cfg.noise_var * np.eye(x.size)
    try:
        factor = cho_factor(K, lower=True)
    except LinAlgError as exc:
        raise GpError(
            f"kernel matrix is not positive definite; increase noise_var (now {cfg.noise_var})"
        ) from exc
    alpha = cho_solve(factor, y - mean)
    k_star = rbf_kernel(query_angles(cfg)[:, None], x[None, :], cfg)
    return k_star @ alpha + mean


def dense_scan(
    world: WorldSpec,
    robot: RobotState,
    cfg: GpConfig | None = None,
    lidar: LidarSpec | None = None,
) -> np.ndarray:
    """Ground-truth ranges (meters) at the GP query angles."""
    cfg = cfg or GpConfig()
    lidar = lidar or LidarSpec()
    return cast_rays(world, (robot.x, robot.y), query_angles(cfg) + robot.theta, lidar)


def upsample_error(predicted: np.ndarray, truth: np.ndarray) -> dict[str, float]:
    """RMSE and worst absolute error of an upsampled scan."""
    err = np.asarray(predicted) - np.asarray(truth)
    return {"rmse": float(np.sqrt(np.mean(err * err))), "max_abs": float(np.max(np.abs(err)))}
