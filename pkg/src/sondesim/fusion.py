"""Orientation and navigation filters: 9-DOF AHRS, frame rotation, Kalman.

Quaternions are [w, x, y, z] and rotate body-frame vectors into the local
east-north-up frame: v_local = q * (0, v_body) * conj(q).  The AHRS step is
the gradient-descent complementary filter; the navigation filter is a 6-state
(position, velocity) Kalman loop with acceleration as control input, bridging
GNSS outages by dead reckoning between fixes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81  # m/s^2

IDENTITY_QUATERNION = np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float) / np.linalg.norm(q)


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    """Rotate a body-frame 3-vector into the local frame."""
    p = np.array([0.0, v[0], v[1], v[2]])
    return quat_multiply(quat_multiply(q, p), quat_conjugate(q))[1:]


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def ahrs_update(q, gyro, accel, mag, dt: float, beta: float = 0.1) -> np.ndarray:
    """One gradient-descent AHRS step; returns the renormalized quaternion.

    gyro in rad/s, accel in g units (reads (0,0,1) at rest, level), mag in
    gauss, all body frame.  A zero accel vector disables the corrective step
    (gyro-only propagation, flagged with a RuntimeWarning); a zero mag vector
    falls back to the accelerometer-only gradient.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    q0, q1, q2, q3 = np.asarray(q, dtype=float)
    gx, gy, gz = (float(c) for c in gyro)
    ax, ay, az = (float(c) for c in accel)
    mx, my, mz = (float(c) for c in mag)

    qdot0 = 0.5 * (-q1 * gx - q2 * gy - q3 * gz)
    qdot1 = 0.5 * (q0 * gx + q2 * gz - q3 * gy)
    qdot2 = 0.5 * (q0 * gy - q1 * gz + q3 * gx)
    qdot3 = 0.5 * (q0 * gz + q1 * gy - q2 * gx)

    accel_norm = math.sqrt(ax * ax + ay * ay + az * az)
    if accel_norm == 0.0:
        warnings.warn("zero accelerometer vector: gyro-only AHRS step", RuntimeWarning)
        beta = 0.0

    if beta > 0.0 and accel_norm > 0.0:
        ax, ay, az = ax / accel_norm, ay / accel_norm, az / accel_norm
        mag_norm = math.sqrt(mx * mx + my * my + mz * mz)
        if mag_norm == 0.0:
            # accelerometer-only gradient (gravity reference (0,0,1))
            s0 = 4 * q0 * q2 * q2 + 2 * q2 * ax + 4 * q0 * q1 * q1 - 2 * q1 * ay
            s1 = (
                4 * q1 * q3 * q3
                - 2 * q3 * ax
                + 4 * q0 * q0 * q1
                - 2 * q0 * ay
                - 4 * q1
                + 8 * q1 * q1 * q1
                + 8 * q1 * q2 * q2
                + 4 * q1 * az
            )
            s2 = (
                4 * q0 * q0 * q2
                + 2 * q0 * ax
                + 4 * q2 * q3 * q3
                - 2 * q3 * ay
                - 4 * q2
                + 8 * q2 * q1 * q1
                + 8 * q2 * q2 * q2
                + 4 * q2 * az
            )
            s3 = 4 * q1 * q1 * q3 - 2 * q1 * ax + 4 * q2 * q2 * q3 - 2 * q2 * ay
        else:
            mx, my, mz = mx / mag_norm, my / mag_norm, mz / mag_norm
            # reference flux in the local frame, flattened to (bx, 0, bz)
            hx = (
                mx * (q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3)
                + 2 * my * (q1 * q2 - q0 * q3)
                + 2 * mz * (q1 * q3 + q0 * q2)
            )
            hy = (
                2 * mx * (q1 * q2 + q0 * q3)
                + my * (q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3)
                + 2 * mz * (q2 * q3 - q0 * q1)
            )
            bx = math.sqrt(hx * hx + hy * hy)
            bz = (
                2 * mx * (q1 * q3 - q0 * q2)
                + 2 * my * (q2 * q3 + q0 * q1)
                + mz * (q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3)
            )

            fg1 = 2 * (q1 * q3 - q0 * q2) - ax
            fg2 = 2 * (q0 * q1 + q2 * q3) - ay
            fg3 = 2 * (0.5 - q1 * q1 - q2 * q2) - az
            fb1 = 2 * bx * (0.5 - q2 * q2 - q3 * q3) + 2 * bz * (q1 * q3 - q0 * q2) - mx
            fb2 = 2 * bx * (q1 * q2 - q0 * q3) + 2 * bz * (q0 * q1 + q2 * q3) - my
            fb3 = 2 * bx * (q0 * q2 + q1 * q3) + 2 * bz * (0.5 - q1 * q1 - q2 * q2) - mz

            s0 = (
                -2 * q2 * fg1
                + 2 * q1 * fg2
                - 2 * bz * q2 * fb1
                + (-2 * bx * q3 + 2 * bz * q1) * fb2
                + 2 * bx * q2 * fb3
            )
            s1 = (
                2 * q3 * fg1
                + 2 * q0 * fg2
                - 4 * q1 * fg3
                + 2 * bz * q3 * fb1
                + (2 * bx * q2 + 2 * bz * q0) * fb2
                + (2 * bx * q3 - 4 * bz * q1) * fb3
            )
            s2 = (
                -2 * q0 * fg1
                + 2 * q3 * fg2
                - 4 * q2 * fg3
                + (-4 * bx * q2 - 2 * bz * q0) * fb1
                + (2 * bx * q1 + 2 * bz * q3) * fb2
                + (2 * bx * q0 - 4 * bz * q2) * fb3
            )
            s3 = (
                2 * q1 * fg1
                + 2 * q2 * fg2
                + (-4 * bx * q3 + 2 * bz * q1) * fb1
                + (-2 * bx * q0 + 2 * bz * q2) * fb2
                + 2 * bx * q1 * fb3
            )

        s_norm = math.sqrt(s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3)
        if s_norm > 0.0:
            qdot0 -= beta * s0 / s_norm
            qdot1 -= beta * s1 / s_norm
            qdot2 -= beta * s2 / s_norm
            qdot3 -= beta * s3 / s_norm

    out = np.array(
        [q0 + qdot0 * dt, q1 + qdot1 * dt, q2 + qdot2 * dt, q3 + qdot3 * dt]
    )
    return quat_normalize(out)


def body_to_local(accel_body_g, q) -> np.ndarray:
    """Rotate a body-frame accelerometer reading (g units) into the local
    frame as m/s^2 with gravity removed."""
    local = quat_rotate(np.asarray(q, dtype=float), np.asarray(accel_body_g, dtype=float))
    return local * GRAVITY - np.array([0.0, 0.0, GRAVITY])


@dataclass
class NavState:
    """Position/velocity estimate with 6x6 covariance (ENU meters, m/s)."""

    position: np.ndarray
    velocity: np.ndarray
    covariance: np.ndarray

    @classmethod
    def initial(cls, position, velocity, pos_sigma: float, vel_sigma: float) -> "NavState":
        cov = np.diag([pos_sigma**2] * 3 + [vel_sigma**2] * 3).astype(float)
        return cls(np.asarray(position, dtype=float), np.asarray(velocity, dtype=float), cov)


def kalman_predict(
    state: NavState, accel_local, dt: float, accel_noise_var: float
) -> NavState:
    """Constant-acceleration point-mass propagation with white-accel process noise."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    a = np.asarray(accel_local, dtype=float)
    position = state.position + state.velocity * dt + 0.5 * a * dt * dt
    velocity = state.velocity + a * dt

    eye = np.eye(3)
    transition = np.block([[eye, dt * eye], [np.zeros((3, 3)), eye]])
    process = accel_noise_var * np.block(
        [
            [dt**4 / 4.0 * eye, dt**3 / 2.0 * eye],
            [dt**3 / 2.0 * eye, dt**2 * eye],
        ]
    )
    covariance = transition @ state.covariance @ transition.T + process
    covariance = 0.5 * (covariance + covariance.T)
    return NavState(position, velocity, covariance)


def kalman_update(
    state: NavState, gnss_position, gnss_velocity, measurement_noise: np.ndarray
) -> tuple[NavState, np.ndarray]:
    """Linear measurement update against a GNSS position+velocity fix.

    measurement_noise is the 6x6 covariance of the fix (must be positive
    definite).  Returns the updated state and the innovation vector.
    """
    noise = np.asarray(measurement_noise, dtype=float)
    if noise.shape != (6, 6):
        raise ValueError("measurement_noise must be 6x6")
    if np.any(np.linalg.eigvalsh(0.5 * (noise + noise.T)) <= 0):
        raise ValueError("measurement_noise must be positive definite")

    predicted = np.concatenate([state.position, state.velocity])
    measurement = np.concatenate(
        [np.asarray(gnss_position, dtype=float), np.asarray(gnss_velocity, dtype=float)]
    )
    innovation = measurement - predicted

    cov = state.covariance
    innovation_cov = cov + noise  # H = I
    gain = cov @ np.linalg.inv(innovation_cov)
    updated = predicted + gain @ innovation

    # Joseph form keeps the covariance symmetric PSD
    imkh = np.eye(6) - gain
    covariance = imkh @ cov @ imkh.T + gain @ noise @ gain.T
    covariance = 0.5 * (covariance + covariance.T)
    return NavState(updated[:3], updated[3:], covariance), innovation
