"""Constellation geometry: Walker-Delta shells, service regions, link kinematics.

All orbits are circular around a spherical, non-rotating Earth; positions and
velocities are expressed in a common Earth-centered frame (km, km/s).  Every
function is a pure function of its inputs plus an explicit seed, so results
are reproducible and safe to evaluate in parallel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import EARTH_MU_KM3_S2, EARTH_RADIUS_KM, SPEED_OF_LIGHT

_C_KM_S = SPEED_OF_LIGHT / 1e3


@dataclass(frozen=True)
class ConstellationConfig:
    """Walker-Delta shell parameters.

    ``phasing_factor`` is the inter-plane slot offset F of the i:T/P/F
    notation; it must lie in [0, num_planes - 1].
    """
    num_planes: int = 28
    sats_per_plane: int = 60
    inclination_deg: float = 53.0
    altitude_km: float = 600.0
    phasing_factor: int = 1
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ValueError("num_planes and sats_per_plane must be >= 1")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError("inclination_deg must be in [0, 180]")
        if self.altitude_km <= 0:
            raise ValueError("altitude_km must be positive")
        if not 0 <= self.phasing_factor <= self.num_planes - 1:
            raise ValueError("phasing_factor must be in [0, num_planes - 1]")

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def total_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True)
class SatelliteState:
    """Satellite position/velocity plus the antenna body frame.

    ``body_frame`` columns are the body axes expressed in the Earth frame:
    column 0 along-track (vertical array axis), column 1 cross-track
    (horizontal array axis), column 2 boresight toward nadir.
    """
    position: np.ndarray        # (3,) km
    velocity: np.ndarray        # (3,) km/s
    plane_index: int
    slot_index: int
    body_frame: np.ndarray      # (3, 3)


@dataclass(frozen=True)
class ServiceRegion:
    """A spherical-cap service region with user drop positions."""
    center_lat_lon: tuple[float, float]             # radians
    radius_km: float
    user_positions: list[tuple[float, float, float]] = field(default_factory=list)
    # each user: (lat_rad, lon_rad, alt_km)


@dataclass(frozen=True)
class LinkGeometry:
    """Per-(satellite, user) kinematics and departure angles."""
    slant_range_km: float
    tau_min_s: float            # line-of-sight propagation delay
    doppler_hz: float
    theta_x: float              # departure azimuth in the body frame, radians
    theta_y: float              # departure polar angle from the along-track axis


def latlon_to_ecef(lat: float, lon: float, alt_km: float = 0.0,
                   radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Spherical geocentric lat/lon (radians) to Cartesian km."""
    r = radius_km + alt_km
    cl = math.cos(lat)
    return np.array([r * cl * math.cos(lon), r * cl * math.sin(lon), r * math.sin(lat)])


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _body_frame(position: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    along = velocity / np.linalg.norm(velocity)
    bore = -position / np.linalg.norm(position)
    cross = np.cross(bore, along)
    cross /= np.linalg.norm(cross)
    return np.column_stack([along, cross, bore])


def build_constellation(config: ConstellationConfig, epoch_s: float = 0.0) -> list[SatelliteState]:
    """Generate all satellite states of a Walker-Delta shell at a given epoch.

    Planes are equally spaced in RAAN over 360 deg, in-plane slots equally
    spaced in anomaly, and the Walker phasing offset F * 360/T deg is applied
    between adjacent planes.  Orbits are circular, so speed follows vis-viva
    v = sqrt(mu / r) and velocity is orthogonal to position.

    Args:
        config: shell parameters.
        epoch_s: seconds since the reference epoch; satellites advance along
            their orbits at the circular mean motion.

    Returns:
        num_planes * sats_per_plane states, plane-major order.
    """
    r = config.orbit_radius_km
    speed = math.sqrt(EARTH_MU_KM3_S2 / r)
    mean_motion = speed / r     # rad/s
    inc = math.radians(config.inclination_deg)
    total = config.total_satellites

    states = []
    for p in range(config.num_planes):
        raan = 2.0 * math.pi * p / config.num_planes
        rot = _rot_z(raan) @ _rot_x(inc)
        for j in range(config.sats_per_plane):
            nu = (2.0 * math.pi * j / config.sats_per_plane
                  + 2.0 * math.pi * p * config.phasing_factor / total
                  + mean_motion * epoch_s)
            pos_pl = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
            vel_pl = np.array([-speed * math.sin(nu), speed * math.cos(nu), 0.0])
            pos = rot @ pos_pl
            vel = rot @ vel_pl
            states.append(SatelliteState(
                position=pos,
                velocity=vel,
                plane_index=p,
                slot_index=j,
                body_frame=_body_frame(pos, vel),
            ))
    return states


def sample_region(rng_seed: int, config: ConstellationConfig, radius_km: float,
                  num_users: int) -> ServiceRegion:
    """Draw a service region center and user drop, both area-uniform.

    The center is uniform over the sphere surface; users are uniform over the
    spherical cap of great-circle radius ``radius_km`` around it.

    Args:
        rng_seed: seed; identical seeds give identical regions.
        config: supplies the Earth radius.
        radius_km: cap great-circle radius (> 0, or 0 for a point region).
        num_users: number of user positions to draw (>= 1).

    Returns:
        ServiceRegion with geodetic center and user positions.
    """
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    if radius_km < 0:
        raise ValueError("radius_km must be >= 0")
    rng = np.random.default_rng(rng_seed)
    R = config.earth_radius_km

    center = rng.standard_normal(3)
    center /= np.linalg.norm(center)
    lat_c = math.asin(center[2])
    lon_c = math.atan2(center[1], center[0])

    # Cap sampling: cos(theta) uniform on [cos(theta_max), 1], azimuth uniform.
    theta_max = radius_km / R
    u = rng.random(num_users)
    cos_t = 1.0 - u * (1.0 - math.cos(theta_max))
    theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
    phi = rng.uniform(0.0, 2.0 * math.pi, num_users)

    # Local tangent basis at the center.
    ref = np.array([0.0, 0.0, 1.0]) if abs(center[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, center)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(center, e1)

    users = []
    for t, p in zip(theta, phi):
        d = (math.cos(t) * center
             + math.sin(t) * (math.cos(p) * e1 + math.sin(p) * e2))
        users.append((math.asin(d[2]), math.atan2(d[1], d[0]), 0.0))
    return ServiceRegion(center_lat_lon=(lat_c, lon_c), radius_km=radius_km,
                         user_positions=users)


def select_satellites(states: list[SatelliteState], region_center_ecef: np.ndarray,
                      num_cooperating: int) -> list[int]:
    """Indices of the closest satellites to a region center, ascending by range.

    Ties are broken deterministically by (plane_index, slot_index), which also
    makes the selection invariant to the input ordering of ``states``.
    """
    if num_cooperating <= 0:
        raise ValueError("num_cooperating must be positive")
    if num_cooperating > len(states):
        raise ValueError("num_cooperating exceeds the number of satellites")
    center = np.asarray(region_center_ecef, dtype=float)
    positions = np.array([s.position for s in states])
    ranges = np.linalg.norm(positions - center, axis=1)
    planes = np.array([s.plane_index for s in states])
    slots = np.array([s.slot_index for s in states])
    order = np.lexsort((slots, planes, ranges))
    return [int(i) for i in order[:num_cooperating]]


def link_geometry(sat: SatelliteState, user_position_ecef: np.ndarray,
                  f0_hz: float) -> LinkGeometry:
    """Delay, Doppler and departure angles for one satellite-user link.

    The Doppler shift is -(f0/c) * d(range)/dt with a static user, i.e.
    (f0/c) times the satellite velocity component toward the user.  Departure
    angles express the user direction in the body frame: theta_y is the polar
    angle from the along-track axis and theta_x the azimuth measured from the
    cross-track axis toward boresight, so a user at nadir maps to
    (theta_x, theta_y) = (pi/2, pi/2).
    """
    user = np.asarray(user_position_ecef, dtype=float)
    rel = user - sat.position
    dist = float(np.linalg.norm(rel))
    if dist <= 0.0:
        raise ValueError("satellite and user positions coincide")
    unit = rel / dist

    radial_speed_km_s = float(unit @ sat.velocity)       # toward the user
    doppler = f0_hz * radial_speed_km_s / _C_KM_S

    d_body = sat.body_frame.T @ unit
    theta_y = math.acos(max(-1.0, min(1.0, d_body[0])))
    if abs(d_body[1]) < 1e-300 and abs(d_body[2]) < 1e-300:
        theta_x = 0.0
    else:
        theta_x = math.atan2(d_body[2], d_body[1])
    return LinkGeometry(
        slant_range_km=dist,
        tau_min_s=dist / _C_KM_S,
        doppler_hz=doppler,
        theta_x=theta_x,
        theta_y=theta_y,
    )


def independence_probability(config: ConstellationConfig, radius_km: float,
                             threshold_s: float, n_trials: int, rng_seed: int,
                             num_cooperating: int = 5) -> tuple[float, float]:
    """Monte Carlo probability that two interference delay offsets differ by
    more than a threshold.

    Each trial draws a region center, two users in the cap, and a random pair
    of distinct cooperating satellites (the ``num_cooperating`` closest to the
    center); the trial succeeds when

        | (tau_{s1,l} - tau_{s1,k}) - (tau_{s2,l} - tau_{s2,k}) | > threshold.

    Returns:
        (probability, standard_error); both in [0, 1].
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if num_cooperating < 2:
        raise ValueError("need at least two cooperating satellites")
    states = build_constellation(config)
    positions = np.array([s.position for s in states])
    rng = np.random.default_rng(rng_seed)
    R = config.earth_radius_km

    hits = 0
    for _ in range(n_trials):
        region = sample_region(int(rng.integers(0, 2**63 - 1)), config, radius_km, 2)
        center = latlon_to_ecef(*region.center_lat_lon, radius_km=R)
        sel = select_satellites(states, center, min(num_cooperating, len(states)))
        s1, s2 = rng.choice(len(sel), size=2, replace=False)
        sat1, sat2 = positions[sel[s1]], positions[sel[s2]]
        u_l = latlon_to_ecef(*region.user_positions[0][:2], radius_km=R)
        u_k = latlon_to_ecef(*region.user_positions[1][:2], radius_km=R)
        tau = lambda sat, u: np.linalg.norm(u - sat) / _C_KM_S
        delta = abs((tau(sat1, u_l) - tau(sat1, u_k)) - (tau(sat2, u_l) - tau(sat2, u_k)))
        if delta > threshold_s:
            hits += 1
    p = hits / n_trials
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / n_trials)
    return p, stderr
