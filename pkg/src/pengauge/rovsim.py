"""Desk-scale closed-loop ROV mission simulator.

Axes: x runs along the net, z is depth (positive down), y is the standoff
from the net plane. The controller drives x and z through per-axis PIDs that
chase a constant-speed carrot along the lawnmower path; y is passive, held by
a weak spring toward the planned standoff. Heading is assumed fixed.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import PengaugeError


class MissionState(str, Enum):
    GO_TO_START = "GoToStart"
    TRANSECT = "Transect"
    DESCEND = "Descend"
    RESURFACE = "Resurface"
    DONE = "Done"


@dataclass(frozen=True)
class MissionPlan:
    x_min: float
    x_max: float
    z_min: float
    z_max: float
    n_horizontal: int = 8
    n_vertical: int = 2
    standoff: float = 1.0
    speed_target: float = 0.15

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise PengaugeError("bad-plan", f"x_min {self.x_min} must be < x_max {self.x_max}")
        if not self.z_min < self.z_max:
            raise PengaugeError("bad-plan", f"z_min {self.z_min} must be < z_max {self.z_max}")
        if self.n_horizontal < 2 or self.n_vertical < 1:
            raise PengaugeError("bad-plan", "need n_horizontal >= 2 and n_vertical >= 1")
        if self.speed_target <= 0 or self.standoff <= 0:
            raise PengaugeError("bad-plan", "speed_target and standoff must be positive")


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    segment: MissionState  # state while heading to this waypoint

    @property
    def xz(self) -> np.ndarray:
        return np.array([self.x, self.z])


def generate_lawnmower(plan: MissionPlan) -> list[Waypoint]:
    """Serpentine rows plus a start point and a surface end point.

    Row depths are evenly spaced over [z_min, z_max]; each row holds
    n_horizontal points over [x_min, x_max], direction alternating per row.
    """
    if plan.n_vertical == 1:
        depths = [plan.z_min]
    else:
        depths = list(np.linspace(plan.z_min, plan.z_max, plan.n_vertical))
    xs = list(np.linspace(plan.x_min, plan.x_max, plan.n_horizontal))

    wps: list[Waypoint] = []
    for r, z in enumerate(depths):
        row = xs if r % 2 == 0 else xs[::-1]
        for k, x in enumerate(row):
            if r == 0 and k == 0:
                segment = MissionState.GO_TO_START  # the prepended start point
            elif k == 0:
                segment = MissionState.DESCEND
            else:
                segment = MissionState.TRANSECT
            wps.append(Waypoint(float(x), plan.standoff, float(z), segment))
    wps.append(Waypoint(wps[-1].x, plan.standoff, 0.0, MissionState.RESURFACE))
    return wps


CAPTURE_RADIUS = 0.1  # m


def advance_mission_state(
    next_wp: int, rov_xz: np.ndarray, waypoints: list[Waypoint], capture_radius: float = CAPTURE_RADIUS
) -> tuple[int, MissionState, Waypoint | None]:
    """Advance past every waypoint within the capture radius.

    Returns (index of next uncaptured waypoint, current state, active waypoint).
    """
    while next_wp < len(waypoints):
        wp = waypoints[next_wp]
        if float(np.hypot(rov_xz[0] - wp.x, rov_xz[1] - wp.z)) > capture_radius:
            break
        next_wp += 1
    if next_wp >= len(waypoints):
        return next_wp, MissionState.DONE, None
    active = waypoints[next_wp]
    return next_wp, active.segment, active


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.8
    ki: float = 0.05
    kd: float = 0.2
    out_clamp: float = 1.0
    integral_clamp: float = 0.5

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise PengaugeError("bad-gains", "gains must be >= 0")


@dataclass
class PidMemory:
    integral: float = 0.0
    prev_measured: float | None = None
    deriv: float = 0.0  # first-order-smoothed derivative of the measurement


PID_DERIV_ALPHA = 0.8


def pid_step(gains: PidGains, error: float, dt: float, memory: PidMemory, measured: float | None = None) -> float:
    """One PID update; returns the clamped thrust command in [-1, 1].

    The derivative acts on the measurement (not the error) so setpoint jumps at
    waypoint switches do not kick the output; it is smoothed with a first-order
    filter. The integral term is clamped for anti-windup.
    """
    if dt <= 0:
        raise PengaugeError("bad-dt", f"dt must be positive, got {dt}")
    memory.integral = float(np.clip(memory.integral + error * dt, -gains.integral_clamp, gains.integral_clamp))
    if measured is not None:
        if memory.prev_measured is not None:
            raw = -(measured - memory.prev_measured) / dt  # d(error)/dt from measurement motion
            memory.deriv = PID_DERIV_ALPHA * memory.deriv + (1 - PID_DERIV_ALPHA) * raw
        memory.prev_measured = measured
    u = gains.kp * error + gains.ki * memory.integral + gains.kd * memory.deriv
    return float(np.clip(u, -gains.out_clamp, gains.out_clamp))


@dataclass(frozen=True)
class RovState:
    position: np.ndarray  # (x, y, z) m
    velocity: np.ndarray  # m/s per axis
    heading: float = 0.0  # rad, held constant


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    v_max: float = 0.5  # m/s per controlled axis
    tau: float = 0.5  # s, first-order velocity lag
    spring_rate: float = 0.2  # 1/s, passive pull of y toward the standoff
    lead_max: float = 0.6  # m, carrot never runs further ahead than this
    jitter_amp: float = 0.0  # sinusoidal thrust disturbance on the transect axis
    jitter_period_s: float = 12.0
    timeout_factor: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.5:
            raise PengaugeError("bad-dt", f"dt must be in (0, 0.5], got {self.dt}")


def plant_step(state: RovState, thrust: tuple[float, float], dt: float, y_target: float, cfg: SimConfig) -> RovState:
    """First-order velocity dynamics integrated exactly over one step.

    v tracks u * v_max with time constant tau; the closed-form update keeps
    the discrete trajectory on the continuous response for constant input.
    """
    if not 0.0 < dt <= 0.5:
        raise PengaugeError("bad-dt", f"dt must be in (0, 0.5], got {dt}")
    u_x, u_z = thrust
    decay = math.exp(-dt / cfg.tau)
    pos = state.position.copy()
    vel = state.velocity.copy()
    for axis, u in ((0, u_x), (2, u_z)):
        v_inf = u * cfg.v_max
        v0 = vel[axis]
        vel[axis] = v_inf + (v0 - v_inf) * decay
        pos[axis] += v_inf * dt + (v0 - v_inf) * cfg.tau * (1.0 - decay)
    # passive standoff spring, also integrated exactly
    spring_decay = math.exp(-cfg.spring_rate * dt)
    y0 = pos[1]
    pos[1] = y_target + (y0 - y_target) * spring_decay
    vel[1] = (pos[1] - y0) / dt
    if pos[2] < 0.0:
        pos[2] = 0.0
        vel[2] = max(vel[2], 0.0)
    return RovState(position=pos, velocity=vel, heading=state.heading)


@dataclass(frozen=True)
class SensorConfig:
    sigma_xy: float = 0.15  # m, acoustic fix noise
    sigma_z: float = 0.01  # m, onboard depth sensor
    rate_hz: float = 2.0  # acoustic update rate
    dropout: float = 0.05  # chance an acoustic update is missed (hold last)


class SensorRig:
    """Simulated acoustic xy positioning plus the ROV's own depth sensor.

    xy fixes arrive at rate_hz with dropouts holding the last fix; depth is
    fresh every call. sigma_xy = 0 switches to ideal full-rate xy sensing.
    """

    def __init__(self, cfg: SensorConfig, seed: int = 0):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self._last_xy: np.ndarray | None = None
        self._next_update = 0.0

    def measure(self, true_position: np.ndarray, t: float) -> np.ndarray:
        cfg = self.cfg
        z = true_position[2] + (self.rng.normal(0.0, cfg.sigma_z) if cfg.sigma_z > 0 else 0.0)
        if cfg.sigma_xy == 0.0:
            return np.array([true_position[0], true_position[1], z])
        if t >= self._next_update - 1e-9:
            self._next_update = t + 1.0 / cfg.rate_hz
            dropped = self._last_xy is not None and self.rng.random() < cfg.dropout
            if not dropped:
                noise = self.rng.normal(0.0, cfg.sigma_xy, 2)
                self._last_xy = true_position[[0, 1]] + noise
        return np.array([self._last_xy[0], self._last_xy[1], z])


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    true_position: np.ndarray
    measured_position: np.ndarray
    state: MissionState
    u_x: float
    u_z: float
    capture: bool


@dataclass(frozen=True)
class CaptureEvent:
    t: float
    position: tuple[float, float, float]  # true pose at capture
    velocity: tuple[float, float, float]


@dataclass(frozen=True)
class MissionResult:
    samples: list[TrajectorySample]
    captures: list[CaptureEvent]
    waypoints: list[Waypoint]
    completed: bool
    duration: float
    reason: str = ""


def _polyline(waypoints: list[Waypoint], start: np.ndarray) -> np.ndarray:
    pts = [start[[0, 2]]] + [wp.xz for wp in waypoints]
    return np.stack(pts)


def _turn_waypoints(poly: np.ndarray) -> np.ndarray:
    """Waypoint indices where the path changes direction (plus the final one).

    The carrot reference pauses only at these; gating it at every mid-row
    point would saw-tooth the speed and break the uniform-motion premise.
    """
    n_wp = len(poly) - 1
    turns = []
    for i in range(n_wp):
        if i == n_wp - 1:
            turns.append(i)
            continue
        a = poly[i + 1] - poly[i]
        b = poly[i + 2] - poly[i + 1]
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) > 1e-9 or a @ b < 0:
            turns.append(i)
    return np.array(turns, dtype=int)


def path_length(plan: MissionPlan) -> float:
    wps = generate_lawnmower(plan)
    start = np.array([wps[0].x, plan.standoff, 0.0])
    poly = _polyline(wps, start)
    return float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())


def run_mission(
    plan: MissionPlan,
    gains: PidGains | None = None,
    sim: SimConfig | None = None,
    sensors: SensorConfig | None = None,
    seed: int = 0,
) -> MissionResult:
    """Closed loop on measured position until Done or a 3x-nominal timeout.

    Logs every dt; emits capture events at 1 Hz while in a Transect segment.
    """
    gains = gains or PidGains()
    sim = sim or SimConfig()
    sensors = sensors or SensorConfig()
    wps = generate_lawnmower(plan)
    rig = SensorRig(sensors, seed=seed)

    start_pos = np.array([wps[0].x, plan.standoff, 0.0])
    rov = RovState(position=start_pos, velocity=np.zeros(3))
    poly = _polyline(wps, start_pos)
    seg_len = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    turn_idx = _turn_waypoints(poly)
    turn_set = set(turn_idx.tolist())
    nominal = float(seg_len.sum()) / plan.speed_target
    timeout = sim.timeout_factor * nominal

    pid_x, pid_z = PidMemory(), PidMemory()
    samples: list[TrajectorySample] = []
    captures: list[CaptureEvent] = []
    next_wp = 0
    carrot_seg, carrot_s = 0, 0.0  # segment index + distance along it
    transect_anchor: int | None = None  # step at which the current transect began
    step = 0
    state = MissionState.GO_TO_START

    while True:
        t = step * sim.dt
        meas = rig.measure(rov.position, t)

        next_wp, state, _active = advance_mission_state(next_wp, meas[[0, 2]], wps)
        # mid-row waypoints the carrot has already passed are done markers, not
        # gates: a noisy fix must not strand the mission behind one
        while next_wp < len(wps) and next_wp not in turn_set and carrot_seg > next_wp:
            next_wp += 1
            next_wp, state, _active = advance_mission_state(next_wp, meas[[0, 2]], wps)
        if state is MissionState.DONE:
            samples.append(TrajectorySample(t, rov.position, meas, state, 0.0, 0.0, False))
            return MissionResult(samples, captures, wps, True, t)
        if t >= timeout:
            samples.append(TrajectorySample(t, rov.position, meas, state, 0.0, 0.0, False))
            return MissionResult(samples, captures, wps, False, t, reason="timeout")

        # capture cadence: 1 Hz, anchored to each transect entry
        capture = False
        if state is MissionState.TRANSECT:
            if transect_anchor is None:
                transect_anchor = step
            if (step - transect_anchor) % max(1, round(1.0 / sim.dt)) == 0:
                capture = True
                captures.append(CaptureEvent(t, tuple(rov.position), tuple(rov.velocity)))
        else:
            transect_anchor = None

        # carrot: constant-speed reference along the path, gated by waypoint
        # capture and by the vehicle keeping up
        def carrot_point(seg: int, s: float) -> np.ndarray:
            frac = s / seg_len[seg] if seg_len[seg] > 0 else 1.0
            return poly[seg] * (1 - frac) + poly[seg + 1] * frac

        behind = float(np.linalg.norm(carrot_point(carrot_seg, carrot_s) - meas[[0, 2]]))
        advance = plan.speed_target * sim.dt if behind <= sim.lead_max else 0.0
        # the carrot waits only at uncaptured *turn* waypoints; mid-row points
        # are captured in passing, keeping the transect speed constant
        gate = turn_idx[np.searchsorted(turn_idx, next_wp)]
        max_seg = min(int(gate), len(seg_len) - 1)
        while advance > 0:
            room = seg_len[carrot_seg] - carrot_s
            if advance < room:
                carrot_s += advance
                advance = 0.0
            elif carrot_seg >= max_seg:
                carrot_s = seg_len[carrot_seg]
                break
            else:
                advance -= room
                carrot_seg += 1
                carrot_s = 0.0
        carrot = carrot_point(carrot_seg, carrot_s)
        u_x = pid_step(gains, float(carrot[0] - meas[0]), sim.dt, pid_x, measured=float(meas[0]))
        u_z = pid_step(gains, float(carrot[1] - meas[2]), sim.dt, pid_z, measured=float(meas[2]))
        if sim.jitter_amp > 0:
            u_x = float(np.clip(u_x + sim.jitter_amp * math.sin(2 * math.pi * t / sim.jitter_period_s), -1.0, 1.0))

        samples.append(TrajectorySample(t, rov.position, meas, state, u_x, u_z, capture))
        rov = plant_step(rov, (u_x, u_z), sim.dt, plan.standoff, sim)
        step += 1
