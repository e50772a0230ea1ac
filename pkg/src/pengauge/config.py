"""key=value configuration with section prefixes and environment overrides.

Format: one `section.key = value` per line, `#` comments. Environment
variables override file values with the PENGAUGE_ prefix and dots mapped to
underscores (net.pitch -> PENGAUGE_NET_PITCH).
"""

import os
from pathlib import Path

from .errors import PengaugeError
from .net_geometry import CameraModel, NetSpec
from .rovsim import MissionPlan, PidGains, SensorConfig, SimConfig
from .synthscene import SceneDegradation, SceneSpec

ENV_PREFIX = "PENGAUGE_"

DEFAULTS = {
    "net.pitch": "0.025",
    "net.twine": "0.002",
    "cam.focal_length": "6.0",
    "cam.sensor_width": "4.8",
    "cam.sensor_height": "2.7",
    "cam.image_width": "960",
    "cam.image_height": "540",
    "scene.distance": "1.0",
    "scene.patch_size": "0.25",
    "scene.coverage": "0.0",
    "scene.seed": "0",
    "scene.net_width": "",
    "scene.net_height": "",
    "scene.blur_sigma_px": "0.8",
    "scene.brightness_gradient": "0.25",
    "scene.skew": "0.0",
    "scene.motion_exposure_s": "0.008",
    "plan.x_min": "0.0",
    "plan.x_max": "14.0",
    "plan.z_min": "0.5",
    "plan.z_max": "2.75",
    "plan.n_horizontal": "8",
    "plan.n_vertical": "9",
    "plan.standoff": "1.0",
    "plan.speed_target": "0.15",
    "pid.kp": "0.8",
    "pid.ki": "0.05",
    "pid.kd": "0.2",
    "pid.out_clamp": "1.0",
    "pid.integral_clamp": "0.5",
    "sim.dt": "0.1",
    "sim.v_max": "0.5",
    "sim.tau": "0.5",
    "sim.spring_rate": "0.2",
    "sim.lead_max": "0.6",
    "sim.jitter_amp": "0.0",
    "sim.jitter_period_s": "12.0",
    "sim.timeout_factor": "3.0",
    "sim.seed": "0",
    "sense.sigma_xy": "0.15",
    "sense.sigma_z": "0.01",
    "sense.rate_hz": "2.0",
    "sense.dropout": "0.05",
    "train.colorspace": "lab",
    "train.epochs": "400",
    "train.learning_rate": "3.0",
    "train.threshold": "0.45",
    "train.split_ratio": "0.8",
    "train.seed": "0",
    "label.port": "8787",
    "label.crop_fraction": "1.0",
}


def load_config(path=None, overrides: list[str] | None = None) -> dict[str, str]:
    """Defaults <- file <- PENGAUGE_* environment <- explicit overrides."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise PengaugeError("missing-file", str(path))
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PengaugeError("bad-config", f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            cfg[key.strip()] = value.strip()
    for key in cfg:
        env = ENV_PREFIX + key.upper().replace(".", "_")
        if env in os.environ:
            cfg[key] = os.environ[env]
    for item in overrides or []:
        if "=" not in item:
            raise PengaugeError("bad-config", f"--set {item!r}: expected key=value")
        key, _, value = item.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def _get(cfg, key, cast):
    value = cfg.get(key, DEFAULTS.get(key))
    if value is None:
        raise PengaugeError("missing-key", key)
    try:
        return cast(value)
    except ValueError:
        raise PengaugeError("bad-config", f"{key}={value!r} is not a valid {cast.__name__}")


def get_float(cfg, key) -> float:
    return _get(cfg, key, float)


def get_int(cfg, key) -> int:
    return _get(cfg, key, int)


def get_str(cfg, key) -> str:
    return _get(cfg, key, str)


def get_optional_float(cfg, key) -> float | None:
    value = cfg.get(key, DEFAULTS.get(key, ""))
    return float(value) if value not in ("", None) else None


def net_from(cfg) -> NetSpec:
    return NetSpec(pitch=get_float(cfg, "net.pitch"), twine=get_float(cfg, "net.twine"))


def camera_from(cfg) -> CameraModel:
    return CameraModel(
        focal_length=get_float(cfg, "cam.focal_length"),
        sensor_width=get_float(cfg, "cam.sensor_width"),
        sensor_height=get_float(cfg, "cam.sensor_height"),
        image_width=get_int(cfg, "cam.image_width"),
        image_height=get_int(cfg, "cam.image_height"),
    )


def degradation_from(cfg) -> SceneDegradation:
    return SceneDegradation(
        blur_sigma_px=get_float(cfg, "scene.blur_sigma_px"),
        brightness_gradient=get_float(cfg, "scene.brightness_gradient"),
        skew=get_float(cfg, "scene.skew"),
        motion_exposure_s=get_float(cfg, "scene.motion_exposure_s"),
    )


def scene_from(cfg) -> SceneSpec:
    return SceneSpec(
        net=net_from(cfg),
        cam=camera_from(cfg),
        distance=get_float(cfg, "scene.distance"),
        patch_size=get_float(cfg, "scene.patch_size"),
        target_coverage=get_float(cfg, "scene.coverage"),
        seed=get_int(cfg, "scene.seed"),
        degradation=degradation_from(cfg),
        net_width=get_optional_float(cfg, "scene.net_width"),
        net_height=get_optional_float(cfg, "scene.net_height"),
    )


def plan_from(cfg) -> MissionPlan:
    return MissionPlan(
        x_min=get_float(cfg, "plan.x_min"),
        x_max=get_float(cfg, "plan.x_max"),
        z_min=get_float(cfg, "plan.z_min"),
        z_max=get_float(cfg, "plan.z_max"),
        n_horizontal=get_int(cfg, "plan.n_horizontal"),
        n_vertical=get_int(cfg, "plan.n_vertical"),
        standoff=get_float(cfg, "plan.standoff"),
        speed_target=get_float(cfg, "plan.speed_target"),
    )


def gains_from(cfg) -> PidGains:
    return PidGains(
        kp=get_float(cfg, "pid.kp"),
        ki=get_float(cfg, "pid.ki"),
        kd=get_float(cfg, "pid.kd"),
        out_clamp=get_float(cfg, "pid.out_clamp"),
        integral_clamp=get_float(cfg, "pid.integral_clamp"),
    )


def sim_from(cfg) -> SimConfig:
    return SimConfig(
        dt=get_float(cfg, "sim.dt"),
        v_max=get_float(cfg, "sim.v_max"),
        tau=get_float(cfg, "sim.tau"),
        spring_rate=get_float(cfg, "sim.spring_rate"),
        lead_max=get_float(cfg, "sim.lead_max"),
        jitter_amp=get_float(cfg, "sim.jitter_amp"),
        jitter_period_s=get_float(cfg, "sim.jitter_period_s"),
        timeout_factor=get_float(cfg, "sim.timeout_factor"),
    )


def sensors_from(cfg) -> SensorConfig:
    return SensorConfig(
        sigma_xy=get_float(cfg, "sense.sigma_xy"),
        sigma_z=get_float(cfg, "sense.sigma_z"),
        rate_hz=get_float(cfg, "sense.rate_hz"),
        dropout=get_float(cfg, "sense.dropout"),
    )
