"""Flat ``key = value`` experiment configuration.

Keys carry a section prefix and an SI unit suffix, e.g.
``beam.wavelength_m = 1.55e-6``.  Lines starting with ``#`` are comments.
Unknown keys and out-of-range values raise ConfigError naming the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .hg import GridSpec, OpticalMode
from .limits import BeamParams, zero_point_psd, zero_point_psd_resonant
from .mechanics import MechanicalMode, ModeShape, RibbonGeometry, flexural_shape, load_grid_shape, torsion_shape
from .misalignment import MisalignConfig

# key -> (default, kind); kinds: pos (> 0), nonneg (>= 0), frac ((0, 1]), float, int, bool, str
DEFAULTS: dict[str, tuple] = {
    "beam.wavelength_m": (1550e-9, "pos"),
    "beam.waist_m": (150e-6, "pos"),
    "beam.power_w": (2.5e-3, "pos"),
    "ribbon.width_m": (380e-6, "pos"),
    "ribbon.length_m": (7e-3, "pos"),
    "ribbon.thickness_m": (75e-9, "pos"),
    "ribbon.modeshape_file": ("", "str"),
    "mode.frequency_hz": (52.5e3, "pos"),
    "mode.q": (65e6, "pos"),
    "mode.inertia_kg_m2": (2.8e-18, "pos"),
    "mode.temperature_k": (295.0, "pos"),
    "mode.flexural_frequency_hz": (47e3, "pos"),
    "misalign.x_s_m": (0.0, "nonneg"),
    "misalign.w_m": (300e-6, "pos"),
    "misalign.phi_deg": (0.0, "float"),
    "misalign.phi_x_deg": (45.0, "float"),
    "misalign.eta_d": (1.0, "frac"),
    "misalign.eta00": (0.5, "frac"),
    "misalign.eta10": (0.67, "frac"),
    "misalign.sweep_start_m": (0.0, "nonneg"),
    "misalign.sweep_stop_m": (300e-6, "nonneg"),
    "misalign.sweep_points": (13, "int"),
    "misalign.ribbon_model": ("large", "str"),
    "scan.points": (71, "int"),
    "scan.phi_deg": (0.0, "float"),
    "budget.s_imp_rad2_per_hz": (5e-22, "pos"),
    "budget.eta": (0.14, "frac"),
    "budget.zero_point": ("quoted", "str"),
    "budget.s_zp_rad2_per_hz": (9e-20, "pos"),
    "synth.gain_v2_per_rad2": (1e6, "pos"),
    "synth.s_imp_rad2_per_hz": (5e-22, "nonneg"),
    "synth.detector_v2_per_hz": (1e-16, "nonneg"),
    "synth.n_avg": (200, "int"),
    "synth.span_hz": (2000.0, "pos"),
    "synth.bins": (2001, "int"),
    "synth.ringdown_duration_s": (2000.0, "pos"),
    "synth.ringdown_dt_s": (2.0, "pos"),
    "synth.ringdown_noise": (0.0, "nonneg"),
    "synth.knife_noise": (0.01, "nonneg"),
    "synth.knife_points": (61, "int"),
    "synth.coupling_noise": (0.03, "nonneg"),
    "synth.coupling_points": (37, "int"),
    "synth.shot_scatter": (0.02, "nonneg"),
    "numerics.grid_window": (4.0, "pos"),
    "numerics.grid_nodes": (257, "int"),
    "numerics.seed": (0, "int"),
    "numerics.n_boot": (200, "int"),
    "numerics.wing_inner": (2.0, "pos"),
    "numerics.wing_outer": (0.0, "nonneg"),
    "numerics.fit_linewidth": (False, "bool"),
    "numerics.shot_criterion": (1.0, "pos"),
}

CHOICES = {
    "misalign.ribbon_model": ("large", "finite"),
    "budget.zero_point": ("quoted", "as_written", "resonant"),
}

# large-ribbon model: ribbon this many beam waists wide and long (pure tilt)
LARGE_RIBBON = 1000.0


def _coerce(key: str, raw, kind: str):
    if kind == "str":
        value = str(raw).strip()
        if key in CHOICES and value not in CHOICES[key]:
            raise ConfigError(key, f"expected one of {CHOICES[key]}, got {value!r}")
        return value
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(key, f"expected a boolean, got {raw!r}")
    try:
        value = int(raw) if kind == "int" else float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if kind == "int":
        if value < (0 if key == "numerics.seed" or key == "numerics.n_boot" else 2):
            raise ConfigError(key, f"out of range: {value}")
        return value
    if not math.isfinite(value):
        raise ConfigError(key, f"must be finite, got {value}")
    if kind == "pos" and not value > 0:
        raise ConfigError(key, f"must be positive, got {value}")
    if kind == "nonneg" and value < 0:
        raise ConfigError(key, f"must be non-negative, got {value}")
    if kind == "frac" and not 0 < value <= 1:
        raise ConfigError(key, f"must lie in (0, 1], got {value}")
    return value


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (v, _) in DEFAULTS.items()})
    source: str = "<defaults>"

    @classmethod
    def from_mapping(cls, mapping: dict, source: str = "<mapping>") -> "ExperimentConfig":
        cfg = cls(source=source)
        for key, raw in mapping.items():
            cfg.set(key, raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        pairs = {}
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            key, sep, value = s.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}", f"expected 'key = value', got {line.strip()!r}")
            pairs[key.strip()] = value.strip()
        return cls.from_mapping(pairs, str(path))

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown configuration key")
        self.values[key] = _coerce(key, raw, DEFAULTS[key][1])

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        if v["misalign.sweep_stop_m"] < v["misalign.sweep_start_m"]:
            raise ConfigError("misalign.sweep_stop_m", "sweep stop lies below sweep start")
        if v["numerics.wing_outer"] and v["numerics.wing_outer"] <= v["numerics.wing_inner"]:
            raise ConfigError("numerics.wing_outer", "outer wing edge must exceed the inner one")
        if abs(math.cos(math.radians(v["misalign.phi_deg"]))) < 1e-12:
            raise ConfigError("misalign.phi_deg", "a 90 degree receiver rotation leaves no tilt signal")

    def lines(self) -> list[str]:
        return [f"{k} = {v}" for k, v in sorted(self.values.items())]

    # ---- typed views

    def beam(self) -> BeamParams:
        v = self.values
        return BeamParams(v["beam.wavelength_m"], v["beam.waist_m"], v["beam.power_w"])

    def geometry(self) -> RibbonGeometry:
        v = self.values
        return RibbonGeometry(v["ribbon.width_m"], v["ribbon.length_m"], v["ribbon.thickness_m"])

    def shape(self) -> ModeShape:
        """Torsion shape of the configured ribbon, or the gridded file if one is set."""
        path = self.values["ribbon.modeshape_file"]
        return load_grid_shape(path) if path else torsion_shape(self.geometry())

    def misalign_shape(self) -> ModeShape:
        """Shape used by the numeric misalignment model.

        'large' is a torsion ribbon many waists across (a pure tilt, the
        setting of the closed form); 'finite' is the configured ribbon.
        """
        if self.values["misalign.ribbon_model"] == "finite":
            return self.shape()
        side = LARGE_RIBBON * self.values["beam.waist_m"]
        return torsion_shape(RibbonGeometry(side, side, self.values["ribbon.thickness_m"]))

    def mode(self, shape: ModeShape | None = None) -> MechanicalMode:
        v = self.values
        return MechanicalMode(shape, v["mode.frequency_hz"], v["mode.q"], v["mode.inertia_kg_m2"],
                              v["mode.temperature_k"])

    def flexural_mode(self) -> MechanicalMode:
        v = self.values
        return MechanicalMode(flexural_shape(self.geometry()), v["mode.flexural_frequency_hz"], v["mode.q"],
                              v["mode.inertia_kg_m2"], v["mode.temperature_k"])

    def misalign(self, x_s: float | None = None) -> MisalignConfig:
        v = self.values
        return MisalignConfig(v["misalign.x_s_m"] if x_s is None else x_s, v["misalign.w_m"],
                              math.radians(v["misalign.phi_deg"]), math.radians(v["misalign.phi_x_deg"]),
                              v["misalign.eta_d"], v["misalign.eta00"], v["misalign.eta10"])

    def grid(self, mode: OpticalMode) -> GridSpec:
        return GridSpec.centered(mode.center, self.values["numerics.grid_window"] * mode.waist,
                                 self.values["numerics.grid_nodes"])

    def zero_point(self, mode: MechanicalMode) -> float:
        choice = self.values["budget.zero_point"]
        if choice == "as_written":
            return zero_point_psd(mode)
        if choice == "resonant":
            return zero_point_psd_resonant(mode)
        return self.values["budget.s_zp_rad2_per_hz"]

    @property
    def wing_outer(self) -> float | None:
        return self.values["numerics.wing_outer"] or None
