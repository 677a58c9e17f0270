"""Experiment configuration: INI files with one section per concern.

A config names the experiment kind, a geometry (or abstract dimensions),
the truncation and horizon ladders, and the tolerance set.  Parsed
configs are immutable-ish dataclasses whose resolved dictionary is
embedded verbatim in every report for provenance.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from .circle import CircleGeometry
from .errors import ConfigError
from .profiles import ConstantProfile, SmoothStepProfile

EXPERIMENT_KINDS = (
    "index-check",
    "spectral-flow",
    "scattering",
    "egorov-bench",
    "eta",
    "fredholm-abstract",
    "convergence-study",
)

DEFAULT_TOLERANCES = {
    "scattering_tol": 1e-8,
    "rank_tol": 1e-8,
    "residual_tol": 1e-6,
    "form_tol": 1e-6,
    "eta_tol": 1e-6,
}


@dataclass
class GeometrySpec:
    kind: str = "circle"
    alpha: float = 0.5
    c_minus: float = 1.0
    c_plus: float = 1.0
    h_minus: float = 1.0
    h_plus: float = 1.0
    a_minus: float = 0.0
    a_plus: float = 0.0
    delta: float = 2.0
    profile: str = "smooth_step"

    def validate(self) -> None:
        if self.kind != "circle":
            raise ConfigError(f"unsupported geometry kind {self.kind!r}")
        if self.alpha not in (0.0, 0.5):
            raise ConfigError(f"alpha must be 0 or 0.5, got {self.alpha}")
        if self.delta <= 1.0:
            raise ConfigError(f"delta must exceed 1, got {self.delta}")
        if self.profile not in ("smooth_step", "constant"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        for name in ("c_minus", "c_plus", "h_minus", "h_plus"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")

    def _profile(self, lo: float, hi: float):
        if self.profile == "constant" or lo == hi:
            return ConstantProfile(lo)
        return SmoothStepProfile(lo, hi, decay=self.delta)

    def build(self) -> CircleGeometry:
        twist = None
        if self.a_minus != 0.0 or self.a_plus != 0.0:
            twist = self._profile(self.a_minus, self.a_plus)
        return CircleGeometry(
            alpha=self.alpha,
            c=self._profile(self.c_minus, self.c_plus),
            h=self._profile(self.h_minus, self.h_plus),
            twist=twist,
            delta=self.delta,
        )

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "h_minus": self.h_minus,
            "h_plus": self.h_plus,
            "a_minus": self.a_minus,
            "a_plus": self.a_plus,
            "delta": self.delta,
            "profile": self.profile,
        }


def geometry_spec_from_geometry(geom: CircleGeometry) -> GeometrySpec:
    """Serialize a circle geometry back into config keys."""
    from .families import INF

    return GeometrySpec(
        kind="circle",
        alpha=geom.alpha,
        c_minus=float(geom.c(-INF)),
        c_plus=float(geom.c(INF)),
        h_minus=float(geom.h(-INF)),
        h_plus=float(geom.h(INF)),
        a_minus=geom.a(-INF),
        a_plus=geom.a(INF),
        delta=geom.delta,
    )


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    geometry: Optional[GeometrySpec] = None
    truncation_ladder: list = field(default_factory=lambda: [16, 32])
    horizon_ladder: list = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    t_max: float = 64.0
    n_grid_nodes: int = 257
    weight_epsilon: float = 0.05
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    abstract_dims: list = field(default_factory=lambda: [(8, 3, 5), (12, 4, 8)])
    abstract_instances: int = 200
    eta_b_values: list = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.9])
    egorov_t_window: float = 20.0
    egorov_n_t: int = 9
    egorov_chi_width: float = 0.5
    qform_probes: int = 100
    label: str = ""

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}"
            )
        for name, value in self.tolerances.items():
            if value <= 0.0:
                raise ConfigError(f"tolerance {name} must be positive, got {value}")
        if sorted(self.truncation_ladder) != list(self.truncation_ladder) or len(
            set(self.truncation_ladder)
        ) != len(self.truncation_ladder):
            raise ConfigError("truncation ladder must be strictly increasing")
        if sorted(self.horizon_ladder) != list(self.horizon_ladder) or len(
            set(self.horizon_ladder)
        ) != len(self.horizon_ladder):
            raise ConfigError("horizon ladder must be strictly increasing")
        if self.geometry is not None:
            self.geometry.validate()
        needs_geometry = self.kind in (
            "index-check", "spectral-flow", "scattering", "egorov-bench", "convergence-study"
        )
        if needs_geometry and self.geometry is None:
            raise ConfigError(f"experiment kind {self.kind!r} requires a [geometry] section")
        for dims in self.abstract_dims:
            if len(dims) != 3 or dims[0] != dims[1] + dims[2]:
                raise ConfigError(f"abstract dims {dims} must satisfy x = h + y")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "label": self.label,
            "geometry": self.geometry.as_dict() if self.geometry else None,
            "truncation_ladder": list(self.truncation_ladder),
            "horizon_ladder": [float(x) for x in self.horizon_ladder],
            "t_max": self.t_max,
            "n_grid_nodes": self.n_grid_nodes,
            "weight_epsilon": self.weight_epsilon,
            "tolerances": dict(self.tolerances),
            "abstract_dims": [list(d) for d in self.abstract_dims],
            "abstract_instances": self.abstract_instances,
            "eta_b_values": [float(b) for b in self.eta_b_values],
            "egorov_t_window": self.egorov_t_window,
            "egorov_n_t": self.egorov_n_t,
            "egorov_chi_width": self.egorov_chi_width,
            "qform_probes": self.qform_probes,
        }


def _parse_list(text: str, cast):
    items = [x for chunk in text.split(",") for x in chunk.split()]
    return [cast(x) for x in items if x]


def load_config(path, kind: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Parse an INI experiment file; CLI-level kind/seed override the file."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")

    cfg_kind = parser.get("experiment", "kind", fallback=None)
    if kind is not None and cfg_kind is not None and kind != cfg_kind:
        raise ConfigError(f"config kind {cfg_kind!r} conflicts with subcommand {kind!r}")
    final_kind = kind or cfg_kind
    if final_kind is None:
        raise ConfigError("no experiment kind given (config [experiment] kind or subcommand)")

    config = ExperimentConfig(kind=final_kind)
    if parser.has_section("experiment"):
        config.seed = parser.getint("experiment", "seed", fallback=config.seed)
        config.label = parser.get("experiment", "label", fallback=config.label)
    if seed is not None:
        config.seed = seed

    if parser.has_section("geometry"):
        g = GeometrySpec()
        sec = parser["geometry"]
        g.kind = sec.get("kind", g.kind)
        for name in ("alpha", "c_minus", "c_plus", "h_minus", "h_plus",
                     "a_minus", "a_plus", "delta"):
            if name in sec:
                try:
                    setattr(g, name, float(sec[name]))
                except ValueError as exc:
                    raise ConfigError(f"geometry.{name}: {exc}") from exc
        g.profile = sec.get("profile", g.profile)
        config.geometry = g

    if parser.has_section("truncation"):
        config.truncation_ladder = _parse_list(parser.get("truncation", "ladder"), int)
    if parser.has_section("horizons"):
        sec = parser["horizons"]
        if "ladder" in sec:
            config.horizon_ladder = _parse_list(sec["ladder"], float)
        config.t_max = float(sec.get("t_max", config.t_max))
        config.n_grid_nodes = int(sec.get("n_grid_nodes", config.n_grid_nodes))
    if parser.has_section("tolerances"):
        for name in DEFAULT_TOLERANCES:
            if name in parser["tolerances"]:
                try:
                    config.tolerances[name] = float(parser["tolerances"][name])
                except ValueError as exc:
                    raise ConfigError(f"tolerances.{name}: {exc}") from exc
    if parser.has_section("abstract"):
        sec = parser["abstract"]
        if "dims" in sec:
            config.abstract_dims = [
                tuple(int(x) for x in chunk.split())
                for chunk in sec["dims"].split(";") if chunk.strip()
            ]
        config.abstract_instances = int(sec.get("instances", config.abstract_instances))
    if parser.has_section("eta"):
        if "b_values" in parser["eta"]:
            config.eta_b_values = _parse_list(parser.get("eta", "b_values"), float)
    if parser.has_section("egorov"):
        sec = parser["egorov"]
        config.egorov_t_window = float(sec.get("t_window", config.egorov_t_window))
        config.egorov_n_t = int(sec.get("n_t", config.egorov_n_t))
        config.egorov_chi_width = float(sec.get("chi_width", config.egorov_chi_width))
    if parser.has_section("solver"):
        sec = parser["solver"]
        config.weight_epsilon = float(sec.get("weight_epsilon", config.weight_epsilon))
        config.qform_probes = int(sec.get("qform_probes", config.qform_probes))

    config.validate()
    return config
