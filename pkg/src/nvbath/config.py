"""Plain-text scenario configuration for the command-line experiments.

Sections: [register], [bath], [pulses], [gcce], [experiment], each holding
``key = value`` lines.  Every field has a default except the master seed,
which must be present (in the file or via --seed) so that any emitted
artifact can be replayed exactly.  The resolved configuration has a
canonical text form whose hash is stamped into every output file.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, fields

TARGET_NAMES = ("bell2", "ghz", "bell13c")
REGISTER_KINDS = ("two-qubit", "full")
BATH_KINDS = ("shell", "close-pair")


class ConfigError(Exception):
    """Invalid or missing configuration input."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved experiment description."""

    register: str = "two-qubit"
    r_min_nm: float = 30.0
    r_max_nm: float = 60.0
    densities_ppb: tuple[float, ...] = (65.0,)
    baths_per_density: int = 1
    spin_count_override: int | None = None
    bath_kind: str = "shell"
    n_spectators: int = 4
    order: int = 0
    n_samples: int = 100
    pair_d1_nm: float = 70.0
    pair_d2_nm: float = 60.0
    ratio_floor: float = 1e-10
    enumerate_exact_below: int = 10
    pulse_mode: str = "preset"
    target: str = "bell2"
    segments: int = 4
    budget: int = 40
    fidelity_threshold: float | None = None
    duration_cap_us: float = 25.0
    duration_target_us: float | None = None
    sample_times_us: tuple[float, ...] = ()
    benchmark_time_us: float = 20.0
    bin_width: float = 0.001
    seed: int = 0
    out_path: str = "out.csv"

    def __post_init__(self) -> None:
        if self.register not in REGISTER_KINDS:
            raise ConfigError(f"register must be one of {REGISTER_KINDS}")
        if self.bath_kind not in BATH_KINDS:
            raise ConfigError(f"bath kind must be one of {BATH_KINDS}")
        if self.target not in TARGET_NAMES:
            raise ConfigError(f"target must be one of {TARGET_NAMES}")
        if self.pulse_mode not in ("preset", "optimize"):
            raise ConfigError("pulse mode must be 'preset' or 'optimize'")
        if any(d <= 0 for d in self.densities_ppb):
            raise ConfigError("densities must be positive")
        if not 0 < self.r_min_nm < self.r_max_nm:
            raise ConfigError("need 0 < r_min < r_max")
        if self.baths_per_density < 1:
            raise ConfigError("baths_per_density must be at least 1")

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out_path":  # location does not change the science
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            elif isinstance(v, float):
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _parse_times(text: str) -> tuple[float, ...]:
    """Either 'start:stop:count' (inclusive linear grid) or a comma list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"time grid must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 2:
            raise ConfigError("time grid needs at least 2 points")
        step = (stop - start) / (count - 1)
        return tuple(start + i * step for i in range(count))
    return tuple(float(v) for v in text.split(","))


_SCHEMA = {
    ("register", "kind"): ("register", str),
    ("bath", "r_min_nm"): ("r_min_nm", float),
    ("bath", "r_max_nm"): ("r_max_nm", float),
    ("bath", "densities_ppb"): ("densities_ppb",
                                lambda s: tuple(float(v) for v in s.split(","))),
    ("bath", "baths_per_density"): ("baths_per_density", int),
    ("bath", "spin_count"): ("spin_count_override", int),
    ("bath", "kind"): ("bath_kind", str),
    ("bath", "n_spectators"): ("n_spectators", int),
    ("gcce", "order"): ("order", int),
    ("gcce", "n_samples"): ("n_samples", int),
    ("gcce", "pair_d1_nm"): ("pair_d1_nm", float),
    ("gcce", "pair_d2_nm"): ("pair_d2_nm", float),
    ("gcce", "ratio_floor"): ("ratio_floor", float),
    ("gcce", "enumerate_exact_below"): ("enumerate_exact_below", int),
    ("pulses", "mode"): ("pulse_mode", str),
    ("pulses", "target"): ("target", str),
    ("pulses", "segments"): ("segments", int),
    ("pulses", "budget"): ("budget", int),
    ("pulses", "fidelity_threshold"): ("fidelity_threshold", float),
    ("pulses", "duration_cap_us"): ("duration_cap_us", float),
    ("pulses", "duration_target_us"): ("duration_target_us", float),
    ("experiment", "sample_times_us"): ("sample_times_us", _parse_times),
    ("experiment", "benchmark_time_us"): ("benchmark_time_us", float),
    ("experiment", "bin_width"): ("bin_width", float),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "out"): ("out_path", str),
}


def load_config(path: str, seed_override: int | None = None,
                out_override: str | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    values: dict = {}
    seen_seed = False
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                field_name, conv = _SCHEMA[(section, key)]
            except KeyError:
                raise ConfigError(
                    f"unknown option [{section}] {key} in {path}") from None
            try:
                values[field_name] = conv(raw)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"bad value for [{section}] {key} = {raw!r}: {exc}") from None
            if field_name == "seed":
                seen_seed = True
    if seed_override is not None:
        values["seed"] = int(seed_override)
        seen_seed = True
    if out_override is not None:
        values["out_path"] = out_override
    if not seen_seed:
        raise ConfigError("master seed is mandatory ([experiment] seed or --seed)")
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
