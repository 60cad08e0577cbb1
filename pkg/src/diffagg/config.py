"""Scenario files: ``key = value`` lines plus repeated ``[component]`` blocks.

Grammar (one item per line; ``#`` starts a comment)::

    mode = eoc                 # particle | macro | compare | eoc | bound
    preset = initial1          # or give [component] blocks instead
    eta = 1.0
    levels = 1, 2, 3, 4, 5

    [component]
    alpha = 0.5
    beta = 1
    T = 2
    x0 = 0

Keys before the first block belong to the scenario; keys inside a block
belong to that component.  The diffusion coefficient is never given
directly; it is derived as ``a = 2 b eta ||u0||_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from diffagg.errors import ConfigError
from diffagg.sampling import BarenblattComponent, InitialDensity, preset as preset_density

MODES = ("particle", "macro", "compare", "eoc", "bound")


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(",") if s.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


@dataclass
class Scenario:
    mode: str = "macro"
    preset: str | None = None
    components: list[BarenblattComponent] = field(default_factory=list)
    eta: float = 1.0
    b: float = 1.0
    epsilon: float = 1.5
    N: int = 555
    particle_counts: tuple[int, ...] = (50, 100, 200, 400, 800)
    M: int = 100
    dt: float = 0.01
    dx: float = 0.125
    levels: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    reference_level: int = 7
    safety: float = 0.9
    horizon: float = 7.0
    output_times: tuple[float, ...] | None = None
    n_snapshots: int = 8
    seed: int = 0
    output: str = "out"
    threshold: float = 0.3
    pad_sigmas: float = 6.0
    write_trajectories: bool = False
    blowup_factor: float = 10.0
    blowup_window: int = 5000

    _parsers = {
        "mode": str, "preset": str, "eta": float, "b": float, "epsilon": float,
        "N": int, "particle_counts": _ints, "M": int, "dt": float, "dx": float,
        "levels": _ints, "reference_level": int, "safety": float, "horizon": float,
        "output_times": _floats, "n_snapshots": int, "seed": int, "output": str,
        "threshold": float, "pad_sigmas": float, "write_trajectories": _bool,
        "blowup_factor": float, "blowup_window": int,
    }

    def initial(self) -> InitialDensity:
        if self.components:
            return InitialDensity(self.components)
        if self.preset:
            return preset_density(self.preset)
        raise ConfigError("scenario needs a preset or at least one [component] block")

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first violated invariant."""
        if self.mode not in MODES:
            raise ConfigParseError(f"unknown mode {self.mode!r}; expected one of {MODES}", key="mode")
        if self.preset and self.components:
            raise ConfigParseError("give either a preset or [component] blocks, not both", key="preset")
        self.initial()
        checks = [
            ("eta", self.eta >= 0, "eta >= 0"),
            ("b", self.b >= 0, "b >= 0"),
            ("epsilon", self.epsilon > 0, "epsilon > 0"),
            ("N", self.N >= 1, "N >= 1"),
            ("particle_counts", all(n >= 1 for n in self.particle_counts) and self.particle_counts, "particle counts >= 1"),
            ("M", self.M >= 1, "M >= 1"),
            ("dt", self.dt > 0, "dt > 0"),
            ("dx", self.dx > 0, "dx > 0"),
            ("levels", bool(self.levels) and all(lv < self.reference_level for lv in self.levels), "levels < reference_level"),
            ("safety", 0 < self.safety <= 1, "0 < safety <= 1"),
            ("horizon", self.horizon > 0, "horizon > 0"),
            ("n_snapshots", self.n_snapshots >= 1, "n_snapshots >= 1"),
            ("seed", 0 <= self.seed < 2**64, "0 <= seed < 2^64"),
            ("threshold", self.threshold > 0, "threshold > 0"),
            ("pad_sigmas", self.pad_sigmas >= 0, "pad_sigmas >= 0"),
        ]
        for key, ok, rule in checks:
            if not ok:
                raise ConfigParseError(f"invariant {rule} violated (value {getattr(self, key)!r})", key=key)
        if self.output_times is not None:
            ts = self.output_times
            if list(ts) != sorted(ts) or ts[0] < 0 or ts[-1] > self.horizon:
                raise ConfigParseError("invariant 0 <= output_times (sorted) <= horizon violated",
                                       key="output_times")

    def times(self) -> tuple[float, ...]:
        if self.output_times is not None:
            return self.output_times
        return tuple(self.horizon * k / self.n_snapshots for k in range(self.n_snapshots + 1))

    def to_text(self) -> str:
        """Fully resolved scenario text; presets are expanded into component blocks."""
        lines = ["# resolved scenario"]
        for f in fields(self):
            name = f.name
            if name in ("preset", "components") or name.startswith("_"):
                continue
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ", ".join(repr(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{name} = {text}")
        for c in self.initial().components:
            lines += ["", "[component]", f"alpha = {c.alpha!r}", f"beta = {c.beta!r}",
                      f"T = {c.T!r}", f"x0 = {c.x0!r}"]
        return "\n".join(lines) + "\n"


_COMPONENT_KEYS = {"alpha": float, "beta": float, "T": float, "x0": float}


def _build_component(values: dict, line: int) -> BarenblattComponent:
    if "T" not in values:
        raise ConfigParseError("component block is missing T", line=line, key="T")
    if "alpha" not in values:
        raise ConfigParseError("component block is missing alpha", line=line, key="alpha")
    try:
        return BarenblattComponent(**values)
    except ConfigError as exc:
        raise ConfigParseError(str(exc), line=line) from None


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    seen: set[str] = set()
    block: dict | None = None
    block_line = 0
    components = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[component]":
                raise ConfigParseError(f"unknown section {line!r}", line=lineno)
            if block is not None:
                components.append(_build_component(block, block_line))
            block, block_line = {}, lineno
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if block is not None:
            if key not in _COMPONENT_KEYS:
                raise ConfigParseError(f"unknown component key; expected one of {sorted(_COMPONENT_KEYS)}",
                                       line=lineno, key=key)
            try:
                block[key] = _COMPONENT_KEYS[key](value)
            except ValueError:
                raise ConfigParseError(f"cannot parse {value!r}", line=lineno, key=key) from None
            continue
        if key not in Scenario._parsers:
            raise ConfigParseError("unknown key", line=lineno, key=key)
        if key in seen:
            raise ConfigParseError("duplicate key", line=lineno, key=key)
        seen.add(key)
        try:
            parsed = Scenario._parsers[key](value)
        except ValueError:
            raise ConfigParseError(f"cannot parse {value!r}", line=lineno, key=key) from None
        if isinstance(parsed, float) and not math.isfinite(parsed):
            raise ConfigParseError(f"value must be finite, got {value!r}", line=lineno, key=key)
        setattr(sc, key, parsed)
    if block is not None:
        components.append(_build_component(block, block_line))
    sc.components = components
    return sc


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())
