"""Scenario files and sweep definitions.

A scenario is flat ``key = value`` text, one entry per line, ``#`` comments.
Physical values carry their unit in brackets relative to the mass scale m::

    m = 1.0
    E[m] = 1.25
    V0[m] = 3.0
    sigma_x[1/m] = 40

Unknown keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


class ScenarioError(ValueError):
    pass


# key in file -> (attribute, parser)
_KEYS = {
    "m": ("m", float),
    "E[m]": ("E", float),
    "V0[m]": ("V0", float),
    "a2": ("a2", float),
    "sigma_x[1/m]": ("sigma_x", float),
    "dx[1/m]": ("dx", float),
    "dt[1/m]": ("dt", float),
    "cfl_guard": ("cfl_guard", float),
    "smoothing_width[1/m]": ("smoothing_width", float),
    "boundary": ("boundary", str),
    "integrator": ("integrator", str),
    "stencil_order": ("stencil_order", int),
    "n_records": ("n_records", int),
    "absorb_width": ("absorb_width", int),
    "snapshot_every": ("snapshot_every", int),
    "out": ("out", str),
    "snapshots": ("snapshots", str),
}


@dataclass
class Scenario:
    m: float = 1.0
    E: float = 1.25  # in units of m
    V0: float = 3.0  # in units of m
    a2: float = 1.0  # incident intensity |a|^2 used to scale densities
    sigma_x: float = 40.0
    dx: float = 0.05
    dt: float | None = None
    cfl_guard: float = 0.5
    smoothing_width: float = 0.0
    boundary: str = "periodic"
    integrator: str = "RK4"
    stencil_order: int = 4
    n_records: int = 120
    absorb_width: int = 64
    snapshot_every: int | None = None
    out: str | None = None
    snapshots: str | None = None
    source: str | None = field(default=None, compare=False)

    def validate(self) -> "Scenario":
        if not self.m > 0:
            raise ScenarioError(f"m must be positive (got {self.m!r})")
        if not self.E > 1:
            raise ScenarioError(f"E[m] must exceed 1 so the incident particle moves (got {self.E!r})")
        if not self.a2 > 0:
            raise ScenarioError(f"a2 must be positive (got {self.a2!r})")
        for name in ("sigma_x", "dx"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ScenarioError("dt[1/m] must be positive")
        if not 0 < self.cfl_guard < 1:
            raise ScenarioError("cfl_guard must lie in (0, 1)")
        if self.boundary not in ("periodic", "absorbing"):
            raise ScenarioError(f"boundary must be periodic or absorbing (got {self.boundary!r})")
        if self.integrator not in ("RK4", "leapfrog"):
            raise ScenarioError(f"integrator must be RK4 or leapfrog (got {self.integrator!r})")
        if self.stencil_order not in (2, 4):
            raise ScenarioError("stencil_order must be 2 or 4")
        if self.smoothing_width < 0:
            raise ScenarioError("smoothing_width must be >= 0")
        return self

    @property
    def attractive_step(self) -> bool:
        """Attractive steps are accepted but lie outside the discussed setup."""
        return self.V0 < 0


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source or '<scenario>'}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ScenarioError(
                f"{source or '<scenario>'}:{lineno}: unknown key {key!r} "
                f"(known: {', '.join(sorted(_KEYS))})"
            )
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(val)
        except ValueError:
            raise ScenarioError(f"{source or '<scenario>'}:{lineno}: bad value for {key}: {val!r}") from None
        if conv is float and not math.isfinite(values[attr]):
            raise ScenarioError(f"{source or '<scenario>'}:{lineno}: {key} must be finite")
    return Scenario(**values, source=source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e.strerror}") from None
    return parse_scenario(text, source=str(path))


def dump_scenario(sc: Scenario) -> str:
    inv = {attr: key for key, (attr, _) in _KEYS.items()}
    lines = []
    for f in fields(sc):
        v = getattr(sc, f.name)
        if f.name in inv and v is not None:
            lines.append(f"{inv[f.name]} = {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # "V0" or "E"
    lo: float
    hi: float
    steps: int
    E: float = 1.25
    V0: float = 3.0

    def __post_init__(self):
        if self.axis not in ("V0", "E"):
            raise ScenarioError(f"sweep axis must be V0 or E (got {self.axis!r})")
        if not self.lo < self.hi:
            raise ScenarioError(f"sweep range needs lo < hi (got {self.lo}:{self.hi})")
        if self.steps < 2:
            raise ScenarioError("sweep needs at least 2 steps")

    def thresholds(self) -> list[tuple[float, str]]:
        if self.axis == "V0":
            cands = [(self.E - 1.0, "ThresholdLower"), (self.E + 1.0, "ThresholdUpper")]
        else:
            cands = [(self.V0 + 1.0, "ThresholdLower"), (self.V0 - 1.0, "ThresholdUpper")]
        return [(v, tag) for v, tag in cands if self.lo <= v <= self.hi]

    def samples(self) -> list[tuple[float, str]]:
        """Sorted sample values, thresholds merged in, each tagged ('' or threshold name)."""
        base = np.linspace(self.lo, self.hi, self.steps)
        pts = {float(v): "" for v in base}
        for v, tag in self.thresholds():
            tol = 1e-9 * max(1.0, abs(v))
            near = [u for u in pts if abs(u - v) <= tol]
            for u in near:
                del pts[u]
            pts[v] = tag
        return sorted(pts.items())

    def point(self, value: float) -> tuple[float, float]:
        """(E, V0) for a sample value, in units of m."""
        return (self.E, value) if self.axis == "V0" else (value, self.V0)


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(s) for s in text.split(":"))
    except ValueError:
        raise ScenarioError(f"range must look like LO:HI (got {text!r})") from None
    return lo, hi

