"""INI experiment configuration.

Sections and their defaults::

    [surface]     m1 = 1, m2 = 1
    [grid]        ppw = 10, xmin = -12, xmax = 13
    [cap]         enabled = yes, layer_width = 3, strength = 1, power = 4
    [profile]     xmin = -12, xmax = 13, points = 1001, h = 0.01
    [resolvent]   well = inflection, h_list = 1/40 1/57 1/80 1/113 1/160 1/226 1/320,
                  center, halfwidth, samples (window defaults per well),
                  tol = 1e-8, maxit = 2000, refine = yes
    [quasimode]   h_list = 1/50 1/100 1/200 1/400, alpha_E = 1, beta_E = 1,
                  delta = 0.1, points_per_mu = 100
    [evolution]   k_list = 50 100 200 400, T = 1, dt (default min(0.5/k^2, T/2000)),
                  window_divisor = 10, initial = quasimode | packets,
                  points_per_mu = 10, drain_tol = 1e-12, csv_rows = 2000

Lists are whitespace or comma separated; entries may be fractions like ``1/40``.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .discretize import CapProfile
from .geometry import SurfaceProfile
from .resolvent import WELLS

SECTIONS = ("surface", "grid", "cap", "profile", "resolvent", "quasimode", "evolution")


class ConfigError(ValueError):
    pass


def _number(text: str, key: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: cannot read {text!r} as a number") from None


def _number_list(text: str, key: str):
    items = [t for t in text.replace(",", " ").split() if t]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return [_number(t, key) for t in items]


@dataclass(frozen=True)
class GridSettings:
    ppw: int = 10
    xmin: float = -12.0
    xmax: float = 13.0


@dataclass(frozen=True)
class ProfileSettings:
    xmin: float = -12.0
    xmax: float = 13.0
    points: int = 1001
    h: float = 0.01


@dataclass(frozen=True)
class ResolventSettings:
    well: str = "inflection"
    h_list: tuple = (1 / 40, 1 / 57, 1 / 80, 1 / 113, 1 / 160, 1 / 226, 1 / 320)
    center: float | None = None
    halfwidth: float | None = None
    samples: int | None = None
    tol: float = 1e-8
    maxit: int = 2000
    refine: bool = True


@dataclass(frozen=True)
class QuasimodeSettings:
    h_list: tuple = (1 / 50, 1 / 100, 1 / 200, 1 / 400)
    alpha_E: float = 1.0
    beta_E: float = 1.0
    delta: float = 0.1
    points_per_mu: int = 100


@dataclass(frozen=True)
class EvolutionSettings:
    k_list: tuple = (50, 100, 200, 400)
    T: float = 1.0
    dt: float | None = None
    window_divisor: float = 10.0
    initial: str = "quasimode"
    points_per_mu: int = 10
    drain_tol: float = 1e-12
    csv_rows: int = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    m1: int = 1
    m2: int = 1
    grid: GridSettings = field(default_factory=GridSettings)
    cap: CapProfile | None = field(default_factory=CapProfile)
    profile: ProfileSettings = field(default_factory=ProfileSettings)
    resolvent: ResolventSettings = field(default_factory=ResolventSettings)
    quasimode: QuasimodeSettings | None = field(default_factory=QuasimodeSettings)
    evolution: EvolutionSettings = field(default_factory=EvolutionSettings)

    @property
    def surface(self) -> SurfaceProfile:
        return SurfaceProfile(self.m1, self.m2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cap"] = None if self.cap is None else asdict(self.cap)
        return d

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _take(sec, key, conv, default):
    if sec is None or key not in sec:
        return default
    raw = sec[key]
    name = f"[{sec.name}] {key}"
    if conv is int:
        v = _number(raw, name)
        if v != int(v):
            raise ConfigError(f"{name}: expected an integer, got {raw!r}")
        return int(v)
    if conv is float:
        return _number(raw, name)
    if conv is bool:
        try:
            return sec.getboolean(key)
        except ValueError:
            raise ConfigError(f"{name}: expected yes/no, got {raw!r}") from None
    if conv is tuple:
        return tuple(_number_list(raw, name))
    return raw.strip()


def _known(sec, keys):
    if sec is None:
        return
    extra = set(sec.keys()) - set(keys)
    if extra:
        raise ConfigError(f"[{sec.name}]: unknown keys {sorted(extra)}")


def parse(text: str) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys such as T and alpha_E are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    sec = {name: (cp[name] if cp.has_section(name) else None) for name in SECTIONS}
    try:
        return _build(sec)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _build(sec) -> ExperimentConfig:
    _known(sec["surface"], ("m1", "m2"))
    m1 = _take(sec["surface"], "m1", int, 1)
    m2 = _take(sec["surface"], "m2", int, 1)
    SurfaceProfile(m1, m2)

    d = GridSettings()
    _known(sec["grid"], ("ppw", "xmin", "xmax"))
    grid = GridSettings(_take(sec["grid"], "ppw", int, d.ppw),
                        _take(sec["grid"], "xmin", float, d.xmin),
                        _take(sec["grid"], "xmax", float, d.xmax))
    if not grid.xmin < 0.0 < 1.0 < grid.xmax:
        raise ConfigError("[grid]: domain must contain x = 0 and x = 1")
    if grid.ppw < 8:
        raise ConfigError("[grid] ppw: need at least 8")

    _known(sec["cap"], ("enabled", "layer_width", "strength", "power"))
    dc = CapProfile()
    cap = None
    if _take(sec["cap"], "enabled", bool, True):
        cap = CapProfile(_take(sec["cap"], "layer_width", float, dc.layer_width),
                         _take(sec["cap"], "strength", float, dc.strength),
                         _take(sec["cap"], "power", int, dc.power))

    d = ProfileSettings()
    _known(sec["profile"], ("xmin", "xmax", "points", "h"))
    prof = ProfileSettings(_take(sec["profile"], "xmin", float, d.xmin),
                           _take(sec["profile"], "xmax", float, d.xmax),
                           _take(sec["profile"], "points", int, d.points),
                           _take(sec["profile"], "h", float, d.h))
    if not prof.xmin < prof.xmax or prof.points < 2 or prof.h <= 0:
        raise ConfigError("[profile]: need xmin < xmax, points >= 2 and h > 0")

    d = ResolventSettings()
    s = sec["resolvent"]
    _known(s, ("well", "h_list", "center", "halfwidth", "samples", "tol", "maxit", "refine"))
    res = ResolventSettings(_take(s, "well", str, d.well), _take(s, "h_list", tuple, d.h_list),
                            _take(s, "center", float, None), _take(s, "halfwidth", float, None),
                            _take(s, "samples", int, None), _take(s, "tol", float, d.tol),
                            _take(s, "maxit", int, d.maxit), _take(s, "refine", bool, d.refine))
    if res.well not in WELLS:
        raise ConfigError(f"[resolvent] well: expected one of {WELLS}, got {res.well!r}")
    _check_h_list(res.h_list, "[resolvent] h_list")

    qm = None
    d = QuasimodeSettings()
    s = sec["quasimode"]
    _known(s, ("h_list", "alpha_E", "beta_E", "delta", "points_per_mu"))
    qm = QuasimodeSettings(_take(s, "h_list", tuple, d.h_list),
                           _take(s, "alpha_E", float, d.alpha_E),
                           _take(s, "beta_E", float, d.beta_E),
                           _take(s, "delta", float, d.delta),
                           _take(s, "points_per_mu", int, d.points_per_mu))
    _check_h_list(qm.h_list, "[quasimode] h_list")
    if not 0.0 < qm.delta < 1.0:
        raise ConfigError("[quasimode] delta: must lie in (0, 1)")
    if qm.alpha_E <= 0 or qm.beta_E <= 0:
        raise ConfigError("[quasimode]: alpha_E and beta_E must be positive")
    if qm.points_per_mu < 50:
        raise ConfigError("[quasimode] points_per_mu: need at least 50")

    d = EvolutionSettings()
    s = sec["evolution"]
    _known(s, ("k_list", "T", "dt", "window_divisor", "initial", "points_per_mu",
               "drain_tol", "csv_rows"))
    ks = _take(s, "k_list", tuple, d.k_list)
    if any(k != int(k) or k < 1 for k in ks):
        raise ConfigError("[evolution] k_list: mode numbers must be integers >= 1")
    ev = EvolutionSettings(tuple(int(k) for k in ks), _take(s, "T", float, d.T),
                           _take(s, "dt", float, None),
                           _take(s, "window_divisor", float, d.window_divisor),
                           _take(s, "initial", str, d.initial),
                           _take(s, "points_per_mu", int, d.points_per_mu),
                           _take(s, "drain_tol", float, d.drain_tol),
                           _take(s, "csv_rows", int, d.csv_rows))
    if ev.T <= 0 or ev.window_divisor <= 0:
        raise ConfigError("[evolution]: T and window_divisor must be positive")
    if ev.dt is not None and not 0 < ev.dt <= ev.T:
        raise ConfigError("[evolution] dt: must lie in (0, T]")
    if ev.initial not in ("quasimode", "packets"):
        raise ConfigError("[evolution] initial: expected quasimode or packets")
    if ev.points_per_mu < 1 or ev.csv_rows < 2 or ev.drain_tol < 0:
        raise ConfigError("[evolution]: invalid points_per_mu, csv_rows or drain_tol")

    cfg = ExperimentConfig(m1, m2, grid, cap, prof, res, qm, ev)
    object.__setattr__(cfg, "_sections", frozenset(k for k, v in sec.items() if v is not None))
    return cfg


def _check_h_list(hs, name):
    if any(h <= 0 or h >= 1 for h in hs):
        raise ConfigError(f"{name}: entries must lie in (0, 1)")
    if len(hs) < 3:
        raise ConfigError(f"{name}: need at least 3 values for a fit")


def has_section(cfg: ExperimentConfig, name: str) -> bool:
    """Whether the section appeared in the parsed file (always true for defaults)."""
    sections = getattr(cfg, "_sections", None)
    return True if sections is None else name in sections


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
