"""Experiment configuration: a flat INI file with one section per module.

Every key has a default, so a normalized config always carries explicit
seeds. ``ExperimentConfig.to_ini`` and ``parse_config`` round-trip exactly.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
import sympy as sp

from .domain import AlmostComplexStructure, Domain, coordinate_symbols
from .fixtures import FIXTURES, get_fixture, polynomial_domain


class ConfigError(ValueError):
    """Bad configuration; ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: Optional[int] = None, path: str = "<config>"):
        self.line = line
        self.path = path
        where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + msg)


@dataclass
class DomainSection:
    fixture: str = "disk"
    rho: str = ""
    n: int = 0
    box: float = 0.0
    collar_eps: float = 0.0
    witness: str = ""
    J: str = "standard"
    J_perturb: str = ""


@dataclass
class RunSection:
    seed: int = 0
    threads: int = 1


@dataclass
class LeviSection:
    grid_res: int = 7


@dataclass
class KobayashiSection:
    samples: int = 500
    refined_samples: int = 2000
    radius: float = 0.95
    k_neighbors: int = 8
    refined_k_neighbors: int = 32
    strategy: str = "oracle"
    C: float = 0.0
    band_points: int = 200
    min_delta: float = 1e-3


@dataclass
class CCSection:
    pairs: int = 10
    symmetry_pairs: int = 3
    rotation_pairs: int = 3
    vertices: str = "9,17,33"
    penalty_weight: float = 1000.0
    restarts: int = 3
    horiz_tol: float = 1e-3
    solver_tol: float = 1e-3
    dp_base: int = 600
    dp_phase_bins: int = 1024


@dataclass
class GMetricSection:
    samples: int = 100
    radius: float = 0.95
    curves: int = 100
    C1: float = 4.0
    C2: float = 1.0


@dataclass
class DMetricSection:
    samples: int = 60
    ring: int = 256
    levels: int = 8
    k_neighbors: int = 16


@dataclass
class DeltaSection:
    samples: int = 100
    csv: str = ""
    mode: str = "exhaustive"
    budget: int = 100_000_000
    control_side: int = 6


@dataclass
class QISection:
    samples: int = 80
    graph_samples: int = 2000
    k_neighbors: int = 32
    radius: float = 0.95


@dataclass
class MorseSection:
    grid_res: int = 24
    restarts: int = 64
    trace_levels: int = 9


SECTIONS = {
    "domain": DomainSection, "run": RunSection, "levi": LeviSection,
    "kobayashi": KobayashiSection, "cc": CCSection, "gmetric": GMetricSection,
    "dmetric": DMetricSection, "delta": DeltaSection, "qi": QISection, "morse": MorseSection,
}


@dataclass
class ExperimentConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    run: RunSection = field(default_factory=RunSection)
    levi: LeviSection = field(default_factory=LeviSection)
    kobayashi: KobayashiSection = field(default_factory=KobayashiSection)
    cc: CCSection = field(default_factory=CCSection)
    gmetric: GMetricSection = field(default_factory=GMetricSection)
    dmetric: DMetricSection = field(default_factory=DMetricSection)
    delta: DeltaSection = field(default_factory=DeltaSection)
    qi: QISection = field(default_factory=QISection)
    morse: MorseSection = field(default_factory=MorseSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_ini(self) -> str:
        out = []
        for name in SECTIONS:
            out.append(f"[{name}]")
            sec = getattr(self, name)
            for f in fields(sec):
                out.append(f"{f.name} = {_format(getattr(sec, f.name))}")
            out.append("")
        return "\n".join(out)

    def build_domain(self) -> Domain:
        return build_domain(self.domain)


def _format(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(typ, raw: str):
    if typ is int or typ == "int":
        return int(raw)
    if typ is float or typ == "float":
        return float(raw)
    return raw


def _line_of(text: str, section: str, key: str) -> Optional[int]:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
            continue
        if cur == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _section_line(text: str, section: str) -> Optional[int]:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*\[{re.escape(section)}\]", line):
            return i
    return None


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str  # keys are case sensitive (C, C1, J)
    try:
        cp.read_string(text, source=path)
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError(f"cannot parse line: {e.errors[0][1].strip() if e.errors else e}", line, path) from None
    except configparser.Error as e:
        raise ConfigError(str(e).splitlines()[0], getattr(e, "lineno", None), path) from None
    cfg = ExperimentConfig()
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]; expected one of {', '.join(SECTIONS)}",
                              _section_line(text, sec), path)
        target = getattr(cfg, sec)
        types = {f.name: f.type for f in fields(target)}
        for key, raw in cp.items(sec):
            if key not in types:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _line_of(text, sec, key), path)
            try:
                setattr(target, key, _convert(types[key], raw.strip()))
            except ValueError:
                raise ConfigError(f"[{sec}] {key} = {raw!r} is not a valid {types[key]}",
                                  _line_of(text, sec, key), path) from None
    try:
        validate(cfg)
    except ConfigError as e:
        if e.line is None and getattr(e, "key", None):
            sec, key = e.key
            raise ConfigError(str(e).split(": ", 1)[1], _line_of(text, sec, key), path) from None
        raise
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", None, path) from None
    return parse_config(text, path)


def _bad(msg: str, section: str, key: str):
    e = ConfigError(msg)
    e.key = (section, key)
    return e


def validate(cfg: ExperimentConfig) -> None:
    d = cfg.domain
    if not d.rho and d.fixture not in FIXTURES:
        raise _bad(f"unknown fixture {d.fixture!r}; choose from {', '.join(FIXTURES)}", "domain", "fixture")
    if d.rho and (d.n < 1 or d.box <= 0 or d.collar_eps <= 0):
        raise _bad("a custom rho needs n >= 1, box > 0 and collar_eps > 0", "domain", "rho")
    if d.J not in ("standard", "perturbed"):
        raise _bad("J must be 'standard' or 'perturbed'", "domain", "J")
    if d.J == "perturbed" and not d.J_perturb:
        raise _bad("J = perturbed needs J_perturb entries", "domain", "J_perturb")
    if d.collar_eps < 0:
        raise _bad("collar_eps must be positive", "domain", "collar_eps")
    for sec, key in (("kobayashi", "samples"), ("gmetric", "samples"), ("dmetric", "samples"),
                     ("qi", "samples"), ("morse", "grid_res"), ("cc", "pairs")):
        if getattr(getattr(cfg, sec), key) < 1:
            raise _bad(f"{key} must be positive", sec, key)
    if cfg.delta.mode not in ("exhaustive", "monte_carlo"):
        raise _bad("mode must be exhaustive or monte_carlo", "delta", "mode")
    if cfg.kobayashi.strategy not in ("oracle", "band_upper", "band_lower", "band_midpoint"):
        raise _bad(f"unknown strategy {cfg.kobayashi.strategy!r}", "kobayashi", "strategy")
    try:
        vs = [int(v) for v in cfg.cc.vertices.split(",")]
    except ValueError:
        raise _bad("vertices must be a comma-separated list of integers", "cc", "vertices") from None
    if any(v < 3 for v in vs) or vs != sorted(vs):
        raise _bad("vertices must be increasing and at least 3", "cc", "vertices")


def _perturbation(n: int, entries_text: str):
    """Entries 'i,j: expr; ...' of A(p) - I as polynomials in x1, y1, ..."""
    syms = coordinate_symbols(n)
    entries = []
    for chunk in filter(None, (c.strip() for c in entries_text.split(";"))):
        try:
            ij, expr = chunk.split(":", 1)
            i, j = (int(v) for v in ij.split(","))
            f = sp.lambdify(syms, sp.sympify(expr), "numpy")
        except (ValueError, sp.SympifyError) as e:
            raise ConfigError(f"bad J_perturb entry {chunk!r}: {e}") from None
        entries.append((i, j, f))

    def perturb(P):
        P = np.asarray(P, float)
        E = np.zeros(P.shape[:-1] + (2 * n, 2 * n))
        cols = [P[..., k] for k in range(2 * n)]
        for i, j, f in entries:
            E[..., i, j] = f(*cols)
        return E

    return perturb


def build_domain(d: DomainSection) -> Domain:
    if not d.rho:
        dom = get_fixture(d.fixture, collar_eps=d.collar_eps or None)
        if d.J == "perturbed":
            dom = dataclasses.replace(dom, J=AlmostComplexStructure.conjugated(
                dom.n, _perturbation(dom.n, d.J_perturb), name="perturbed"), meta={})
        return dom
    J = None
    if d.J == "perturbed":
        J = AlmostComplexStructure.conjugated(d.n, _perturbation(d.n, d.J_perturb), name="perturbed")
    witness = [float(v) for v in d.witness.split(",")] if d.witness else None
    try:
        return polynomial_domain(d.rho, d.n, ([-d.box] * (2 * d.n), [d.box] * (2 * d.n)), d.collar_eps,
                                 witness=witness, J=J, name="custom")
    except (sp.SympifyError, TypeError) as e:
        raise ConfigError(f"cannot build rho: {e}") from None
