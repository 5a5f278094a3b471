"""Batch driver: configuration, pipeline, CSV records and run manifest.

Configuration is line-oriented ``key = value`` text; ``#`` starts a
comment.  Recognized keys and their defaults are listed in
:data:`DEFAULTS`.  Grid radii are in Bohr and default to 1e-6/Z and 60/Z.

Subcommands::

    qedmbpt spectrum CONFIG   write the Dirac spectrum table
    qedmbpt pair CONFIG       Coulomb pair energies (table)
    qedmbpt photon CONFIG     one-photon records (CSV)
    qedmbpt report CONFIG     full pipeline: CSV and manifest

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .angular import GAUNT, SCALAR_RETARDATION, COULOMB
from .errors import ConfigError, NoConvergence, QedMbptError
from .pairsolver import (
    CHARGE,
    PairBasis,
    correlated_photon_energy,
    l_tail,
    make_kgrid,
    one_photon_matrix_element,
    pair_model_state,
    solve_coulomb_pair,
)
from .radial import C_LIGHT, build_spectrum, kappa_to_l, make_grid, nvp_filter, write_spectrum

__all__ = [
    "DEFAULTS",
    "RunConfig",
    "StateSpec",
    "ContributionRecord",
    "parse_config",
    "parse_state",
    "run_pipeline",
    "emit_csv",
    "read_csv",
    "write_manifest",
    "main",
]

HARTREE_TO_MICRO = 1e6
CSV_HEADER = ["state", "kind", "dressing", "value_uH", "l_tail_uH", "k_nodes", "iterations"]
CONTRIBUTIONS = ("one-photon", "one-photon-correlated", "coulomb-ladder")

# key -> (default, parser name); None defaults are derived from other keys
DEFAULTS = {
    "Z": (None, "float"),
    "states": ("1s2s 1S, 1s2s 3S", "states"),
    "grid.n": (120, "int"),
    "grid.rmin": (None, "float"),
    "grid.rmax": (None, "float"),
    "c": (C_LIGHT, "float"),
    "l_max": (6, "int"),
    "kgrid.n": (100, "int"),
    "kgrid.k0": (5.0, "float"),
    "gauge": ("coulomb", "gauge"),
    "nvp": (True, "bool"),
    "contributions": ("one-photon, one-photon-correlated, coulomb-ladder", "contributions"),
    "out": ("results.csv", "str"),
    "pair.l_max": (2, "int"),
    "pair.orbitals": (30, "int"),
    "pair.tol": (1e-10, "float"),
    "crossing": (False, "bool"),
    "sector.l_max": (2, "int"),
    "sector.orbitals": (20, "int"),
}

_SPD = "spdfghik"


@dataclass(frozen=True)
class StateSpec:
    """Two-electron reference state: orbitals (n, kappa) and total J."""

    label: str
    a: tuple
    b: tuple
    J: int

    @property
    def parity(self):
        return (-1) ** (kappa_to_l(self.a[1]) + kappa_to_l(self.b[1]))


@dataclass
class RunConfig:
    Z: float
    states: tuple
    N: int
    r_min: float
    r_max: float
    c: float
    l_max: int
    k_nodes: int
    k0: float
    gauge: str
    nvp: bool
    contributions: tuple
    out: str
    pair_l_max: int
    pair_orbitals: int
    pair_tol: float
    crossing: bool
    sector_l_max: int
    sector_orbitals: int
    defaulted: tuple = ()
    source: dict = field(default_factory=dict)

    def canonical(self):
        """Stable text of all parameters (used for hashing and the manifest)."""
        items = [
            ("Z", repr(self.Z)),
            ("states", ", ".join(s.label for s in self.states)),
            ("grid.n", str(self.N)),
            ("grid.rmin", repr(self.r_min)),
            ("grid.rmax", repr(self.r_max)),
            ("c", repr(self.c)),
            ("l_max", str(self.l_max)),
            ("kgrid.n", str(self.k_nodes)),
            ("kgrid.k0", repr(self.k0)),
            ("gauge", self.gauge),
            ("nvp", str(self.nvp).lower()),
            ("contributions", ", ".join(self.contributions)),
            ("out", self.out),
            ("pair.l_max", str(self.pair_l_max)),
            ("pair.orbitals", str(self.pair_orbitals)),
            ("pair.tol", repr(self.pair_tol)),
            ("crossing", str(self.crossing).lower()),
            ("sector.l_max", str(self.sector_l_max)),
            ("sector.orbitals", str(self.sector_orbitals)),
        ]
        return items

    def hash(self, keys=None):
        text = "\n".join(f"{k}={v}" for k, v in self.canonical() if keys is None or k in keys)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ContributionRecord:
    state: str
    kind: str
    dressing: str
    value_uH: float
    l_tail_uH: float
    k_nodes: int
    iterations: int

    def __post_init__(self):
        if not math.isfinite(self.value_uH) or not math.isfinite(self.l_tail_uH):
            raise ValueError(f"non-finite value in record {self}")


# ---------------------------------------------------------------- parsing

_ORB = re.compile(r"(\d+)([spdfghik])(?:(\d+)/2)?")


def _kappa(l, twoj=None):
    if twoj is None:
        return -1 if l == 0 else None
    j = twoj / 2
    if j == l + 0.5:
        return -(l + 1)
    if j == l - 0.5 and l > 0:
        return l
    return None


def parse_state(text):
    """Parse a state label.

    Accepted forms: ``1s2s 1S`` / ``1s2s 3S`` (two s electrons, J = 0 or 1),
    ``1s2 1S`` (a closed shell), or explicit ``1s1/2 2p3/2 J=1``.
    """
    t = text.strip()
    m = re.fullmatch(r"(\d+)s(\d+)s\s+([13])S", t)
    if m:
        n1, n2, mult = int(m.group(1)), int(m.group(2)), m.group(3)
        if n1 == n2:
            raise ValueError(f"use '{n1}s2 1S' for a closed shell")
        return StateSpec(t, (n1, -1), (n2, -1), 0 if mult == "1" else 1)
    m = re.fullmatch(r"(\d+)s2\s+1S", t)
    if m:
        n = int(m.group(1))
        return StateSpec(t, (n, -1), (n, -1), 0)
    m = re.fullmatch(r"(\S+)\s+(\S+)\s+J\s*=\s*(\d+)", t)
    if m:
        orbs = []
        for tok in m.group(1, 2):
            om = _ORB.fullmatch(tok)
            if not om:
                raise ValueError(f"bad orbital {tok!r}")
            n, l = int(om.group(1)), _SPD.index(om.group(2))
            kappa = _kappa(l, int(om.group(3)) if om.group(3) else None)
            if kappa is None or n <= l:
                raise ValueError(f"bad orbital {tok!r}")
            orbs.append((n, kappa))
        return StateSpec(t, orbs[0], orbs[1], int(m.group(3)))
    raise ValueError(f"cannot parse state {text!r}")


def _parse_value(kind, raw):
    if kind == "int":
        if not re.fullmatch(r"[+-]?\d+", raw):
            raise ValueError("expected an integer")
        return int(raw)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("expected a finite number")
        return v
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("expected true or false")
    if kind == "gauge":
        low = raw.lower()
        if low not in ("coulomb", "feynman"):
            raise ValueError("gauge must be coulomb or feynman")
        return low
    if kind == "states":
        items = tuple(parse_state(s) for s in raw.split(",") if s.strip())
        if not items:
            raise ValueError("no states given")
        return items
    if kind == "contributions":
        items = tuple(s.strip().lower() for s in raw.split(",") if s.strip())
        bad = [s for s in items if s not in CONTRIBUTIONS]
        if bad or not items:
            raise ValueError(f"unknown contribution(s) {bad}; choose from {CONTRIBUTIONS}")
        return items
    return raw


def parse_config(text) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError."""
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in values:
            raise ConfigError("duplicate key", line=lineno, key=key)
        try:
            values[key] = _parse_value(DEFAULTS[key][1], raw)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
        lines[key] = lineno
    if "Z" not in values:
        raise ConfigError("Z is required", key="Z")
    defaulted = []
    for key, (default, kind) in DEFAULTS.items():
        if key not in values:
            defaulted.append(key)
            values[key] = _parse_value(kind, default) if isinstance(default, str) else default
    Z = values["Z"]
    if values["grid.rmin"] is None:
        values["grid.rmin"] = 1e-6 / Z if Z > 0 else None
    if values["grid.rmax"] is None:
        values["grid.rmax"] = 60.0 / Z if Z > 0 else None

    def check(cond, key, msg):
        if not cond:
            raise ConfigError(msg, line=lines.get(key), key=key)

    check(0 < Z < values["c"], "Z", "need 0 < Z < c")
    check(20 <= values["grid.n"] <= 2000, "grid.n", "grid.n must be in [20, 2000]")
    check(0 < values["grid.rmin"] < values["grid.rmax"], "grid.rmin", "need 0 < rmin < rmax")
    check(values["c"] > 0, "c", "c must be positive")
    check(0 <= values["l_max"] <= 20, "l_max", "l_max must be in [0, 20]")
    check(20 <= values["kgrid.n"] <= 1000, "kgrid.n", "kgrid.n must be in [20, 1000]")
    check(values["kgrid.k0"] > 0, "kgrid.k0", "kgrid.k0 must be positive")
    check(0 <= values["pair.l_max"] <= 8, "pair.l_max", "pair.l_max must be in [0, 8]")
    check(values["pair.orbitals"] >= 2, "pair.orbitals", "pair.orbitals must be >= 2")
    check(0 < values["pair.tol"] < 1e-3, "pair.tol", "pair.tol must be in (0, 1e-3)")
    check(0 <= values["sector.l_max"] <= 8, "sector.l_max", "sector.l_max must be in [0, 8]")
    check(values["sector.orbitals"] >= 2, "sector.orbitals", "sector.orbitals must be >= 2")
    check(values["nvp"] or values["contributions"] == ("one-photon",), "nvp",
          "negative-energy dressing is only plumbed for the undressed one-photon term")
    for s in values["states"]:
        check(s.J <= 8, "states", f"J too large in {s.label!r}")
    return RunConfig(
        Z=Z, states=values["states"], N=values["grid.n"], r_min=values["grid.rmin"],
        r_max=values["grid.rmax"], c=values["c"], l_max=values["l_max"],
        k_nodes=values["kgrid.n"], k0=values["kgrid.k0"], gauge=values["gauge"],
        nvp=values["nvp"], contributions=values["contributions"], out=values["out"],
        pair_l_max=values["pair.l_max"], pair_orbitals=values["pair.orbitals"],
        pair_tol=values["pair.tol"], crossing=values["crossing"],
        sector_l_max=values["sector.l_max"], sector_orbitals=values["sector.orbitals"],
        defaulted=tuple(defaulted), source=dict(values))


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineLog:
    stages: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def stage(self, name):
        if name not in self.stages:
            self.stages.append(name)


def _needed_kappas(cfg: RunConfig, with_pairs: bool):
    l_top = max(max(kappa_to_l(s.a[1]), kappa_to_l(s.b[1])) for s in cfg.states)
    if with_pairs:
        l_top = max(l_top, cfg.pair_l_max)
        if cfg.crossing:
            l_top = max(l_top, cfg.sector_l_max)
    out = []
    for l in range(l_top + 1):
        out.append(-l - 1)
        if l > 0:
            out.append(l)
    return out


def build_run_spectrum(cfg: RunConfig, with_pairs=True):
    grid = make_grid(cfg.N, cfg.r_min, cfg.r_max)
    spec = build_spectrum(cfg.Z, _needed_kappas(cfg, with_pairs), grid, cfg.c)
    return grid, nvp_filter(spec, not cfg.nvp)


def _stage_error(stage, exc):
    exc.stage_name = stage
    return exc


def _one_photon_records(cfg, spectrum, state, kgrid):
    grid = spectrum.grid
    a = spectrum.orbital(*state.a)
    b = spectrum.orbital(*state.b)
    E = a.energy + b.energy
    if state.a == state.b:
        comps = [((a, b), 1.0)]
    else:
        eta = -1.0 if int(round(a.j + b.j - state.J)) % 2 else 1.0
        s = 1.0 / math.sqrt(2.0)
        comps = [((a, b), s), ((b, a), -eta * s)]
    kinds = (GAUNT, SCALAR_RETARDATION) if cfg.gauge == "coulomb" else (CHARGE, GAUNT)
    records = []
    for kind in kinds:
        # cumulative sums over photon multipoles, differenced into increments
        cumulative = [0.0]
        for l in range(cfg.l_max + 1):
            val = 0.0
            for (r, s_), cb in comps:
                for (t, u), ck in comps:
                    val += cb * ck * one_photon_matrix_element(
                        r, s_, t, u, state.J, E, grid, kgrid, l, gauge=cfg.gauge,
                        kinds=(kind,), c=cfg.c)
            cumulative.append(val * HARTREE_TO_MICRO)
        per_l = np.diff(cumulative)
        records.append(ContributionRecord(state.label, kind, "none", cumulative[-1],
                                          l_tail(per_l), kgrid.n, 0))
    return records


def run_pipeline(cfg: RunConfig, log: PipelineLog = None):
    """Records for every requested (state, kind, dressing) cell."""
    log = log if log is not None else PipelineLog()
    want = set(cfg.contributions)
    need_pairs = bool(want & {"one-photon-correlated", "coulomb-ladder"})
    need_k = bool(want & {"one-photon", "one-photon-correlated"})
    try:
        log.stage("spectrum")
        grid, spectrum = build_run_spectrum(cfg, need_pairs)
    except QedMbptError as exc:
        raise _stage_error("spectrum", exc)
    kgrid = None
    if need_k:
        log.stage("kgrid")
        kgrid = make_kgrid(cfg.k_nodes, cfg.k0)
    if "one-photon-correlated" in want and cfg.gauge != "coulomb":
        raise _stage_error("config", ConfigError(
            "correlated photon energies are computed in the Coulomb gauge only", key="gauge"))
    records = []
    for state in cfg.states:
        pf = None
        if need_pairs:
            try:
                log.stage("pair")
                basis = PairBasis(spectrum, state.J, state.parity, l_max=cfg.pair_l_max,
                                  n_orbitals=cfg.pair_orbitals)
                model = pair_model_state(basis, state.a, state.b)
                pf = solve_coulomb_pair(basis, model, tol=cfg.pair_tol)
            except QedMbptError as exc:
                raise _stage_error("pair", exc)
            if "coulomb-ladder" in want:
                records.append(ContributionRecord(state.label, COULOMB, "ladder",
                                                  pf.veff * HARTREE_TO_MICRO, 0.0, 0,
                                                  pf.iterations))
        if "one-photon" in want:
            log.stage("one-photon")
            records.extend(_one_photon_records(cfg, spectrum, state, kgrid))
        if "one-photon-correlated" in want:
            log.stage("photon-correlated")
            variants = [("coulomb-noncrossing", False)]
            if cfg.crossing:
                log.stage("photon-sector")
                variants.append(("coulomb-crossing", True))
            for dressing, crossing in variants:
                _, parts = correlated_photon_energy(
                    pf, kgrid, cfg.l_max, crossing=crossing, sector_l_max=cfg.sector_l_max,
                    sector_orbitals=cfg.sector_orbitals, by_term=True)
                for kind in (GAUNT, SCALAR_RETARDATION):
                    per_l = [parts.get((kind, l), 0.0) * HARTREE_TO_MICRO
                             for l in range(cfg.l_max + 1)]
                    records.append(ContributionRecord(state.label, kind, dressing,
                                                      float(np.sum(per_l)), l_tail(per_l),
                                                      kgrid.n, pf.iterations))
    return records


# ---------------------------------------------------------------- output

def _fmt(x):
    return f"{x:.6g}"


def emit_csv(records, path):
    """Write records as CSV (UTF-8, LF); an empty list writes nothing."""
    if not records:
        raise ValueError("no records to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.state, r.kind, r.dressing, _fmt(r.value_uH), _fmt(r.l_tail_uH),
                    str(r.k_nodes), str(r.iterations)])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("not a results file")
    return [ContributionRecord(r[0], r[1], r[2], float(r[3]), float(r[4]), int(r[5]), int(r[6]))
            for r in rows[1:]]


def manifest_text(cfg: RunConfig, log: PipelineLog, grid=None):
    lines = [f"qedmbpt {__version__}", f"config_hash = {cfg.hash()}", "", "[parameters]"]
    for key, val in cfg.canonical():
        mark = "  # default" if key in cfg.defaulted else ""
        lines.append(f"{key} = {val}{mark}")
    lines += ["", "[constants]",
              "hartree_to_microhartree = 1e6",
              "photon_prefactor = c/pi",
              "k_map = k0 (1 + t) / (1 - t)"]
    if grid is not None:
        lines += ["", "[grid]", f"h = {grid.h!r}"]
    lines += ["", "[stages]"] + [f"{s}" for s in log.stages]
    return "\n".join(lines) + "\n"


def write_manifest(path, cfg, log, grid=None):
    Path(path).write_bytes(manifest_text(cfg, log, grid).encode("utf-8"))


# ---------------------------------------------------------------- command line

def _load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    return parse_config(text)


class _IoFailure(Exception):
    pass


def _cmd_spectrum(cfg, args):
    grid, spectrum = build_run_spectrum(cfg, True)
    out = Path(args.output or f"spectrum-{cfg.hash(['Z', 'grid.n', 'grid.rmin', 'grid.rmax', 'c'])}.txt")
    write_spectrum(spectrum, out)
    print(out)


def _cmd_pair(cfg, args):
    _, spectrum = build_run_spectrum(cfg, True)
    lines = ["state J E0_hartree E_hartree V_eff_hartree iterations residual"]
    for st in cfg.states:
        basis = PairBasis(spectrum, st.J, st.parity, l_max=cfg.pair_l_max,
                          n_orbitals=cfg.pair_orbitals)
        pf = solve_coulomb_pair(basis, pair_model_state(basis, st.a, st.b), tol=cfg.pair_tol)
        lines.append(f"{st.label.replace(' ', '_')} {st.J} {pf.energy0:.12e} {pf.energy:.12e} "
                     f"{pf.veff:.12e} {pf.iterations} {pf.residual:.3e}")
    text = "\n".join(lines) + "\n"
    out = Path(args.output or f"pair-{cfg.hash()}.txt")
    out.write_bytes(text.encode("utf-8"))
    print(out)


def _cmd_photon(cfg, args):
    cfg.contributions = tuple(c for c in cfg.contributions if c != "coulomb-ladder") or (
        "one-photon",)
    records = run_pipeline(cfg)
    emit_csv(records, args.output or cfg.out)
    print(args.output or cfg.out)


def _cmd_report(cfg, args):
    log = PipelineLog()
    records = run_pipeline(cfg, log)
    out = Path(args.output or cfg.out)
    emit_csv(records, out)
    grid = make_grid(cfg.N, cfg.r_min, cfg.r_max)
    write_manifest(out.with_suffix(".manifest.txt"), cfg, log, grid)
    for r in records:
        print(f"{r.state:>10s}  {r.kind:<18s} {r.dressing:<20s} {r.value_uH:12.4f} uH")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="qedmbpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "pair", "photon", "report"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("-o", "--output", default=None)
    args = parser.parse_args(argv)
    handlers = {"spectrum": _cmd_spectrum, "pair": _cmd_pair, "photon": _cmd_photon,
                "report": _cmd_report}
    try:
        cfg = _load(args.config)
        handlers[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NoConvergence as exc:
        print(f"convergence failure in {getattr(exc, 'stage_name', exc.stage)}: {exc}",
              file=sys.stderr)
        return 3
    except (_IoFailure, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
