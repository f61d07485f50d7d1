"""Batch command line: config parsing, pipelines, JSON reports and CSV plot data.

Config grammar: one ``key = value`` per line, dotted keys, ``#`` comments,
lists as comma-separated values.  Example::

    system.masses = 1, 1, 1
    system.alpha = 1
    mode = parabolic
    cc.guess = equilateral
    trajectory.kind = homothetic

Exit codes: 0 success, 2 config error, 3 hypothesis violation ([BS] or
BND fails), 4 numerical non-convergence.
"""

import configparser
import csv
import json
import math
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .config_space import MassSystem
from .forms import (H_from_blocks, assemble_coefficients, assemble_hamiltonian, limit_blocks, limit_spectra,
                    write_coefficients)
from .maslov import MaslovError, crossing_table
from .mcgehee import (TrajectoryError, constants, homothetic_parabolic, ingest_trajectory, integrate_homothetic,
                      random_orthogonal_direction, synthetic_perturbation, validate_trajectory, write_trajectory)
from .morse import Discretization, HypothesisError, default_discretization, spectral_index, verify_index_theorem
from .potential import (CollisionError, ConvergenceError, cc_to_record, check_bs, find_central_configuration,
                        guess_configuration, load_cc)
from .symplectic import NotHyperbolicError, PropagationError, hyperbolic_splitting, transversality_margin

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4

MODES = ("collision", "parabolic")
TRAJECTORY_KINDS = ("homothetic", "integrate", "ingest", "synthetic")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _bool(v):
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _auto_float(v):
    return None if v.strip().lower() in ("", "auto", "none") else float(v)


def _auto_int(v):
    return None if v.strip().lower() in ("", "auto", "none") else int(v)


def _opt_str(v):
    v = v.strip()
    return v or None


# key -> (parser, default, documented range)
SCHEMA = {
    "system.masses": (_floats, None, "positive numbers, at least 2"),
    "system.d": (int, 2, "integer >= 2"),
    "system.alpha": (float, 1.0, "(0,2)"),
    "mode": (str, "parabolic", "collision | parabolic"),
    "cc.guess": (str, "collinear", "collinear | polygon | equilateral | random:<seed>"),
    "cc.file": (_opt_str, None, "existing CC record"),
    "trajectory.kind": (str, "homothetic", "homothetic | integrate | ingest | synthetic"),
    "trajectory.tau_max": (float, 40.0, "> 0"),
    "trajectory.samples": (int, 2001, ">= 2"),
    "trajectory.h": (float, 0.0, "real"),
    "trajectory.t_span": (_floats, (0.0, 50.0), "two increasing times"),
    "trajectory.path": (_opt_str, None, "existing trajectory CSV"),
    "trajectory.eps": (float, 0.1, "[0,1)"),
    "trajectory.lambda": (float, 0.5, "> 0"),
    "trajectory.seed": (int, 0, "integer"),
    "numerics.L": (_auto_float, None, "> 0 or auto"),
    "numerics.mesh": (_auto_int, None, ">= 16 or auto"),
    "numerics.tau_far": (_auto_float, None, "> 0 or auto"),
    "numerics.step": (float, 0.02, "(0,1]"),
    "numerics.sigma_samples": (int, 65, ">= 9"),
    "numerics.cc_tol": (float, 1e-10, "(0,1e-6]"),
    "outputs.report": (_opt_str, None, "file path"),
    "outputs.plot_dir": (_opt_str, None, "directory path"),
    "scan.index": (int, 1, "valid particle index"),
    "scan.min": (float, 5.0, "> 0"),
    "scan.max": (float, 9.0, "> scan.min"),
    "scan.points": (int, 17, ">= 2"),
    "scan.tol": (float, 1e-4, "> 0"),
    "scan.indices": (_bool, True, "boolean"),
    "scan.workers": (int, 1, ">= 1"),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to its parsed value."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def system(self) -> MassSystem:
        return MassSystem(self["system.masses"], self["system.d"], self["system.alpha"])

    def echo(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}


def parse_config_text(text: str) -> dict:
    """Raw ``key -> string`` map from the flat dotted-key format."""
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config: cannot parse ({exc})") from None
    return dict(cp["run"])


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def build_config(raw: dict, base_dir: Optional[Path] = None, need_system: bool = True) -> RunConfig:
    """Parse and validate; every error names the field path and the valid range."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key (known keys: {', '.join(sorted(SCHEMA))})")
    vals = {}
    for key, (parse, default, rng) in SCHEMA.items():
        if key in raw:
            try:
                vals[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r} ({exc}); valid: {rng}") from None
        else:
            vals[key] = default
    if not need_system and vals["system.masses"] is None:
        vals["system.masses"] = (1.0, 1.0, 1.0)
    _check(vals["system.masses"] is not None, "system.masses", "required (comma-separated positive numbers)")
    m = vals["system.masses"]
    _check(len(m) >= 2 and all(math.isfinite(x) and x > 0 for x in m), "system.masses",
           f"must be at least 2 positive numbers, got {list(m)}")
    _check(vals["system.d"] >= 2, "system.d", f"must be an integer >= 2, got {vals['system.d']}")
    a = vals["system.alpha"]
    _check(0.0 < a < 2.0, "system.alpha", f"must lie in the open interval (0,2), got {a}")
    _check(vals["mode"] in MODES, "mode", f"must be one of {' | '.join(MODES)}, got {vals['mode']!r}")
    _check(vals["trajectory.kind"] in TRAJECTORY_KINDS, "trajectory.kind",
           f"must be one of {' | '.join(TRAJECTORY_KINDS)}, got {vals['trajectory.kind']!r}")
    _check(vals["trajectory.tau_max"] > 0, "trajectory.tau_max", "must be > 0")
    _check(vals["trajectory.samples"] >= 2, "trajectory.samples", "must be >= 2")
    ts = vals["trajectory.t_span"]
    _check(len(ts) == 2 and ts[1] > ts[0], "trajectory.t_span", f"must be two increasing times, got {list(ts)}")
    _check(0.0 <= vals["trajectory.eps"] < 1.0, "trajectory.eps",
           f"must lie in [0,1), got {vals['trajectory.eps']}")
    _check(vals["trajectory.lambda"] > 0, "trajectory.lambda", "must be > 0")
    if vals["numerics.L"] is not None:
        _check(vals["numerics.L"] > 0, "numerics.L", "must be > 0 or auto")
    if vals["numerics.mesh"] is not None:
        _check(vals["numerics.mesh"] >= 16, "numerics.mesh", "must be >= 16 or auto")
    if vals["numerics.tau_far"] is not None:
        _check(vals["numerics.tau_far"] > 0, "numerics.tau_far", "must be > 0 or auto")
    _check(0 < vals["numerics.step"] <= 1, "numerics.step", "must lie in (0,1]")
    _check(vals["numerics.sigma_samples"] >= 9, "numerics.sigma_samples", "must be >= 9")
    _check(0 < vals["numerics.cc_tol"] <= 1e-6, "numerics.cc_tol", "must lie in (0,1e-6]")
    _check(0 <= vals["scan.index"] < len(m), "scan.index", f"must lie in [0,{len(m) - 1}]")
    _check(vals["scan.min"] > 0, "scan.min", "must be > 0")
    _check(vals["scan.max"] > vals["scan.min"], "scan.max", "must exceed scan.min")
    _check(vals["scan.points"] >= 2, "scan.points", "must be >= 2")
    _check(vals["scan.tol"] > 0, "scan.tol", "must be > 0")
    _check(vals["scan.workers"] >= 1, "scan.workers", "must be >= 1")
    for key in ("cc.file", "trajectory.path"):
        if vals[key] is not None:
            p = Path(vals[key])
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            _check(p.is_file(), key, f"file not found: {p}")
            vals[key] = str(p)
    if vals["trajectory.kind"] == "ingest":
        _check(vals["trajectory.path"] is not None, "trajectory.path", "required when trajectory.kind = ingest")
    if vals["trajectory.kind"] == "integrate" and vals["mode"] == "parabolic":
        _check(vals["trajectory.h"] == 0.0, "trajectory.h", "parabolic mode needs zero energy")
    return RunConfig(vals)


def load_config(path: Optional[str], overrides=(), need_system: bool = True) -> RunConfig:
    raw = {}
    base = None
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"--config: file not found: {p}")
        raw = parse_config_text(p.read_text(encoding="utf-8"))
        base = p.parent
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    return build_config(raw, base, need_system)


# pipelines -------------------------------------------------------------------

class Warnings:
    """Collects (code, message) pairs in insertion order."""

    def __init__(self):
        self.items = []

    def add(self, code: str, message: str):
        self.items.append({"code": code, "message": message})

    def as_list(self):
        return list(self.items)


def _central_configuration(cfg: RunConfig, sys=None):
    sys = cfg.system() if sys is None else sys
    if cfg["cc.file"] is not None:
        cc = load_cc(cfg["cc.file"], tol=cfg["numerics.cc_tol"])
        if cc.system != sys:
            raise ConfigError(f"cc.file: record is for {cc.system}, config describes {sys}")
        return sys, cc
    try:
        guess = guess_configuration(sys, cfg["cc.guess"])
    except ValueError as exc:
        raise ConfigError(f"cc.guess: {exc}") from None
    return sys, find_central_configuration(sys, guess, tol=cfg["numerics.cc_tol"])


def _cc_summary(cc) -> dict:
    return {"u_value": cc.u_value, "mu1": cc.mu1, "bs_margin": cc.bs_margin, "residual": cc.residual,
            "kernel_dim": cc.kernel_dim}


def _trajectory(cfg: RunConfig, sys, cc, warn: Warnings):
    kind, mode = cfg["trajectory.kind"], cfg["mode"]
    if kind == "homothetic":
        traj = homothetic_parabolic(sys, cc, cfg["trajectory.tau_max"], cfg["trajectory.samples"], mode=mode)
    elif kind == "integrate":
        traj = integrate_homothetic(sys, cc, cfg["trajectory.h"], tuple(cfg["trajectory.t_span"]), mode=mode,
                                    n_samples=cfg["trajectory.samples"])
    elif kind == "synthetic":
        k = constants(sys, cc, mode)
        w = random_orthogonal_direction(cc.s0, cfg["trajectory.seed"])
        traj = synthetic_perturbation(cc, k, cfg["trajectory.eps"], cfg["trajectory.lambda"], w,
                                      cfg["trajectory.tau_max"], cfg["trajectory.samples"])
    else:
        traj = ingest_trajectory(cfg["trajectory.path"])
        if traj.N != sys.N:
            raise ConfigError(f"trajectory.path: chart dimension {traj.N} does not match the system ({sys.N})")
        if traj.mode != mode:
            warn.add("TRAJECTORY_MODE_OVERRIDE", f"file declares mode {traj.mode}, used as is")
    for row, msg in validate_trajectory(traj, strict_energy=False):
        warn.add("TRAJECTORY_INVARIANT", f"row {row}: {msg}")
    return traj


def _discretization(cfg: RunConfig, coeff, delta_tilde):
    d = default_discretization(coeff, delta_tilde)
    L = cfg["numerics.L"] if cfg["numerics.L"] is not None else d.L
    mesh = cfg["numerics.mesh"] if cfg["numerics.mesh"] is not None else max(16, int(math.ceil(L / d.h)))
    return Discretization(L, mesh)


def limit_summary(sys, cc, mode: str) -> dict:
    k = constants(sys, cc, mode)
    lim = limit_blocks(sys, cc, k)
    H = H_from_blocks(lim.P0, lim.Q0, lim.R_tilde0)
    ev = np.linalg.eigvals(H)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    split = hyperbolic_splitting(H)
    out = {"constants": k.as_dict(), "spectra": limit_spectra(sys, cc, k).as_dict(),
           "H_star_eigenvalues": [[float(z.real), float(z.imag)] for z in ev],
           "hyperbolic": bool(split.exists)}
    if split.exists:
        m = transversality_margin(split.stable)
        out["bnd_limit_margin"] = m
        out["bnd_limit_transversal"] = bool(m > 1e-8)
    else:
        out["hyperbolic_reason"] = split.reason
    return out


def cmd_cc(cfg: RunConfig) -> dict:
    _, cc = _central_configuration(cfg)
    return {"config": cfg.echo(), "cc": cc_to_record(cc), "warnings": []}


def cmd_bs(cfg: RunConfig) -> dict:
    _, cc = _central_configuration(cfg)
    bs = check_bs(cc)
    warn = Warnings()
    if bs.degenerate:
        warn.add("BS_DEGENERATE", f"margin {bs.margin:.3e} within tolerance of zero")
    return {"config": cfg.echo(), "cc": _cc_summary(cc), "bs": bs.as_dict(), "warnings": warn.as_list()}


def cmd_limit(cfg: RunConfig) -> dict:
    sys, cc = _central_configuration(cfg)
    warn = Warnings()
    lim = limit_summary(sys, cc, cfg["mode"])
    if not lim["hyperbolic"]:
        warn.add("NOT_HYPERBOLIC", lim["hyperbolic_reason"])
    return {"config": cfg.echo(), "cc": _cc_summary(cc), "bs": check_bs(cc).as_dict(), "limit": lim,
            "warnings": warn.as_list()}


def cmd_trajectory(cfg: RunConfig, plot_dir: Optional[Path] = None) -> dict:
    sys, cc = _central_configuration(cfg)
    warn = Warnings()
    traj = _trajectory(cfg, sys, cc, warn)
    coeff = assemble_coefficients(sys, cc, traj)
    d = coeff.distance_to_limit()
    if plot_dir is not None:
        write_trajectory(traj, plot_dir / "trajectory.csv")
        write_coefficients(coeff, plot_dir / "coefficients.csv")
    return {"config": cfg.echo(), "cc": _cc_summary(cc),
            "trajectory": {"source": traj.source,
                           "mode": traj.mode, "samples": int(traj.grid.size), "tau_max": traj.tau_max,
                           "energy_h": traj.energy_h, "final_distance_to_limit": float(d[-1])},
            "warnings": warn.as_list()}


def _flagged(value, stable):
    return {"value": value, "stable": bool(stable)}


def cmd_index(cfg: RunConfig, plot_dir: Optional[Path] = None) -> dict:
    sys, cc = _central_configuration(cfg)
    warn = Warnings()
    bs = check_bs(cc)
    lim = limit_summary(sys, cc, cfg["mode"])
    if not bs.holds:
        raise HypothesisError(f"[BS] fails (margin {bs.margin:.6g}); run 'bs' or 'limit' for details")
    traj = _trajectory(cfg, sys, cc, warn)
    k = constants(sys, cc, traj.mode)
    coeff = assemble_coefficients(sys, cc, traj)
    disc = _discretization(cfg, coeff, k.delta_tilde)
    rep = verify_index_theorem(sys, cc, traj, disc, cfg["numerics.step"], cfg["numerics.sigma_samples"],
                               tau_far=cfg["numerics.tau_far"])
    for w in rep.morse.warnings:
        warn.add(w, "spectral index")
    geo = rep.details["geometric"]["maslov"]
    spm = rep.details["sigma_path"]["maslov"]
    for name, res in (("geometric", geo), ("sigma-path", spm)):
        if res["method"] != "crossing-form":
            warn.add("MASLOV_FALLBACK", f"{name} Maslov index used {res['method']}")
    if rep.details["spectral_flow"].get("enlarged"):
        warn.add("SIGMA0_ENLARGED", "sigma0 enlarged until the operator became positive")
    if not rep.chain_holds:
        warn.add("INDEX_CHAIN_MISMATCH", ", ".join(rep.mismatches))
    if not all(rep.rectangle.values()):
        warn.add("RECTANGLE_EDGE", json.dumps(rep.rectangle, sort_keys=True))
    st = rep.stability
    sf = rep.details["spectral_flow"]
    indices = {
        "iota_spec": _flagged(rep.iota_spec, st["morse_stable"]),
        "iota_geo": _flagged(rep.iota_geo, geo["reliable"]),
        "sf_sigma": _flagged(rep.sf_sigma, st["sf_monotone"] and st["sf_endpoint_identity"]),
        "sigma_path_maslov": _flagged(rep.sigma_path_maslov, spm["reliable"] and all(rep.rectangle.values())),
    }
    crossings = {"geometric": geo["crossings"], "sigma_path": spm["crossings"]}
    if plot_dir is not None:
        _write_csv(plot_dir / "spectrum_head.csv", ["k", "eigenvalue"],
                   [[i, v] for i, v in enumerate(rep.morse.as_dict()["spectrum_head"])])
        _write_csv(plot_dir / "crossings.csv", ["path", "location", "kernel_dim", "signature", "n_plus", "n_minus"],
                   [[name, c["location"], c["kernel_dim"], c["signature"], c["n_plus"], c["n_minus"]]
                    for name, cs in crossings.items() for c in cs])
        write_coefficients(coeff, plot_dir / "coefficients.csv")
    return {"config": cfg.echo(), "cc": _cc_summary(cc), "constants": k.as_dict(), "limit": lim,
            "bnd": rep.bnd, "indices": indices, "chain_holds": rep.chain_holds, "sigma0": rep.sigma0,
            "crossing_table": crossings, "stability": st, "rectangle": rep.rectangle,
            "discretization": {"L": disc.L, "mesh": disc.mesh}, "morse": rep.morse.as_dict(),
            "spectral_flow": sf, "warnings": warn.as_list()}


# scan ------------------------------------------------------------------------

def _scan_system(cfg, value):
    m = list(cfg["system.masses"])
    m[cfg["scan.index"]] = float(value)
    return MassSystem(tuple(m), cfg["system.d"], cfg["system.alpha"])


def _scan_flags(cfg, value):
    sys, cc = _central_configuration(cfg, _scan_system(cfg, value))
    split = hyperbolic_splitting(H_from_blocks(*_limit_triple(sys, cc, cfg["mode"])))
    return cc, bool(split.exists)


def _limit_triple(sys, cc, mode):
    lim = limit_blocks(sys, cc, constants(sys, cc, mode))
    return lim.P0, lim.Q0, lim.R_tilde0


def _scan_point(args):
    cfg, value = args
    cc, hyp = _scan_flags(cfg, value)
    row = {"m": float(value), "bs_margin": float(cc.bs_margin), "hyperbolic": hyp, "iota_spec": "", "iota_geo": ""}
    if not cfg["scan.indices"]:
        return row
    sys = cc.system
    if not check_bs(cc).holds:
        row["iota_spec"] = "inf"
        return row
    from .maslov import geometric_index
    traj = homothetic_parabolic(sys, cc, cfg["trajectory.tau_max"], cfg["trajectory.samples"], mode=cfg["mode"])
    coeff = assemble_coefficients(sys, cc, traj)
    k = constants(sys, cc, cfg["mode"])
    row["iota_spec"] = spectral_index(coeff, _discretization(cfg, coeff, k.delta_tilde), bs_holds=True).index
    row["iota_geo"] = geometric_index(coeff, step=cfg["numerics.step"]).index
    return row


def _bisect(f, a, b, fa, tol, max_iter=200):
    """Shrink [a, b] with f(a) != f(b) (booleans) to width <= tol."""
    for _ in range(max_iter):
        if b - a <= tol:
            break
        c = 0.5 * (a + b)
        fc = f(c)
        if fc == fa:
            a = c
        else:
            b = c
    return a, b


def cmd_scan(cfg: RunConfig, plot_dir: Optional[Path] = None) -> dict:
    """Coarse grid over one mass, then bisection of each sign change of bs_margin and of the hyperbolicity flag."""
    grid = np.linspace(cfg["scan.min"], cfg["scan.max"], cfg["scan.points"])
    jobs = [(cfg, float(v)) for v in grid]
    if cfg["scan.workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["scan.workers"]) as ex:
            rows = list(ex.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    warn = Warnings()
    tol = cfg["scan.tol"]
    brackets = {"bs_margin": [], "hyperbolic": []}
    for r0, r1 in zip(rows, rows[1:]):
        if (r0["bs_margin"] > 0) != (r1["bs_margin"] > 0):
            brackets["bs_margin"].append(list(_bisect(lambda v: _scan_flags(cfg, v)[0].bs_margin > 0,
                                                      r0["m"], r1["m"], r0["bs_margin"] > 0, tol)))
        if r0["hyperbolic"] != r1["hyperbolic"]:
            brackets["hyperbolic"].append(list(_bisect(lambda v: _scan_flags(cfg, v)[1],
                                                       r0["m"], r1["m"], r0["hyperbolic"], tol)))
    for key, br in brackets.items():
        if not br:
            warn.add("NO_SIGN_CHANGE", f"{key} keeps its sign on [{cfg['scan.min']}, {cfg['scan.max']}]")
    same = (len(brackets["bs_margin"]) == len(brackets["hyperbolic"])
            and all(max(a[0], b[0]) <= min(a[1], b[1]) + tol
                    for a, b in zip(brackets["bs_margin"], brackets["hyperbolic"])))
    if not same:
        warn.add("BS_HYPERBOLICITY_MISMATCH", "bs_margin and hyperbolicity flips are not co-located")
    if plot_dir is not None:
        cols = ["m", "bs_margin", "hyperbolic", "iota_spec", "iota_geo"]
        _write_csv(plot_dir / "scan.csv", cols, [[r[c] for c in cols] for r in rows])
    return {"config": cfg.echo(), "rows": rows, "brackets": brackets, "flips_colocated": same,
            "warnings": warn.as_list()}


# verify ----------------------------------------------------------------------

def cmd_verify(cfg: RunConfig) -> dict:
    """Built-in oracle checks of the installation, independent of the config's system."""
    from .checks import run_oracles
    checks = run_oracles()
    warn = Warnings()
    for c in checks:
        if not c["passed"]:
            warn.add("ORACLE_FAILED", c["name"])
    return {"config": cfg.echo(), "checks": checks, "all_passed": all(c["passed"] for c in checks),
            "warnings": warn.as_list()}


# output ----------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


_ERRORS = (
    (ConfigError, EXIT_CONFIG, "config error"),
    (TrajectoryError, EXIT_CONFIG, "invalid trajectory"),
    (HypothesisError, EXIT_HYPOTHESIS, "hypothesis violated"),
    (NotHyperbolicError, EXIT_HYPOTHESIS, "hypothesis violated"),
    (ConvergenceError, EXIT_NUMERIC, "no convergence"),
    (PropagationError, EXIT_NUMERIC, "no convergence"),
    (MaslovError, EXIT_NUMERIC, "no convergence"),
    (CollisionError, EXIT_NUMERIC, "collision"),
    (np.linalg.LinAlgError, EXIT_NUMERIC, "linear algebra failure"),
    (ValueError, EXIT_CONFIG, "invalid input"),
    (RuntimeError, EXIT_NUMERIC, "numerical failure"),
)


def run(verb: str, cfg_path: Optional[str], overrides=(), report: Optional[str] = None,
        plot_dir: Optional[str] = None, out=None, err=None) -> int:
    """Run one verb; returns the exit code.  The JSON report goes to ``report`` or ``out``."""
    out = _sys.stdout if out is None else out
    err = _sys.stderr if err is None else err
    try:
        cfg = load_config(cfg_path, overrides, need_system=verb != "verify")
        report = report or cfg["outputs.report"]
        pdir = plot_dir or cfg["outputs.plot_dir"]
        pdir = None if pdir is None else Path(pdir)
        if pdir is not None:
            pdir.mkdir(parents=True, exist_ok=True)
        if verb == "cc":
            rep = cmd_cc(cfg)
        elif verb == "bs":
            rep = cmd_bs(cfg)
        elif verb == "limit":
            rep = cmd_limit(cfg)
        elif verb == "trajectory":
            rep = cmd_trajectory(cfg, pdir)
        elif verb == "index":
            rep = cmd_index(cfg, pdir)
        elif verb == "scan":
            rep = cmd_scan(cfg, pdir)
        elif verb == "verify":
            rep = cmd_verify(cfg)
        else:
            raise ConfigError(f"verb: unknown {verb!r}")
        rep = {"verb": verb, **rep}
    except Exception as exc:
        for cls, code, label in _ERRORS:
            if isinstance(exc, cls):
                err.write(f"error ({label}): {exc}\n")
                return code
        raise
    text = dumps_report(rep)
    if report:
        Path(report).write_text(text, encoding="utf-8")
        err.write(_summary(rep))
    else:
        out.write(text)
    if verb == "verify" and not rep["all_passed"]:
        return EXIT_NUMERIC
    return EXIT_OK


def _summary(rep: dict) -> str:
    lines = [f"{rep['verb']}: ok"]
    if "indices" in rep:
        for k, v in rep["indices"].items():
            lines.append(f"  {k} = {v['value']} (stable: {v['stable']})")
    for w in rep.get("warnings", []):
        lines.append(f"  warning {w['code']}: {w['message']}")
    return "\n".join(lines) + "\n"


# click front end -------------------------------------------------------------

def _common(f):
    f = click.option("--plot-dir", type=click.Path(file_okay=False), help="directory for CSV plot data")(f)
    f = click.option("--report", type=click.Path(dir_okay=False), help="write the JSON report here")(f)
    f = click.option("--mode", type=str, help="collision | parabolic")(f)
    f = click.option("--alpha", type=str, help="homogeneity exponent in (0,2)")(f)
    f = click.option("--masses", type=str, help="comma-separated masses")(f)
    f = click.option("--set", "-s", "sets", multiple=True, metavar="KEY=VALUE", help="override any config key")(f)
    f = click.option("--config", "-c", "config", type=str, help="flat dotted-key config file")(f)
    return f


def _overrides(sets, masses, alpha, mode):
    ov = []
    for key, v in (("system.masses", masses), ("system.alpha", alpha), ("mode", mode)):
        if v is not None:
            ov.append(f"{key}={v}")
    return ov + list(sets)


@click.group()
def main():
    """Spectral and geometric index of s0-asymptotic n-body solutions."""


def _verb(name, doc):
    @_common
    def cmd(config, sets, masses, alpha, mode, report, plot_dir):
        _sys.exit(run(name, config, _overrides(sets, masses, alpha, mode), report, plot_dir))

    cmd.__doc__ = doc
    main.command(name)(cmd)


for _name, _doc in (("cc", "Central configuration record."),
                    ("bs", "[BS] condition report."),
                    ("limit", "Limit spectra, H* eigenvalues, hyperbolicity and limit BND."),
                    ("trajectory", "Build or ingest the trajectory; CSV of trajectory and coefficients."),
                    ("index", "Spectral and geometric index with the full cross-check chain."),
                    ("scan", "Scan one mass; brackets of the bs_margin and hyperbolicity flips."),
                    ("verify", "Run the built-in oracle checks.")):
    _verb(_name, _doc)


if __name__ == "__main__":
    main()
