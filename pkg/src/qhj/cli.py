"""Command-line front end.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines whose
keys are the long option names (dashes or underscores); values in the file
override the flags.  ``QHJ_UNITS`` (internal or si) sets the output units
unless ``--units`` is given.  Failures print one JSON line on stderr and
exit nonzero: 2 for configuration errors, 3 for integration failures (a
partial file is still written), 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (UnboundStateError, classify_ejection, detect_nodes, expected_node_count, hidden_ensemble,
                       trap_zone)
from .basis import BoundState
from .classical_dynamics import ClassicalParams, PurelyQuantumError, classical_orbit, turning_radii
from .fileio import subset, thin_indices, write_trajectory
from .figures import FIGURE_IDS, emit_figure_bundle
from .momenta import HiddenVariables
from .quantum_dynamics import (IntegrationStall, IntegratorConfig, TrajectoryState, angular_trajectory,
                               integrate_spatial_orbit, integrate_time_trajectory, zone_roots)
from .residuals import law_of_motion_residual, verify_all
from .units import CONSTANTS, UnitSystem, joules_to_ev, to_internal

COMMANDS = ("orbit", "radial-time", "angular", "classical", "trap", "nodes", "eject", "verify", "state-info",
            "figure")
_NEEDS_HIDDEN = {"orbit", "radial-time", "angular", "eject", "verify"}
_NEEDS_STATE = _NEEDS_HIDDEN | {"trap", "nodes", "state-info"}
_WRITES = {"orbit", "radial-time", "angular", "classical"}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    """Validated inputs of one command."""

    command: str
    state: BoundState | None = None
    hidden: HiddenVariables | None = None
    init: tuple | None = None  # (r0, theta0, phi0) in internal units
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_path: Path | None = None
    units: UnitSystem = field(default_factory=UnitSystem)
    ensemble: list | None = None
    options: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in _NEEDS_STATE and self.state is None:
            raise ConfigError(f"{self.command} needs --state n,l,m")
        if self.command in _NEEDS_HIDDEN and self.hidden is None:
            raise ConfigError(f"{self.command} needs --hidden a_r,b_r,a_t,b_t,a_p,b_p")
        if self.command == "nodes" and not self.ensemble:
            raise ConfigError("nodes needs an ensemble (--ensemble N or --hidden-file)")
        if self.command == "classical" and "params" not in self.options:
            raise ConfigError("classical needs --E, --alpha and --beta, or --state")
        if self.command == "figure" and self.options.get("figure_id") not in FIGURE_IDS:
            raise ConfigError("figure needs --id in 1..12")
        if self.command == "eject" and self.init is None:
            raise ConfigError("eject needs --r0")
        if self.init is not None:
            r0, th0, _ = self.init
            if not r0 > 0:
                raise ConfigError(f"r0 must be positive, got {r0}")
            if not 0 < th0 < math.pi:
                raise ConfigError(f"theta0 must lie in (0, pi), got {th0}")
        if self.command in _WRITES and self.output_path is None:
            raise ConfigError(f"{self.command} needs --output")
        return self


# -- argument parsing ---------------------------------------------------------


def _state(text):
    try:
        return BoundState.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _triple(text):
    vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    if len(vals) != 3 or any(v not in (1, -1) for v in vals):
        raise argparse.ArgumentTypeError("expected three values of +1 or -1")
    return tuple(vals)


def _energy(text):
    """Internal energy, or electron-volts with an ``eV`` suffix."""
    s = str(text).strip()
    if s.lower().endswith("ev"):
        return to_internal(float(s[:-2]) * CONSTANTS.e_charge, "energy")
    return float(s)


def _common(p: argparse.ArgumentParser, state=True, hidden=True, init=True, integ=True, output=True):
    p.add_argument("--config", help="key=value file overriding the flags")
    p.add_argument("--units", choices=("internal", "si"), default=None, help="output units (default $QHJ_UNITS)")
    if state:
        p.add_argument("--state", type=_state, help="quantum numbers n,l,m")
    if hidden:
        p.add_argument("--hidden", help="a_r,b_r,a_theta,b_theta,a_phi,b_phi")
        p.add_argument("--directions", type=_triple, default=None, help="initial directions along r,theta,phi")
    if init:
        p.add_argument("--r0", type=float, default=None, help="initial radius in Bohr radii")
        p.add_argument("--theta0", type=float, default=0.5 * math.pi)
        p.add_argument("--phi0", type=float, default=0.0)
    if integ:
        p.add_argument("--t-end", type=float, default=None)
        p.add_argument("--periods", type=float, default=None, help="stop after this many radial periods")
        p.add_argument("--rtol", type=float, default=None)
        p.add_argument("--atol", type=float, default=None)
        p.add_argument("--backend", choices=("compiled", "python"), default=None)
    if output:
        p.add_argument("-o", "--output", help="output CSV path")
        p.add_argument("--max-rows", type=int, default=0, help="thin the output to about this many rows")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhj", description="Quantum Hamilton-Jacobi trajectories of hydrogen.")
    ap.add_argument("--version", action="version", version=f"qhj {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orbit", help="3D quantum trajectory")
    _common(p)
    p.add_argument("--mode", choices=("time", "spatial"), default="time")
    p.add_argument("--segments", type=int, default=2, help="radial segments in spatial mode")

    p = sub.add_parser("radial-time", help="r(t) trajectory")
    _common(p)

    p = sub.add_parser("angular", help="theta(phi) curve")
    _common(p, init=False)
    p.add_argument("--theta0", type=float, default=0.5 * math.pi)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--polar-events", type=int, default=6)

    p = sub.add_parser("classical", help="classical orbit")
    _common(p, hidden=False)
    p.add_argument("--E", type=_energy, default=None, help="energy (internal, or with an eV suffix)")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--directions", type=_triple, default=None)

    p = sub.add_parser("trap", help="trapping-zone radii")
    _common(p, hidden=False, init=False, integ=False, output=False)

    p = sub.add_parser("nodes", help="nodes shared by an ensemble")
    _common(p, hidden=False)
    p.add_argument("--ensemble", type=int, default=10, help="number of random hidden draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-file", help="file with one hidden set per line")
    p.add_argument("--node-mode", choices=("radial", "spatial"), default="radial")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--workers", type=int, default=1, help="parallel processes for the ensemble")

    p = sub.add_parser("eject", help="ejected or trapped")
    _common(p, output=False)

    p = sub.add_parser("verify", help="residual checks")
    _common(p, output=False)
    p.add_argument("--with-trajectory", action="store_true", help="also check the metric identities")

    p = sub.add_parser("state-info", help="constants of a state")
    _common(p, hidden=False, init=False, integ=False, output=False)

    p = sub.add_parser("figure", help="data bundle for one figure")
    p.add_argument("--config", help="key=value file overriding the flags")
    p.add_argument("--units", choices=("internal", "si"), default=None)
    p.add_argument("--id", dest="figure_id", type=int, required=False)
    p.add_argument("--outdir", default="figures")
    p.add_argument("--defaults", help="alternative figure_defaults.json")
    return ap


def _apply_config_file(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key=value")
        dest = key.strip().lstrip("-").replace("-", "_")
        if dest not in actions or dest in ("help", "config"):
            raise ConfigError(f"{path}:{n}: unknown key {key.strip()!r} for {args.command}")
        act = actions[dest]
        value = value.strip()
        try:
            if isinstance(act, argparse._StoreTrueAction):
                conv = value.lower() in ("1", "true", "yes", "on")
            else:
                conv = act.type(value) if act.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{n}: bad value for {dest}: {exc}") from None
        if act.choices is not None and conv not in act.choices:
            raise ConfigError(f"{path}:{n}: {dest} must be one of {list(act.choices)}")
        setattr(args, dest, conv)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Translate parsed arguments into a validated :class:`RunConfig`."""
    units = UnitSystem.from_name(args.units or os.environ.get("QHJ_UNITS") or "internal")
    state = getattr(args, "state", None)
    hidden = None
    if getattr(args, "hidden", None):
        d = args.directions or (1, 1, 1)
        try:
            hidden = HiddenVariables.parse(args.hidden)
            hidden = replace(hidden, sign_r=d[0], sign_theta=d[1], sign_phi=d[2])
        except ValueError as exc:
            raise ConfigError(f"invalid hidden variables: {exc}") from None
    cfg = IntegratorConfig()
    kw = {}
    for name, dest in (("t_end", "t_end"), ("periods", "radial_periods"), ("rtol", "rel_tol"),
                       ("atol", "abs_tol"), ("backend", "backend")):
        v = getattr(args, name, None)
        if v is not None:
            kw[dest] = v
    try:
        cfg = replace(cfg, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    init = None
    r0 = getattr(args, "r0", None)
    if r0 is not None:
        init = (r0, args.theta0, args.phi0)
    elif state is not None and args.command in ("orbit", "radial-time", "nodes"):
        r1, r2 = zone_roots(state)
        init = (0.5 * (r1 + r2) if r1 > 0 else 0.5 * r2, getattr(args, "theta0", 0.5 * math.pi),
                getattr(args, "phi0", 0.0))
    out = Path(args.output) if getattr(args, "output", None) else None
    options = {k: v for k, v in vars(args).items()}
    ensemble = None
    if args.command == "nodes":
        if args.hidden_file:
            ensemble = [HiddenVariables.parse(line) for line in Path(args.hidden_file).read_text().splitlines()
                        if line.strip() and not line.lstrip().startswith("#")]
        else:
            ensemble = hidden_ensemble(args.ensemble, args.seed)
    if args.command == "classical":
        try:
            if args.E is not None or args.alpha is not None or args.beta is not None:
                if None in (args.E, args.alpha, args.beta):
                    raise ConfigError("classical needs all of --E, --alpha and --beta")
                options["params"] = ClassicalParams(args.E, args.alpha, abs(args.beta),
                                                    args.directions or (1, 1, 1))
            elif state is not None:
                options["params"] = ClassicalParams.from_quantum(state, args.directions or (1, 1, 1))
        except PurelyQuantumError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if init is None and "params" in options:
            init = (turning_radii(options["params"])[0], args.theta0, args.phi0)
    if args.command == "angular":
        init = None
    return RunConfig(args.command, state, hidden, init, cfg, out, units, ensemble, options).validate()


# -- execution ----------------------------------------------------------------


def _emit(msg: str = "") -> None:
    print(msg, flush=True)


def _write(cfg: RunConfig, traj, residual, extra=None):
    rows = cfg.options.get("max_rows") or 0
    if rows:
        idx = thin_indices(traj, rows)
        traj = subset(traj, idx)
        residual = None if residual is None else np.asarray(residual)[idx]
    return write_trajectory(cfg.output_path, traj, residual, cfg.units, cfg.state, cfg.hidden, extra)


def _init_state(cfg: RunConfig) -> TrajectoryState:
    r0, th0, ph0 = cfg.init
    return TrajectoryState(r=r0, theta=th0, phi=ph0)


def _time_traj(cfg: RunConfig):
    try:
        return integrate_time_trajectory(cfg.state, cfg.hidden, _init_state(cfg), cfg.integrator), None
    except IntegrationStall as exc:
        return exc.trajectory, exc


def _run_member(args):
    state, hidden, init, icfg = args
    try:
        return integrate_time_trajectory(state, hidden, init, icfg)
    except IntegrationStall as exc:
        return exc.trajectory


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; return the exit status."""
    c = cfg.command
    u = cfg.units
    if c in ("orbit", "radial-time"):
        failure = None
        if c == "orbit" and cfg.options.get("mode") == "spatial":
            try:
                traj = integrate_spatial_orbit(cfg.state, cfg.hidden, _init_state(cfg), cfg.integrator,
                                               segments=cfg.options.get("segments", 2))
            except IntegrationStall as exc:
                traj, failure = exc.trajectory, exc
        else:
            traj, failure = _time_traj(cfg)
        res = law_of_motion_residual(traj, cfg.state, cfg.hidden) if traj is not None and len(traj.t) else None
        if traj is not None:
            path = _write(cfg, traj, res)
            _emit(f"wrote {path} ({len(traj.t)} samples, status {traj.status})")
        if failure is not None:
            raise failure
        return 0
    if c == "angular":
        try:
            traj = angular_trajectory(cfg.state, cfg.hidden, cfg.options["theta0"], cfg.options["phi0"],
                                      cfg.integrator, cfg.options.get("polar_events"), return_trajectory=True)
        except IntegrationStall as exc:
            if exc.trajectory is not None:
                _write(cfg, exc.trajectory, None)
            raise
        path = _write(cfg, traj, None)
        _emit(f"wrote {path} ({len(traj.t)} samples)")
        return 0
    if c == "classical":
        p = cfg.options["params"]
        try:
            traj = classical_orbit(p, _init_state(cfg), cfg.integrator)
        except IntegrationStall as exc:
            if exc.trajectory is not None:
                _write(cfg, exc.trajectory, None)
            raise
        res = law_of_motion_residual(traj, cfg.state, cfg.hidden)
        path = _write(cfg, traj, res, {"classical": f"E={p.E!r} alpha={p.alpha!r} beta={p.beta!r}"})
        r1, r2 = turning_radii(p)
        _emit(f"wrote {path} ({len(traj.t)} samples); perihelion {r1 * u.length:.12g} "
              f"aphelion {r2 * u.length:.12g} {u.label('length')}")
        return 0
    if c == "trap":
        z = trap_zone(cfg.state)
        si = UnitSystem.from_name("si")
        _emit(f"state {cfg.state.label} E = {cfg.state.E:.12g} internal = "
              f"{joules_to_ev(cfg.state.E * si.energy):.6g} eV")
        for label, us in (("internal", UnitSystem()), ("si", si)):
            _emit(f"{label}: r1 = {z.r1 * us.length:.12g} {us.label('length')}, "
                  f"r2 = {z.r2 * us.length:.12g} {us.label('length')}, contains_origin = {z.contains_origin}")
        return 0
    if c == "nodes":
        init = _init_state(cfg)
        jobs = [(cfg.state, h, init, cfg.integrator) for h in cfg.ensemble]
        workers = max(1, int(cfg.options.get("workers") or 1))
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                trajs = list(ex.map(_run_member, jobs))
        else:
            trajs = [_run_member(j) for j in jobs]
        cat = detect_nodes(trajs, cfg.options.get("tol"), cfg.options.get("node_mode", "radial"))
        expected, radii = expected_node_count(cfg.state)
        _emit(f"{len(cat.nodes)} nodes from {cat.n_trajectories} trajectories (tolerance {cat.tolerance:g}); "
              f"trapping-zone rule expects {expected} at r = {', '.join(f'{r:.10g}' for r in radii)}")
        for nd in sorted(cat.nodes, key=lambda n: (-n.support, n.position)):
            pos = ", ".join(f"{v:.10g}" for v in nd.position)
            _emit(f"node ({pos}) support {nd.support}/{cat.n_trajectories}")
        if cfg.output_path:
            lines = ["# qhj node catalog", f"# state: {cfg.state.label}", f"# mode: {cat.mode}", "r,theta,phi,support"]
            for nd in cat.nodes:
                pos = list(nd.position) + [math.nan] * (3 - len(nd.position))
                lines.append(",".join(f"{v:.17g}" for v in pos) + f",{nd.support}")
            cfg.output_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return 0
    if c == "eject":
        r0, th0, ph0 = cfg.init
        res = classify_ejection(cfg.state, cfg.hidden, r0, cfg.integrator, th0, ph0)
        if res.time is not None:
            _emit(f"Ejected({res.time * u.time:.12g})")
        else:
            _emit("Trapped")
        return 0
    if c == "verify":
        traj = None
        if cfg.options.get("with_trajectory"):
            r1, r2 = zone_roots(cfg.state)
            icfg = cfg.integrator if cfg.integrator.radial_periods else replace(cfg.integrator, radial_periods=1)
            r0 = cfg.init[0] if cfg.init else (0.5 * (r1 + r2) if r1 > 0 else 0.5 * r2)
            traj = integrate_time_trajectory(cfg.state, cfg.hidden, TrajectoryState(r=r0), icfg)
        reports = verify_all(cfg.state, cfg.hidden, traj)
        for rep in reports:
            _emit(rep.line())
        return 0 if all(r.passed for r in reports) else 1
    if c == "state-info":
        s = cfg.state
        si = UnitSystem.from_name("si")
        _emit(f"state {s.label}")
        _emit(f"E = {s.E:.12g} internal = {joules_to_ev(s.E * si.energy):.8g} eV")
        _emit(f"lambda = l(l+1) = {s.lam}")
        _emit(f"m^2 - 1/4 = {s.mq:g}")
        try:
            z = trap_zone(s)
            _emit(f"trapping zone r in ({z.r1:.12g}, {z.r2:.12g}) a0")
            n, radii = expected_node_count(s)
            _emit(f"expected nodes: {n} at r = {', '.join(f'{r:.10g}' for r in radii)}")
        except UnboundStateError as exc:
            _emit(f"trapping zone: {exc}")
        try:
            p = ClassicalParams.from_quantum(s)
            _emit(f"classical correspondent: alpha = {p.alpha:g}, beta = {p.beta:.12g}")
        except PurelyQuantumError as exc:
            _emit(f"classical correspondent: none ({exc})")
        return 0
    if c == "figure":
        from .figures import load_defaults
        table = load_defaults(cfg.options.get("defaults")) if cfg.options.get("defaults") else None
        files = emit_figure_bundle(cfg.options["figure_id"], cfg.options.get("outdir", "figures"), table, u)
        for f in files:
            _emit(f"wrote {f}")
        return 0
    raise ConfigError(f"unknown command {c!r}")


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        code = int(exc.code or 0)
        if code:
            return _error("UsageError", "invalid command line", 2)
        return 0
    try:
        _apply_config_file(parser, args)
        cfg = config_from_args(args)
    except PurelyQuantumError as exc:
        return _error("PurelyQuantumError", str(exc), 2)
    except (ConfigError, ValueError) as exc:
        return _error("ConfigError", str(exc), 2)
    try:
        return run(cfg)
    except IntegrationStall as exc:
        return _error("IntegrationStall", str(exc), 3)
    except (UnboundStateError, PurelyQuantumError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _error(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
