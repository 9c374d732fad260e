"""Data bundles for the twelve figures: CSV trajectories plus a gnuplot script.

Parameters come from ``data/figure_defaults.json``; captioned values are used
where a caption gives them, documented defaults elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .analysis import classify_ejection
from .basis import BoundState
from .classical_dynamics import ClassicalParams, classical_orbit, turning_radii
from .fileio import subset, thin_indices, write_trajectory
from .momenta import HiddenVariables
from .quantum_dynamics import (IntegrationStall, IntegratorConfig, TrajectoryState, angular_trajectory,
                               integrate_time_trajectory, zone_roots)
from .residuals import law_of_motion_residual
from .units import UnitSystem

FIGURE_IDS = tuple(range(1, 13))
MAX_ROWS = 4000


def load_defaults(path=None) -> dict:
    """Figure parameter table (the shipped JSON unless ``path`` is given)."""
    if path is None:
        text = resources.files("qhj").joinpath("data/figure_defaults.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


def _radius(spec, state: BoundState) -> float:
    if isinstance(spec, (int, float)):
        return float(spec)
    r1, r2 = zone_roots(state)
    try:
        return {"r1": r1, "r2": r2, "mid": 0.5 * (r1 + r2)}[spec]
    except KeyError:
        raise ValueError(f"unknown radius keyword {spec!r}") from None


def _hidden_list(entry) -> list:
    return [HiddenVariables(*map(float, h)) for h in entry.get("hidden", [])]


def _cfg(entry, base: IntegratorConfig | None) -> IntegratorConfig:
    cfg = base or IntegratorConfig()
    return replace(cfg, t_end=float(entry.get("t_end", cfg.t_end)),
                   radial_periods=entry.get("radial_periods", cfg.radial_periods))


def _label(h: HiddenVariables) -> str:
    return f"a_r={h.a_r:g} b_r={h.b_r:g} a_t={h.a_theta:g} b_t={h.b_theta:g}"


def _write_quantum(path, traj, state, hidden, units, extra=None):
    traj = subset(traj, thin_indices(traj, MAX_ROWS))
    res = law_of_motion_residual(traj, state, hidden)
    return write_trajectory(path, traj, res, units, state, hidden, extra)


def _time_runs(entry, cfg, units, out: Path, tag: str) -> list:
    state = BoundState(*entry["state"])
    r0 = _radius(entry["r0"], state)
    files = []
    for k, h in enumerate(_hidden_list(entry), 1):
        init = TrajectoryState(r=r0, theta=float(entry.get("theta0", 0.5 * math.pi)),
                               phi=float(entry.get("phi0", 0.0)))
        try:
            traj = integrate_time_trajectory(state, h, init, cfg)
        except IntegrationStall as exc:  # keep what was computed
            traj = exc.trajectory
        files.append((_write_quantum(out / f"{tag}_{k}.csv", traj, state, h, units), _label(h)))
    return files


def _script(name: str, title: str, body: str, three_d: bool = False) -> str:
    head = [
        f"# {title}",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,700",
        f"set output '{name}.png'",
        f"set title '{title}'",
    ]
    if three_d:
        head += ["set view equal xyz", "set xlabel 'x'", "set ylabel 'y'", "set zlabel 'z'"]
    return "\n".join(head) + "\n" + body + "\n"


def _plot(cmd: str, files, using: str) -> str:
    parts = [f"'{p.name}' using {using} with lines title '{t}'" for p, t in files]
    return cmd + " " + ", \\\n     ".join(parts)


def emit_figure_bundle(figure_id: int, output_dir, defaults: dict | None = None,
                       units: UnitSystem | None = None, cfg: IntegratorConfig | None = None) -> list:
    """Write the data files and gnuplot script for one figure; return their paths."""
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"figure_id must be in 1..12, got {figure_id!r}")
    table = defaults or load_defaults()
    entry = table["figures"][str(figure_id)]
    units = units or UnitSystem()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = f"fig{figure_id:02d}"
    kind = entry["kind"]
    title = entry.get("title", name)
    run_cfg = _cfg(entry, cfg)
    written = []

    if kind == "classical":
        p = ClassicalParams(entry["E"], entry["alpha"], entry["beta"])
        r1, r2 = turning_radii(p)
        r0 = {"r1": r1, "r2": r2}.get(entry["r0"], entry["r0"])
        init = TrajectoryState(r=float(r0), theta=float(entry["theta0"]), phi=float(entry.get("phi0", 0.0)))
        traj = classical_orbit(p, init, run_cfg)
        f = write_trajectory(out / f"{name}_classical.csv", traj, None, units,
                             extra={"classical": f"E={p.E!r} alpha={p.alpha!r} beta={p.beta!r}"})
        written.append(f)
        body = _plot("splot", [(f, "classical")], "5:6:7")
        files = None
    elif kind == "radial-time":
        files = _time_runs(entry, run_cfg, units, out, name)
        body = "set xlabel 't'\nset ylabel 'r'\n" + _plot("plot", files, "1:2")
    elif kind == "spatial":
        files = _time_runs(entry, run_cfg, units, out, name)
        body = _plot("splot", files, "5:6:7")
    elif kind in ("comparison", "projection"):
        files = _time_runs(entry, run_cfg, units, out, name + "_quantum")
        state = BoundState(*entry["state"])
        p = ClassicalParams.from_quantum(state)
        init = TrajectoryState(r=_radius(entry["r0"], state), theta=float(entry["theta0"]))
        ctraj = classical_orbit(p, init, run_cfg)
        cf = write_trajectory(out / f"{name}_classical.csv", ctraj, None, units, state,
                              extra={"classical": f"E={p.E!r} alpha={p.alpha!r} beta={p.beta!r}"})
        written.append(cf)
        both = files + [(cf, "classical")]
        if kind == "comparison":
            body = _plot("splot", both, "5:6:7")
        else:
            body = ("set multiplot layout 1,2\nset xlabel 'y'\nset ylabel 'z'\n" + _plot("plot", both, "6:7")
                    + "\nset xlabel 'x'\n" + _plot("plot", both, "5:7") + "\nunset multiplot")
    elif kind == "ejection":
        state = BoundState(*entry["state"])
        h = _hidden_list(entry)[0]
        files = []
        for r0 in entry["r0"]:
            res = classify_ejection(state, h, float(r0), replace(run_cfg, radial_periods=None),
                                    theta0=float(entry.get("theta0", 0.5 * math.pi)))
            tag = f"{name}_r0_{r0:g}".replace(".", "p")
            path = _write_quantum(out / f"{tag}.csv", res.trajectory, state, h, units,
                                  extra={"classification": str(res)})
            files.append((path, f"r0={r0:g}: {res}"))
        body = "set logscale y\nset xlabel 't'\nset ylabel 'r'\n" + _plot("plot", files, "1:2")
    elif kind == "angular":
        files = []
        for st in entry["states"]:
            state = BoundState(*st)
            for k, h in enumerate(_hidden_list(entry), 1):
                traj = angular_trajectory(state, h, float(entry["theta0"]), 0.0, run_cfg,
                                          polar_events=entry.get("polar_events"), return_trajectory=True)
                path = write_trajectory(out / f"{name}_l{state.l}m{state.m_l}_{k}.csv",
                                        subset(traj, thin_indices(traj, MAX_ROWS)), None, units, state, h)
                files.append((path, f"l={state.l} m={state.m_l} #{k}"))
        body = "set xlabel 'phi'\nset ylabel 'theta'\n" + _plot("plot", files, "4:3")
    else:
        raise ValueError(f"unknown figure kind {kind!r}")

    if files:
        written = [p for p, _ in files] + written
    script = out / f"{name}.gp"
    script.write_text(_script(name, title, body, three_d="splot" in body), encoding="utf-8", newline="\n")
    written.append(script)
    return written


def emit_all(output_dir, **kw) -> dict:
    return {i: emit_figure_bundle(i, output_dir, **kw) for i in FIGURE_IDS}
