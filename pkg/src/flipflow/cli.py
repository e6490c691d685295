"""Command-line entry point: ``flipflow {spectrum,simulate,steer,report}``.

A run is described by a JSON config file; command-line flags override it.
Exit codes: 0 success, 1 numerical failure, 2 configuration error.

Config fields (all optional)::

    matrix        {"kind": "harmonic_chain", "n": N}
                  {"kind": "random_spd", "n": N, "seed": S, "range": [lo, hi]}
                  {"kind": "file", "path": "v.json"}   (or just "v.json")
    energy        h, default 0.5
    law           {"kind": "exponential", "rate": 1}, {"kind": "gamma", ...},
                  {"kind": "fixed_schedule", "taus": [...]}
    t_end         simulated time, default 1000
    seeds         list of integers, default [0]
    observables   names, default H, r{k}_sq and p1_sq
    initial_state state file; default g_star
    workers       threads for independent seeds, default 1
    trajectory_dt sample spacing for trajectory CSVs (simulate); off if absent
    events        write per-seed flip logs (simulate), default false
    steer         {"from", "to", "eps", "horizon", "grid", "budget"}
    report        {"n_ref", "abs_tol", "ks_tol", "chain_samples", "burn_in", "thin"}
    tolerances    {"tol", "coeff_bound"} for the admissibility check

Relative paths in a config file are taken relative to that file.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as fio
from .dynamics import energy as energy_of
from .dynamics import g_star, sample_path
from .errors import ConfigError, DifferentEnergy, FlipflowError, NotInVPlus, NumericalFailure
from .liouville import ergodicity_report, reference_expectation
from .model import (DEFAULT_COEFF_BOUND, DEFAULT_TOL, check_admissible, decompose,
                    harmonic_chain, random_spd, spectrum_is_simple)
from .observables import resolve
from .rng import make_rng
from .steering import steer_to_gstar, steer_to_target
from .stochastic import WaitingLaw, multi_trajectory, simulate_pdmp

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunConfig:
    matrix: dict = field(default_factory=lambda: {"kind": "random_spd", "n": 3, "seed": 7})
    energy: float = 0.5
    law: dict = field(default_factory=lambda: {"kind": "exponential", "rate": 1.0})
    t_end: float = 1000.0
    seeds: list = field(default_factory=lambda: [0])
    observables: list = None
    initial_state: str = None
    workers: int = 1
    trajectory_dt: float = None
    events: bool = False
    steer: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str = "."

    @classmethod
    def from_dict(cls, d, base=Path(".")):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
        cfg = cls(**d)
        cfg._resolve_paths(Path(base))
        return cfg

    def _resolve_paths(self, base):
        if isinstance(self.matrix, str):
            self.matrix = {"kind": "file", "path": self.matrix}
        if isinstance(self.matrix, dict) and self.matrix.get("kind") == "file" and "path" in self.matrix:
            self.matrix = dict(self.matrix, path=str(base / self.matrix["path"]))
        if self.initial_state:
            self.initial_state = str(base / self.initial_state)
        steer = dict(self.steer)
        for key in ("from", "to"):
            if steer.get(key):
                steer[key] = str(base / steer[key])
        self.steer = steer


def load_config(path):
    if path is None:
        return RunConfig()
    path = Path(path)
    return RunConfig.from_dict(fio.read_json(path, "config file"), path.parent)


def _check_files(cfg):
    paths = []
    if cfg.matrix.get("kind") == "file":
        paths.append(("matrix.path", cfg.matrix.get("path")))
    if cfg.initial_state:
        paths.append(("initial_state", cfg.initial_state))
    for key in ("from", "to"):
        if cfg.steer.get(key):
            paths.append((f"steer.{key}", cfg.steer[key]))
    for name, p in paths:
        if not p or not Path(p).exists():
            raise ConfigError(f"config field {name}: file not found: {p}")


def build_spec(cfg):
    m = cfg.matrix
    if not isinstance(m, dict) or "kind" not in m:
        raise ConfigError("config field matrix: expected an object with a 'kind'")
    kind = m["kind"]
    try:
        if kind == "harmonic_chain":
            v = harmonic_chain(int(m["n"]))
        elif kind == "random_spd":
            lo, hi = m.get("range", (0.5, 2.0))
            v = random_spd(int(m["n"]), int(m["seed"]), (float(lo), float(hi)))
        elif kind == "file":
            v = fio.read_matrix(m["path"])
        else:
            raise ConfigError(f"config field matrix.kind: unknown kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"config field matrix.{exc.args[0]} is missing") from None
    if not (isinstance(cfg.energy, (int, float)) and cfg.energy > 0):
        raise ConfigError("config field energy must be a positive number")
    return decompose(v, float(cfg.energy))


def _observables(cfg, spec):
    names = cfg.observables
    if names is None:
        names = ["H"] + [f"r{k}_sq" for k in range(1, spec.n + 1)] + ["p1_sq"]
    for name in names:
        resolve(name, spec)  # raises ConfigError listing valid names
    return list(names)


def _seeds(cfg):
    if not isinstance(cfg.seeds, list) or not cfg.seeds:
        raise ConfigError("config field seeds must be a non-empty list of integers")
    if any(not isinstance(s, int) or isinstance(s, bool) for s in cfg.seeds):
        raise ConfigError("config field seeds must hold integers")
    return cfg.seeds


def _initial_state(cfg, spec):
    if not cfg.initial_state:
        return g_star(spec)
    psi = fio.read_state(cfg.initial_state)
    if psi.n != spec.n:
        raise ConfigError(f"initial_state has dimension {psi.n}, matrix has {spec.n}")
    return psi


def _t_end(cfg):
    t = cfg.t_end
    if not (isinstance(t, (int, float)) and t >= 0 and math.isfinite(t)):
        raise ConfigError("config field t_end must be a finite number >= 0")
    return float(t)


class _Console:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, msg):
        if not self.quiet:
            print(msg)


# --- subcommands -------------------------------------------------------------------

def cmd_spectrum(cfg, say):
    spec = build_spec(cfg)
    tol = float(cfg.tolerances.get("tol", DEFAULT_TOL))
    bound = int(cfg.tolerances.get("coeff_bound", DEFAULT_COEFF_BOUND))
    report = check_admissible(spec, tol, bound)
    out = {
        "n": spec.n,
        "energy": spec.energy,
        "omega_sq": spec.omega_sq,
        "omega": spec.omega,
        "beta": spec.beta,
        "spectrum_simple": spectrum_is_simple(spec, tol),
        "admissibility": report.to_dict(),
    }
    path = Path(cfg.out) / "spectrum.json"
    fio.write_json(path, out)
    say(f"omega^2 = {np.array2string(spec.omega_sq, precision=6)}")
    say(f"in V+: {report.in_v_plus}; rational independence: {report.independence}"
        + (f" (relation {list(report.relation)})" if report.relation else "")
        + f"; mixing dimension {report.mixing_dim}")
    say(f"wrote {path}")


def _trajectory_rows(spec, psi0, t_end, law, seed, dt):
    """Right-continuous samples at t = k dt < t_end, plus the flip log."""
    times, rows = [], []

    def observer(start, duration, t0):
        k0 = math.ceil(t0 / dt - 1e-12)
        ks = np.arange(k0, math.ceil((t0 + duration) / dt - 1e-12))
        ks = ks[ks * dt < t_end]
        if ks.size:
            times.extend((ks * dt).tolist())
            rows.append(sample_path(spec, start, ks * dt - t0))

    log = simulate_pdmp(spec, psi0, t_end, law, make_rng(seed), [observer] if dt else [])
    n2 = 2 * spec.n
    return times, (np.vstack(rows) if rows else np.empty((0, n2))), log


def cmd_simulate(cfg, say):
    spec = build_spec(cfg)
    seeds, t_end = _seeds(cfg), _t_end(cfg)
    names = _observables(cfg, spec)
    law = WaitingLaw.from_dict(cfg.law)
    psi0 = _initial_state(cfg, spec)
    out = Path(cfg.out)
    rows = []
    if t_end > 0:
        n_ref = int(cfg.report.get("n_ref", 100_000))
        refs = {f: reference_expectation(spec, f, n_ref, make_rng(seeds[0], stream=1)).value
                for f in names}
        for res in multi_trajectory(spec, psi0, t_end, law, seeds, names, workers=cfg.workers):
            for f in names:
                est = res.means[f]
                rows.append((res.seed, t_end, f, est, refs[f], abs(est - refs[f])))
    fio.write_results(out / "results.csv", rows)
    if cfg.trajectory_dt is not None or cfg.events:
        dt = cfg.trajectory_dt
        if dt is not None and not (isinstance(dt, (int, float)) and dt > 0):
            raise ConfigError("config field trajectory_dt must be positive")
        for seed in seeds:
            times, traj, log = _trajectory_rows(spec, psi0, t_end, law, seed, dt)
            if dt is not None:
                fio.write_trajectory(out / f"trajectory_seed{seed}.csv", times,
                                     traj if traj.size else np.empty((0, 2 * spec.n)))
            if cfg.events:
                fio.write_events(out / f"events_seed{seed}.csv", log.times, log.taus)
    for r in rows:
        say(f"seed {r[0]}  {r[2]:>8}  M_f = {r[3]:.6f}  pi(f) = {r[4]:.6f}  |err| = {r[5]:.2e}")
    say(f"wrote {out / 'results.csv'}")


def cmd_steer(cfg, say):
    base = build_spec(cfg)
    st = cfg.steer
    if not st.get("from"):
        raise ConfigError("steer needs a starting state (config steer.from or --from)")
    psi = fio.read_state(st["from"])
    if psi.n != base.n:
        raise ConfigError(f"steer.from has dimension {psi.n}, matrix has {base.n}")
    spec = base.with_energy(energy_of(base, psi))
    kwargs = {k: st[k] for k in ("horizon", "grid") if st.get(k) is not None}
    if st.get("to"):
        target = fio.read_state(st["to"])
        if target.n != base.n:
            raise ConfigError(f"steer.to has dimension {target.n}, matrix has {base.n}")
        if abs(energy_of(spec, target) - spec.energy) > 1e-9 * spec.energy:
            raise DifferentEnergy("steer.from and steer.to lie on different energy surfaces")
        eps = float(st.get("eps", 0.1))
        res = steer_to_target(spec, psi, target, eps, st.get("budget"), **kwargs)
        mode = "target"
    else:
        eps = float(st.get("eps", 0.05))
        res = steer_to_gstar(spec, psi, eps, max_flips=st.get("budget"), **kwargs)
        mode = "g_star"
    out = dict(res.to_dict(), mode=mode, eps=eps)
    path = Path(cfg.out) / "steer.json"
    fio.write_json(path, out)
    say(f"steered to {mode} with {res.flips_used} flips, final error {res.final_error:.3e}")
    say(f"wrote {path}")


def cmd_report(cfg, say):
    spec = build_spec(cfg)
    seeds, t_end = _seeds(cfg), _t_end(cfg)
    if t_end <= 0:
        raise ConfigError("report needs t_end > 0")
    names = _observables(cfg, spec)
    law = WaitingLaw.from_dict(cfg.law)
    psi0 = _initial_state(cfg, spec)
    rc = cfg.report
    allowed = {"n_ref", "abs_tol", "ks_tol", "chain_samples", "burn_in", "thin"}
    extra = sorted(set(rc) - allowed)
    if extra:
        raise ConfigError(f"config: unknown report field(s) {', '.join(extra)}")
    report = ergodicity_report(spec, psi0, t_end, law, seeds, names, workers=cfg.workers, **rc)
    out = Path(cfg.out)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    for name in report.observables:
        say(f"{name:>8}  mean M_f = {report.estimates[name]:.6f}  pi(f) = {report.references[name]:.6f}"
            f"  mean |err| = {report.mean_abs_errors[name]:.4f}"
            f"  {'PASS' if report.passed[name] else 'FAIL'}")
    if report.ks_stats:
        say(f"max KS = {max(report.ks_stats.values()):.4f}  {'PASS' if report.passed['ks'] else 'FAIL'}")
    say(f"wrote {out / 'report.json'}")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "steer": cmd_steer,
    "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="run a single seed, overriding the config")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    common.add_argument("--matrix", help="matrix file (JSON or CSV), overriding the config")
    common.add_argument("--workers", type=int, help="threads for independent seeds")

    parser = argparse.ArgumentParser(prog="flipflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="spectrum and admissibility report")
    sim = sub.add_parser("simulate", parents=[common], help="time averages along flip trajectories")
    sim.add_argument("--t-end", type=float, help="simulated time")
    steer = sub.add_parser("steer", parents=[common], help="flip schedule to g_star or a target")
    steer.add_argument("--from", dest="from_state", help="starting state file")
    steer.add_argument("--to", dest="to_state", help="target state file (default: g_star)")
    steer.add_argument("--eps", type=float, help="tolerance")
    rep = sub.add_parser("report", parents=[common], help="ergodicity report against Liouville")
    rep.add_argument("--t-end", type=float, help="simulated time")
    rep.add_argument("--observables", help="comma-separated observable names")
    return parser


def _apply_flags(cfg, args):
    if args.out:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.matrix:
        cfg.matrix = {"kind": "file", "path": args.matrix}
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "t_end", None) is not None:
        cfg.t_end = args.t_end
    if getattr(args, "observables", None):
        cfg.observables = [s.strip() for s in args.observables.split(",") if s.strip()]
    steer = dict(cfg.steer)
    if getattr(args, "from_state", None):
        steer["from"] = args.from_state
    if getattr(args, "to_state", None):
        steer["to"] = args.to_state
    if getattr(args, "eps", None) is not None:
        steer["eps"] = args.eps
    cfg.steer = steer
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        _check_files(cfg)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, _Console(args.quiet))
    except (ConfigError, NotInVPlus, DifferentEnergy) as exc:
        print(f"flipflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"flipflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FlipflowError as exc:
        print(f"flipflow: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
