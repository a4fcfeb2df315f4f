"""``blowup-lab`` command line.

Exit codes: 0 all checks pass, 1 a check or computation failed, 2 usage or
config error.  Configs are JSON objects naming every field of the command's
schema (see ``--print-config``); without ``--config`` the documented
defaults apply.  Reports are JSON and contain nothing time-dependent.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    SCOPES,
    BlowupConfig,
    ConfigError,
    DecomposeConfig,
    GroundStateConfig,
    LawConfig,
    LinopsConfig,
    ProfileConfig,
    RateStudyConfig,
    as_dict,
    config_hash,
    load,
    load_verify,
    validate_blowup,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class CheckFailure(RuntimeError):
    """A computation could not produce its result; maps to exit code 1."""


# ------------------------------------------------------------------ output helpers

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def report(command: str, inputs: dict, checks, seed: int, extra: dict | None = None) -> dict:
    inputs = _clean(dict(inputs, seed=seed))
    rep = {
        "command": command,
        "inputs": inputs,
        "checks": [c.to_dict() for c in checks],
        "pass": all(c.passed for c in checks),
        "versions": {"package": __version__, "config_hash": config_hash(inputs)},
    }
    if extra:
        rep["results"] = _clean(extra)
    return rep


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _sibling(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _override(cfg, **kw):
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg


# ------------------------------------------------------------------ commands

def cmd_ground_state(args) -> int:
    from .checks import check_ground_state
    from .ground_state import solve_ground_state
    from .radial import RadialGrid

    cfg = _override(load(GroundStateConfig, args.config), dim=args.dim, tol=args.tol)
    try:
        gs = solve_ground_state(cfg.dim, RadialGrid.default(cfg.dim, cfg.resolution), cfg.tol)
    except ValueError as exc:
        raise CheckFailure(str(exc)) from None
    if args.out:
        gs.Q.to_csv(args.out)
    scalars = {"dim": cfg.dim, "nodes": gs.grid.n, "q0": gs.q0, "mass": gs.mass,
               "gn_constant": gs.gn_constant, "e_crit": gs.e_crit, "residual": gs.residual}
    rep = report("ground-state", as_dict(cfg), check_ground_state(cfg, args.seed), args.seed,
                 scalars)
    sys.stdout.write("" if args.quiet else _dumps(rep))
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_linops(args) -> int:
    from .checks import check_linops

    cfg = _override(load(LinopsConfig, args.config), dim=args.dim)
    rep = report("linops", as_dict(cfg), check_linops(cfg, args.seed), args.seed)
    _emit(args, _dumps(rep))
    return EXIT_FAIL if args.verify and not rep["pass"] else EXIT_OK


def cmd_profile(args) -> int:
    from .checks import check_profile, default_profile
    from .profile import s000_residuals, solvability

    cfg = _override(load(ProfileConfig, args.config), dim=args.dim, sigma=args.sigma)
    checks = check_profile(cfg, args.seed)
    p = default_profile(cfg.dim, cfg.sigma)
    rec = {
        "dim": cfg.dim, "sigma": cfg.sigma, "alpha": p.alpha, "normalization": p.normalization,
        "betas": {"beta1": p.beta1, "beta2": p.beta2, "beta1_prime": p.beta1_prime},
        "residuals": s000_residuals(p), "solvability": list(solvability(p)), "fields": {},
    }
    if args.out:
        for name in ("P1_plus", "P2_plus", "P1_minus", "P2_minus"):
            path = _sibling(args.out, f"_{name}.csv")
            getattr(p, name).to_csv(path)
            rec["fields"][name] = path.name
    rep = report("profile", as_dict(cfg), checks, args.seed, rec)
    if args.out:
        Path(args.out).write_text(_dumps(_clean(rec)))
        sys.stdout.write("" if args.quiet else _dumps(rep))
    else:
        _emit(args, _dumps(rep))
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def _parse_table(spec: str):
    try:
        s0, s1, n = spec.split(",")
        s0, s1, n = float(s0), float(s1), int(n)
    except ValueError:
        raise ConfigError("--table expects s0,s1,n") from None
    if not (0 < s0 < s1) or n < 2:
        raise ConfigError("--table needs 0 < s0 < s1 and n >= 2")
    return s0, s1, n


def cmd_law(args) -> int:
    from .checks import check_law, default_ground_state
    from .law import b_app, invert_J, law_params, t_app
    from .profile import compute_betas

    cfg = _override(load(LawConfig, args.config), dim=args.dim, sigma=args.sigma, E0=args.E0)
    if bool(args.table) == bool(args.check):
        raise ConfigError("law: give exactly one of --check all or --table s0,s1,n")
    if args.table:
        table = _parse_table(args.table)
        gs = default_ground_state(cfg.dim, cfg.sigma)
        p = law_params(compute_betas(gs, cfg.sigma), cfg.sigma, cfg.E0, cfg.lambda0)
        rows = [(s, invert_J(s, p), b_app(s, p), t_app(s, p)) for s in np.geomspace(*table)]
        _emit(args, _csv_text(["s", "lambda_app", "b_app", "t_app"], rows))
        return EXIT_OK
    rep = report("law", as_dict(cfg), check_law(cfg, args.seed), args.seed)
    _emit(args, _dumps(rep))
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_simulate(args) -> int:
    from .simulator import SimulationError, rmin_sensitivity, run
    from .study import setup_blowup

    cfg = validate_blowup(load(BlowupConfig, args.config))
    out = Path(args.out or "trace.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    su = setup_blowup(cfg)
    try:
        tr = run(su.sim, su.u0)
    except SimulationError as exc:
        raise CheckFailure(str(exc)) from None
    tr.to_csv(out)
    snapdir = _sibling(out, "_snapshots")
    snapdir.mkdir(exist_ok=True)
    snaps = []
    for i, (t, u) in enumerate(tr.snapshots):
        name = f"snap_{i:04d}.csv"
        u.to_csv(snapdir / name)
        snaps.append({"t": t, "file": f"{snapdir.name}/{name}"})
    rec = {
        "config": as_dict(cfg), "status": tr.status, "steps": tr.steps, "rejected": tr.rejected,
        "lambda1": su.lambda1, "b1": su.b1, "s1": cfg.s1, "nodes": su.sim.grid.n,
        "mass_drift": tr.max_mass_drift(), "energy_drift": tr.max_energy_drift(),
        "energy_drift_kinetic": tr.max_energy_drift_kinetic(),
        "snapshots": snaps,
    }
    if args.rmin_report:
        rec["rmin_sensitivity"] = rmin_sensitivity(replace(su.sim, snapshot_times=()), su.initial_on)
    rec["config_hash"] = config_hash(_clean(as_dict(cfg)))
    _sibling(out, ".json").write_text(_dumps(_clean(rec)))
    _info(args, f"{tr.status}: {len(snaps)} snapshots, {tr.steps} steps -> {out}")
    return EXIT_OK


def _load_profile(path, dim: int, sigma: float):
    from .checks import default_profile

    rec = json.loads(Path(path).read_text())
    if int(rec["dim"]) != dim or float(rec["sigma"]) != sigma:
        raise ConfigError("profile dim/sigma do not match the simulation")
    p = default_profile(dim, sigma)
    for k, v in rec["betas"].items():
        if abs(getattr(p, k) - v) > 1e-12 * abs(v):
            raise ConfigError(f"profile file does not match this build ({k})")
    return p


def _decompose_rows(states, mod, law) -> list:
    from .modulation import eval_H, h1_norm

    rows = []
    for i, st in enumerate(states):
        m = mod[i - 1] if 0 < i < len(states) - 1 else (math.nan,) * 3
        rows.append((st.t, st.s, st.lam, st.b, st.gamma, eval_H(st, law), *m, h1_norm(st.eps)))
    return rows


MOD_COLUMNS = ["t", "s", "lambda", "b", "gamma", "H", "mod1", "mod2", "mod3", "eps_H1"]


def cmd_decompose(args) -> int:
    from .law import law_params
    from .modulation import DecompositionError, decompose_trace, mod_residual
    from .profile import compute_betas
    from .radial import RadialField

    cfg = load(DecomposeConfig, args.config)
    if not args.trace or not args.profile:
        raise ConfigError("decompose: --trace and --profile are required")
    run_path = _sibling(args.trace, ".json")
    try:
        rec = json.loads(run_path.read_text())
    except (OSError, json.JSONDecodeError):
        raise ConfigError(f"missing or unreadable run record {run_path}") from None
    sim = rec["config"]
    pr = _load_profile(args.profile, sim["dim"], sim["sigma"])
    base = run_path.parent
    snaps = [(s["t"], RadialField.from_csv(base / s["file"])) for s in rec["snapshots"]]
    try:
        states = decompose_trace(snaps, (rec["lambda1"], rec["b1"], 0.0), pr, s0=rec["s1"],
                                 delta=cfg.delta, tol=cfg.tol, max_iter=cfg.max_iter)
    except DecompositionError as exc:
        raise CheckFailure(str(exc)) from None
    law = law_params(compute_betas(pr.pair.gs, pr.sigma), pr.sigma, sim["E0"])
    mod = mod_residual(states, pr) if len(states) >= 3 else np.empty((0, 3))
    text = _csv_text(MOD_COLUMNS, _decompose_rows(states, mod, law))
    _emit(args, text)
    _info(args, f"decomposed {len(states)} snapshots")
    return EXIT_OK


def _read_mod_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        lam = np.array([float(r["lambda"]) for r in rows])
    except (OSError, KeyError, ValueError):
        raise ConfigError(f"cannot read decomposition CSV {path}") from None
    return t, lam


def rate_study(cfg: RateStudyConfig):
    """Samples, both fits and the checks of a rate study."""
    from .checks import below, default_ground_state
    from .law import invert_J, law_params, rate_exponent, s_of_t
    from .profile import compute_betas
    from .rates import RateError, fit_rate

    if cfg.source == "law":
        gs = default_ground_state(cfg.dim, cfg.sigma)
        p = law_params(compute_betas(gs, cfg.sigma), cfg.sigma, cfg.E0)
        t = -np.geomspace(-cfg.law_t[0], -cfg.law_t[1], cfg.law_samples)
        lam = np.array([invert_J(s_of_t(x, p), p) for x in t])
    else:
        t, lam = _read_mod_csv(cfg.input)
        keep = lam < lam[0] / cfg.transient_factor
        t, lam = t[keep], lam[keep]
        if t.size < 4:
            raise RateError("insufficient concentration")
    T = None if cfg.fit_T else 0.0
    fits = {m: fit_rate(t, lam, cfg.sigma, m, T=T, min_decades=cfg.min_decades) for m in "AB"}
    e1, _ = rate_exponent(cfg.sigma)
    checks = [
        below("leading_exponent", "lambda(t) ~ |t|^(1/(1+sigma)) |log|t||^(1/(2+2sigma))",
              abs(fits["A"].exponent - e1), cfg.exponent_tol),
        below("log_correction_improves_fit", "log-corrected fit beats the pure power law",
              fits["A"].rms / fits["B"].rms, 1.0),
    ]
    return t, lam, fits, checks


def cmd_rate_study(args) -> int:
    from .rates import RateError

    cfg = load(RateStudyConfig, args.config)
    if args.input:
        cfg = replace(cfg, input=args.input, source="decomposition")
    if cfg.source not in ("law", "decomposition"):
        raise ConfigError("config.source: expected 'law' or 'decomposition'")
    if cfg.source == "decomposition" and not cfg.input:
        raise ConfigError("rate-study: a decomposition CSV is required (config.input)")
    try:
        t, lam, fits, checks = rate_study(cfg)
    except RateError as exc:
        raise CheckFailure(str(exc)) from None
    extra = {m: f.to_dict() for m, f in fits.items()}
    rep = report("rate-study", as_dict(cfg), checks, args.seed, extra)
    if args.out:
        fa, fb = fits["A"], fits["B"]

        def model(f, x):
            tau = f.T - x
            shift = f.log_exponent * math.log(math.log(1 / tau)) if f.log_exponent else 0.0
            return math.exp(math.log(f.prefactor) + f.exponent * math.log(tau) + shift)

        rows = [(x, y, model(fa, x), model(fb, x)) for x, y in zip(t, lam)]
        _sibling(args.out, "_fit.csv").write_text(_csv_text(["t", "lambda", "fit_A", "fit_B"], rows))
    _emit(args, _dumps(rep))
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_verify(args) -> int:
    from .checks import RUNNERS

    scopes = SCOPES if args.scope == "all" else (args.scope,)
    sections = load_verify(args.config, scopes)
    checks = []
    for s in scopes:
        _info(args, f"verify {s}")
        for c in RUNNERS[s](sections[s], args.seed):
            checks.append(replace(c, name=f"{s}/{c.name}"))
    inputs = {"scope": args.scope, **{s: as_dict(sections[s]) for s in scopes}}
    rep = report("verify", inputs, checks, args.seed)
    _emit(args, _dumps(rep))
    failed = [c.name for c in checks if not c.passed]
    for name in failed:
        _info(args, f"FAIL {name}")
    return EXIT_FAIL if failed else EXIT_OK


# ------------------------------------------------------------------ parser

DEFAULTS = {
    "ground-state": GroundStateConfig, "linops": LinopsConfig, "profile": ProfileConfig,
    "law": LawConfig, "simulate": BlowupConfig, "decompose": DecomposeConfig,
    "rate-study": RateStudyConfig,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config naming every field of the schema")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    common.add_argument("--quiet", action="store_true", help="suppress progress and summaries")
    common.add_argument("--print-config", action="store_true",
                        help="print the default config for this command and exit")

    ap = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-state", parents=[common], help="solve for Q")
    p.add_argument("--dim", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_ground_state)

    p = sub.add_parser("linops", parents=[common], help="operator identities and coercivity")
    p.add_argument("--dim", type=int)
    p.add_argument("--verify", action="store_true", help="exit 1 if a check fails")
    p.set_defaults(func=cmd_linops)

    p = sub.add_parser("profile", parents=[common], help="first-order profile and betas")
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("law", parents=[common], help="blow-up law checks and tables")
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--E0", type=float)
    p.add_argument("--check", choices=["all"])
    p.add_argument("--table", metavar="S0,S1,N", help="geometric s grid for a CSV table")
    p.set_defaults(func=cmd_law)

    p = sub.add_parser("simulate", parents=[common], help="profile-driven blow-up run")
    p.add_argument("--rmin-report", action="store_true",
                   help="rerun with r_min halved and record the observable changes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", parents=[common], help="modulation decomposition of a run")
    p.add_argument("--trace", help="trace CSV written by simulate")
    p.add_argument("--profile", help="profile JSON written by profile")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("rate-study", parents=[common], help="fit the concentration rate")
    p.add_argument("--input", help="decomposition CSV (overrides config.input)")
    p.set_defaults(func=cmd_rate_study)

    p = sub.add_parser("verify", parents=[common], help="run module checks")
    p.add_argument("--scope", choices=[*SCOPES, "all"], default="all")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.print_config:
            if args.command == "verify":
                scopes = SCOPES if args.scope == "all" else (args.scope,)
                cfg = {s: as_dict(c) for s, c in load_verify(None, scopes).items()}
            else:
                cfg = as_dict(DEFAULTS[args.command]())
            sys.stdout.write(_dumps(cfg))
            return EXIT_OK
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"blowup-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailure as exc:
        print(f"blowup-lab: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
