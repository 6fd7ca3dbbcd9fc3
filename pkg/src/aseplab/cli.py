"""Command line front end.  Every command writes its CSV output next to a
JSON manifest holding the full parameter set, so a run can be replayed."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import pathlib
import re
import sys
from importlib import metadata

import numpy as np

from .config import ConfigError, LineConfig, SegmentConfig, build_extension
from .dynamics import WindowAbort

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_WINDOW = 3
EXIT_TABLE = 4


def _version() -> str:
    try:
        return metadata.version("aseplab")
    except metadata.PackageNotFoundError:
        return "unknown"


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_csv(path: pathlib.Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


class _Run:
    """Collects outputs and writes the manifest at the end."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.start = _now()
        self.outputs: list[str] = []
        self.summary: dict = {}
        self.out = pathlib.Path(args.out)

    def path(self, suffix: str) -> pathlib.Path:
        p = pathlib.Path(f"{self.out}{suffix}")
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p))
        return p

    def finish(self) -> None:
        params = {k: v for k, v in vars(self.args).items()
                  if k not in ("func", "config", "out", "command")}
        manifest = dict(command=self.command, parameters=params,
                        seed=getattr(self.args, "seed", None), version=_version(),
                        started=self.start, finished=_now(), outputs=self.outputs,
                        summary=self.summary)
        p = pathlib.Path(f"{self.out}.manifest.json")
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# -- init parsing ----------------------------------------------------------------------

def parse_init(text: str, N: int | None, p: float, horizon: float):
    """A configuration literal (segment "110@a=1" or line "E|110|F@0") or a
    family name: flat, half_flat, step, reversed_step (lines)."""
    from .experiments import flat_reach
    name = text.strip().lower().replace("-", "_")
    if name in ("flat", "half_flat", "halfflat"):
        reach = flat_reach(p, horizon) + (N or 0)
        return build_extension("half_flat" if "half" in name else "flat", reach=reach)
    if name == "step":
        return build_extension("step", at=0)
    if name == "reversed_step":
        return build_extension("reversed_step", Z=0)
    if "|" in text:
        return LineConfig.parse(text)
    return SegmentConfig.parse(text)


# -- commands ----------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .dynamics import evolve
    from .observables import DefectSet, HeightObserver, write_rows
    from .rng import ClockField
    run = _Run(args, "simulate")
    init = parse_init(args.init, args.N, args.p, args.horizon)
    names = [o for o in (args.observers or "").split(",") if o]
    observers = []
    for name in names:
        if name == "heights":
            if not isinstance(init, LineConfig):
                raise ConfigError("heights need a line configuration")
            half = (args.N or 16) // 2
            ys = range(-half, half + 1, max(half // 4, 1))
            ts = [args.horizon * f for f in (0.25, 0.5, 0.75, 1.0)]
            observers.append(HeightObserver([(y, t) for y in ys for t in ts]))
        elif name == "defects":
            if isinstance(init, SegmentConfig):
                from .config import xi_max
                target = xi_max(init.b, init.a, init.k)
            else:
                raise ConfigError("defects observer needs a segment configuration")
            observers.append(DefectSet(target))
        elif name != "events":
            raise ConfigError(f"unknown observer {name!r}")
    from .dynamics import RunSpec
    spec = RunSpec(margin=args.margin) if args.margin is not None else None
    tr = evolve(init, ClockField(args.seed, args.p, gauge=args.gauge), args.horizon, observers,
                spec=spec)
    tr.dump_events(run.path(".events.csv"))
    rows = [(0, "final", tr.final.literal())]
    for ob in observers:
        rows += [(0, n, v) for n, v in ob.rows()]
    write_rows(run.path(".observers.csv"), rows)
    swaps = int(np.count_nonzero(tr.events.action[:, 0] == 1))
    run.summary = dict(events=len(tr.events), swaps=swaps, final=tr.final.literal())
    run.finish()
    print(f"{len(tr.events)} events, {swaps} swaps; final {tr.final.literal()}")
    return EXIT_OK


def cmd_profile(args) -> int:
    from .experiments import PROFILE_COLUMNS, profile_run, side_events
    run = _Run(args, "profile")
    family = "half_flat" if args.family == "halfflat" else args.family
    rows = profile_run(family, args.N, args.p, _floats(args.c_grid), args.trials, args.seed,
                       alpha=args.alpha, exact=args.exact, jobs=args.jobs)
    _write_csv(run.path(".csv"), PROFILE_COLUMNS, [[r[c] for c in PROFILE_COLUMNS] for r in rows])
    if args.sides:
        s = side_events(family, args.N, args.p, _floats(args.c_grid), args.trials, args.seed + 2,
                        alpha=args.alpha, jobs=args.jobs)
        _write_csv(run.path(".sides.csv"),
                   ["c", "t", "particle", "particle_ci_lo", "particle_ci_hi",
                    "hole", "hole_ci_lo", "hole_ci_hi"],
                   [[float(s.c[j]), float(s.t[j]), float(s.particle[j]), *map(float, s.particle_ci[j]),
                     float(s.hole[j]), *map(float, s.hole_ci[j])] for j in range(s.c.size)])
    run.finish()
    for r in rows:
        th = "" if r["theory"] is None else f" theory {r['theory']:.3f}"
        ex = "" if r["exact"] is None else f" exact {r['exact']:.3f}"
        print(f"c={r['c']:+.2f} t={r['t']:.1f} lower {r['lower']:.3f} upper {r['upper']:.3f}{ex}{th}")
    return EXIT_OK


def cmd_oracle_tv(args) -> int:
    from .oracle import StateSpace, distribution_expm, exact_tv
    run = _Run(args, "oracle-tv")
    xi = SegmentConfig.parse(args.init)
    if (xi.a, xi.b) != (args.a, args.b) or (args.k is not None and xi.k != args.k):
        raise ConfigError("--init does not match --a/--b/--k")
    space = StateSpace(args.b, args.a, xi.k, args.p)
    pi = space.closed_form()
    rows = []
    for t in _floats(args.t_grid):
        d = exact_tv(space, xi, t, args.tol)
        row = [t, d]
        if args.check_expm:
            row.append(0.5 * float(np.abs(distribution_expm(space, xi, t) - pi).sum()))
        rows.append(row)
    header = ["t", "tv"] + (["tv_expm"] if args.check_expm else [])
    _write_csv(run.path(".csv"), header, rows)
    run.summary = dict(states=space.size)
    run.finish()
    for r in rows:
        print(" ".join(f"{v:.10g}" for v in r))
    return EXIT_OK


def cmd_kpz(args) -> int:
    from .experiments import kpz_onepoint_run
    run = _Run(args, "kpz")
    cls = "half_flat" if args.init_class == "halfflat" else args.init_class
    res = kpz_onepoint_run(cls, args.N, args.trials, args.seed, p=args.p, jobs=args.jobs)
    _write_csv(run.path(".csv"), ["trial", "rescaled_height"],
               [[m, float(v)] for m, v in enumerate(res.values)])
    run.summary = dict(t=res.t, reference=res.reference, ks=res.ks, ks_raw=res.ks_raw,
                       alt_reference=res.alt_reference, alt_ks=res.alt_ks,
                       mean=float(res.values.mean()), sd=float(res.values.std()))
    run.finish()
    msg = f"{cls}: mean {res.values.mean():.3f} sd {res.values.std():.3f}"
    if res.ks is not None:
        msg += f"; KS vs {res.reference} {res.ks:.4f} (raw {res.ks_raw:.4f})"
    if res.alt_ks is not None:
        msg += f"; KS vs {res.alt_reference} {res.alt_ks:.4f}"
    print(msg)
    return EXIT_OK


def cmd_hitting(args) -> int:
    from .observables import coupled_hitting
    from .rng import ClockField
    run = _Run(args, "hitting")
    xi = SegmentConfig.parse(args.init)
    g, H = coupled_hitting(xi, ClockField(args.seed, args.p, gauge=args.gauge), args.horizon,
                           args.trials, check=False)
    _write_csv(run.path(".csv"), ["trial", "g", "H"],
               [[m, None if math.isnan(a) else float(a), None if math.isnan(b) else float(b)]
                for m, (a, b) in enumerate(zip(g, H))])
    viol = int(np.count_nonzero(np.isfinite(H) & ~(g <= H)))
    run.summary = dict(mean_g=float(np.nanmean(g)), mean_H=float(np.nanmean(H)),
                       censored_g=int(np.isnan(g).sum()), censored_H=int(np.isnan(H).sum()),
                       violations=viol)
    run.finish()
    print(f"mean g {np.nanmean(g):.4f}, mean H {np.nanmean(H):.4f}, "
          f"censored {int(np.isnan(g).sum())}/{int(np.isnan(H).sum())}, g > H in {viol}")
    return EXIT_OK


def cmd_overtake(args) -> int:
    from .experiments import overtake_family
    from .observables import overtake_sups
    from .rng import ClockField
    run = _Run(args, "overtake")
    if args.family:
        eta = overtake_family(args.family, args.N)
        which = "M" if args.family == "thm61" else "Mprime"
    else:
        if not args.init:
            raise ConfigError("give --family or --init")
        eta = LineConfig.parse(args.init)
        which = args.which
    sups = overtake_sups(eta, ClockField(args.seed, args.p, gauge=args.gauge), args.horizon, args.trials, which)
    _write_csv(run.path(".csv"), ["trial", "sup"], [[m, int(s)] for m, s in enumerate(sups)])
    over = int(np.count_nonzero(sups > args.threshold)) if args.threshold is not None else None
    run.summary = dict(max=int(sups.max()), mean=float(sups.mean()), exceed=over)
    run.finish()
    msg = f"sup over trials: max {int(sups.max())}, mean {sups.mean():.3f}"
    if over is not None:
        msg += f"; {over}/{args.trials} above {args.threshold:g}"
    print(msg)
    return EXIT_OK


def cmd_stationary_sample(args) -> int:
    from .stationary import sample_stationary_array
    run = _Run(args, "stationary-sample")
    rows = sample_stationary_array(args.b, args.a, args.k, args.p, args.count, args.seed)
    _write_csv(run.path(".csv"), ["sample", "config"],
               [[m, "".join(map(str, r))] for m, r in enumerate(rows)])
    run.finish()
    print(f"{args.count} samples written")
    return EXIT_OK


def cmd_acceptance(args) -> int:
    from . import acceptance
    run = _Run(args, "acceptance")
    numbers = args.criterion or sorted(acceptance.CRITERIA)
    results = []
    for n in numbers:
        out = acceptance.run(n)
        print(out.line(), flush=True)
        results.append(out)
    _write_csv(run.path(".csv"), ["criterion", "title", "passed", "seconds", "summary"],
               [[o.number, o.title, int(o.passed), round(o.seconds, 1), o.summary] for o in results])
    run.summary = {str(o.number): o.passed for o in results}
    run.finish()
    return EXIT_OK if all(o.passed for o in results) else EXIT_FAILED


def manifest_argv(manifest: dict, out: str) -> list[str]:
    """Command line that reproduces the run recorded in ``manifest``."""
    argv = [manifest["command"]]
    for k, v in sorted(manifest["parameters"].items()):
        flag = "--" + k.replace("_", "-")
        if v is None or v is False:
            continue
        if v is True:
            argv.append(flag)
        elif isinstance(v, list):
            argv += [f"{flag}={x}" for x in v]
        else:
            argv.append(f"{flag}={v}")     # "=" keeps values like "-4,0,4" attached
    return argv + ["--out", out]


def cmd_replay(args) -> int:
    manifest = json.loads(pathlib.Path(args.manifest).read_text())
    argv = manifest_argv(manifest, args.out)
    print("replaying:", " ".join(argv))
    return main(argv)


# -- parser ----------------------------------------------------------------------------------

def _gauge(sp):
    sp.add_argument("--gauge", choices=["basic", "literal"], default="basic",
                    help="clock realization (default: %(default)s)")


def _common(sp, seed=True, jobs=False):
    sp.add_argument("--config", help="key=value file; explicit flags win")
    sp.add_argument("--out", default="aseplab_out", help="output prefix (default: %(default)s)")
    if seed:
        sp.add_argument("--seed", type=int, default=0)
    if jobs:
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for trials")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aseplab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="one trajectory with an event log")
    _common(sp)
    sp.add_argument("--init", required=True, help="literal or family (flat, half_flat, step, reversed_step)")
    sp.add_argument("--N", type=int, default=None)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--horizon", type=float, default=10.0)
    sp.add_argument("--observers", default="events", help="comma list: events, heights, defects")
    sp.add_argument("--margin", type=int, default=None, help="override the line window margin")
    _gauge(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("profile", help="TV band for a cutoff family")
    _common(sp, jobs=True)
    sp.add_argument("--family", required=True, choices=["flat", "halfflat", "step"])
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--c-grid", default="-4,-2,0,2,4")
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--exact", action="store_true", default=None, help="add the exact column")
    sp.add_argument("--sides", action="store_true", help="also write particle/hole events")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("oracle-tv", help="exact d(t) on a small segment")
    _common(sp, seed=False)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--a", type=int, default=1)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--init", required=True, help='segment literal, e.g. "111000@a=1"')
    sp.add_argument("--t-grid", default="0,1,2,4,8")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--check-expm", action="store_true", help="add a dense expm column")
    sp.set_defaults(func=cmd_oracle_tv)

    sp = sub.add_parser("kpz", help="one-point rescaled height law")
    _common(sp, jobs=True)
    sp.add_argument("--init-class", "--class", dest="init_class", required=True,
                    choices=["step", "flat", "halfflat"])
    sp.add_argument("--N", type=int, default=200)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--trials", type=int, default=2000)
    sp.set_defaults(func=cmd_kpz)

    sp = sub.add_parser("hitting", help="coupled hitting times g and H")
    _common(sp)
    sp.add_argument("--init", required=True)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--horizon", type=float, default=1000.0)
    sp.add_argument("--trials", type=int, default=1000)
    _gauge(sp)
    sp.set_defaults(func=cmd_hitting)

    sp = sub.add_parser("overtake", help="running maxima of the overtaking counts")
    _common(sp)
    sp.add_argument("--family", choices=["thm61", "cor62"])
    sp.add_argument("--init", help="species line literal")
    sp.add_argument("--which", choices=["M", "Mprime"], default="M")
    sp.add_argument("--N", type=int, default=512)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--horizon", type=float, default=1000.0)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--threshold", type=float, default=None)
    _gauge(sp)
    sp.set_defaults(func=cmd_overtake)

    sp = sub.add_parser("stationary-sample", help="exact draws from the segment invariant law")
    _common(sp)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--a", type=int, default=1)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--p", type=float, default=0.75)
    sp.add_argument("--count", type=int, default=1000)
    sp.set_defaults(func=cmd_stationary_sample)

    sp = sub.add_parser("acceptance", help="run acceptance checks, one PASS/FAIL line each")
    _common(sp, seed=False)
    sp.add_argument("--criterion", type=int, action="append", choices=range(1, 11),
                    metavar="N", help="criterion number 1-10 (repeatable; default all)")
    sp.set_defaults(func=cmd_acceptance)

    sp = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", required=True, help="output prefix for the rerun")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_replay)
    return ap


def _read_config(path: str) -> list[str]:
    """key=value lines as --key value flags (comments with #)."""
    flags = []
    for line in pathlib.Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        flag = "--" + k.replace("_", "-")
        if v.lower() in ("true", "yes"):
            flags.append(flag)
        elif v.lower() not in ("false", "no"):
            flags.append(f"{flag}={v}")
    return flags


_GRID_FLAGS = ("--c-grid", "--t-grid")


def _attach_grids(argv: list[str]) -> list[str]:
    """Glue "--c-grid -4,0,4" into "--c-grid=-4,0,4" so argparse does not
    take the grid for an option."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _GRID_FLAGS and i + 1 < len(argv) and re.match(r"-[\d.]", argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    from .experiments import TableChecksumError
    argv = _attach_grids(list(sys.argv[1:] if argv is None else argv))
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if known.config and argv and argv[0] != "replay":
        try:
            extra = _read_config(known.config)
        except (OSError, ConfigError) as exc:
            print(f"aseplab: {exc}", file=sys.stderr)
            return EXIT_USAGE
        # config first, explicit flags after so they win
        argv = [argv[0]] + extra + argv[1:]
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except WindowAbort as exc:
        print(f"aseplab: window abort: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except TableChecksumError as exc:
        print(f"aseplab: reference table: {exc}", file=sys.stderr)
        return EXIT_TABLE
    except (ConfigError, ValueError) as exc:
        print(f"aseplab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
