"""rdlab command line: regions, BOHO curves, simulations and invariant suites.

Exit codes: 0 ok, 1 a gate or check failed, 2 usage or parse error,
3 infeasible parameters.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from ._parallel import resolve_threads
from ._validation import InfeasibleError
from .textio import KeyValues, ParseError, fmt_value, parse_kv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
SCHEMES = ("cc", "bt", "btsi", "flmc", "mcml")

# per-scheme sweep keys: name -> reader
_INT, _FLOAT, _INTS, _FLOATS, _BOOL = "int", "float", "ints", "floats", "bool"
_SPEC_KEYS = {"n_specs": _INT, "w_size": _INT, "u_sizes": _INTS, "seed": _INT, "hull": _BOOL}
SWEEP_KEYS = {
    "cc": _SPEC_KEYS,
    "bt": _SPEC_KEYS,
    "btsi": {"n_specs": _INT, "u_sizes": _INTS, "seed": _INT, "hull": _BOOL},
    "flmc": {**_SPEC_KEYS, "n_values": _FLOATS, "taus": _FLOATS, "tau_exponent": _FLOAT,
             "max_eps": _FLOAT, "max_s": _INT, "enforce_ranges": _BOOL, "f1": _INTS,
             "f2": _INTS},
    "mcml": {**_SPEC_KEYS, "n": _INT, "tau": _FLOAT, "f1": _INTS, "f2": _INTS},
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to our exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(text: str) -> int:
    try:
        return resolve_threads(int(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid thread count {text!r}") from None


def _read_sweep(path: str | None, scheme: str) -> dict:
    if path is None:
        return {}
    kv: KeyValues = parse_kv(Path(path).read_text(encoding="utf-8"), path)
    keys = SWEEP_KEYS[scheme]
    out = {}
    for key in kv.keys():
        kind = keys.get(key)
        if kind is None:
            raise kv._error(key, f"unknown sweep key for scheme {scheme}")
        out[key] = {_INT: kv.get_int, _FLOAT: kv.get_float, _INTS: kv.get_ints,
                    _FLOATS: kv.get_floats, _BOOL: kv.get_bool}[kind](key)
    return out


def _outputs(out: str) -> tuple[Path, Path, Path]:
    p = Path(out)
    return p, Path(f"{out}.prov"), Path(f"{out}.manifest")


def _write_manifest(path: Path, argv, config, inputs, outputs, seed=None) -> None:
    from .manifest import RunManifest

    RunManifest(["rdlab", *argv], list(config), seed, list(inputs),
                [str(o) for o in outputs]).write(str(path))


def _summary(label: str, boundary) -> str:
    pts = boundary.points
    return (f"{label}: {len(boundary)} boundary points, r1 in [{pts[:, 0].min():.6g}, "
            f"{pts[:, 0].max():.6g}], r2 in [{pts[:, 1].min():.6g}, {pts[:, 1].max():.6g}] bits")


def _boho_eps(spec: str) -> float | None:
    from .source import boho_spec_params

    return boho_spec_params(spec)["eps"] if spec.startswith("boho:") else None


def _estimator(scheme: str, source_spec: str, sweep: dict, args):
    from .components import make_pair
    from .regions import estimators as est
    from .source import load_side_info_source, load_source

    common = {"d1": args.d1, "d2": args.d2, "threads": args.threads}
    if scheme == "btsi":
        if args.swap_symmetrize:
            raise ValueError("--swap-symmetrize is not supported for btsi")
        return load_side_info_source(source_spec), est.BTSIRegion(**common, **sweep)
    src = load_source(source_spec)
    eps = _boho_eps(source_spec)
    if scheme in ("flmc", "mcml"):
        from .boho import EPS_MAX

        if eps is not None and eps > EPS_MAX:
            raise InfeasibleError(f"B(eps) empty for eps={eps:g} > 1/3")
        f1, f2 = sweep.pop("f1", None), sweep.pop("f2", None)
        if (f1 is None) != (f2 is None):
            raise ValueError("sweep must give both f1 and f2 or neither")
        if f1 is None and eps is not None and eps > 0:
            f1, f2 = [0, 1], [0, 0, 1, 1]  # the helper's noisy copy of x
        if f1 is not None:
            sweep["components"] = make_pair(src, f1, f2)
        if scheme == "mcml":
            if args.swap_symmetrize:
                raise ValueError("--swap-symmetrize is not supported for mcml")
            return src, est.MCMLRegion(**common, **sweep)
        if "n_values" in sweep:
            sweep["n_values"] = tuple(sweep["n_values"])
        return src, est.FLMCRegion(**common, swap=args.swap_symmetrize, **sweep)
    cls = est.CCRegion if scheme == "cc" else est.BTRegion
    return src, cls(**common, swap=args.swap_symmetrize, **sweep)


def cmd_region(args, argv) -> int:
    from .regions.boundary import boundary_rows, render_csv, render_provenance

    sweep = _read_sweep(args.sweep, args.scheme)
    source, model = _estimator(args.scheme, args.source, dict(sweep), args)
    model.fit(source)
    csv_path, prov_path, man_path = _outputs(args.out)
    rows, prov = boundary_rows(model.boundary_, args.scheme)
    csv_path.write_text(render_csv(rows), encoding="utf-8")
    prov_path.write_text(render_provenance(prov, man_path.name), encoding="utf-8")
    config = [("scheme", args.scheme), ("d1", args.d1), ("d2", args.d2),
              ("swap_symmetrize", args.swap_symmetrize)]
    config += [(f"sweep.{k}", v) for k, v in sorted(sweep.items())]
    inputs = [args.source] + ([args.sweep] if args.sweep else [])
    _write_manifest(man_path, argv, config, inputs, [csv_path, prov_path],
                    sweep.get("seed", 0))
    print(_summary(args.scheme, model.boundary_))
    return EXIT_OK


def _boho_grid(args):
    from .boho import BohoGrid

    return BohoGrid(args.delta_count, (args.delta_min, args.delta_max), args.n_count,
                    args.tau_count, args.delta1_count,
                    tuple(args.n_value) if args.n_value else None)


def cmd_boho(args, argv) -> int:
    from .boho import EPS_MAX, boho_region_sweep
    from .regions.boundary import boundary_rows, render_csv, render_provenance

    if not 0 < args.p < 0.5:
        raise ValueError("--p must lie in (0, 1/2)")
    if args.d2max <= 0:
        raise ValueError("--d2max must be positive")
    eps_list = args.eps or [0.0]
    for eps in eps_list:
        if eps < 0:
            raise ValueError(f"--eps {eps:g} is negative")
    grid = _boho_grid(args)
    if not args.n_value:
        grid = grid.with_shared_n(eps_list)
    extra = ["epsilon", "delta", "delta1"]
    rows, prov, lines = [], {}, []
    for eps in eps_list:
        if eps > EPS_MAX:
            print(f"warning: eps={eps:g} exceeds 1/3, B(eps) is empty; curve omitted",
                  file=sys.stderr)
            continue
        try:
            b = boho_region_sweep(args.p, eps, args.d2max, grid, hull=not args.no_hull)
        except InfeasibleError as exc:
            print(f"warning: eps={eps:g}: {exc}; curve omitted", file=sys.stderr)
            continue
        r, pv = boundary_rows(b, "boho", start_id=len(rows) + 1, extra=extra)
        rows += r
        prov.update(pv)
        lines.append(_summary(f"eps={eps:g}", b))
    if not rows:
        raise InfeasibleError("every requested curve is empty")
    csv_path, prov_path, man_path = _outputs(args.out)
    csv_path.write_text(render_csv(rows, extra), encoding="utf-8")
    prov_path.write_text(render_provenance(prov, man_path.name), encoding="utf-8")
    config = [("p", args.p), ("eps", eps_list), ("d2max", args.d2max),
              ("delta_count", grid.delta_count), ("delta_range", list(grid.delta_range)),
              ("n_count", grid.n_count), ("tau_count", grid.tau_count),
              ("delta1_count", grid.delta1_count), ("n_values", list(grid.n_values or [])),
              ("hull", not args.no_hull)]
    _write_manifest(man_path, argv, config, [], [csv_path, prov_path])
    print("\n".join(lines))
    return EXIT_OK


def cmd_sim(args, argv) -> int:
    from .sim.report import SimConfig
    from .sim.runner import run_sim

    cfg = SimConfig.from_text(Path(args.config).read_text(encoding="utf-8"), args.config)
    if cfg.kind != args.kind:
        raise ParseError(f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}",
                         source=args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    rep = run_sim(cfg, args.threads)
    out = Path(args.out)
    trials, man_path = Path(f"{args.out}.trials.csv"), Path(f"{args.out}.manifest")
    out.write_text(rep.to_text(man_path.name), encoding="utf-8")
    trials.write_text(rep.trials_csv(), encoding="utf-8")
    inputs = [args.config] + ([] if cfg.source.startswith("boho:") else [cfg.source])
    _write_manifest(man_path, argv, cfg.items(), inputs, [out, trials], cfg.seed)
    for name, ok, margin in rep.gates:
        print(f"{name}: {'pass' if ok else 'FAIL'} (margin {fmt_value(margin)})")
    if not rep.passed:
        print(f"failed gates: {', '.join(rep.failures())}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_check(args, argv) -> int:
    from .checks import render_table, run_suite

    results = run_suite(args.suite, args.threads)
    table = render_table(results)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        _write_manifest(Path(f"{args.out}.manifest"), argv, [("suite", args.suite)], [],
                        [args.out])
    sys.stdout.write(table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rdlab", description=__doc__.splitlines()[0],
                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--version", action="version", version=f"rdlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    thr = dict(type=_threads, default=None,
               help="worker cap (falls back to RDLAB_THREADS); never changes output bytes")

    r = sub.add_parser("region", help="inner-bound region boundary for one scheme",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    r.add_argument("scheme", choices=SCHEMES)
    r.add_argument("source", help="source file, or a built-in name like boho:p=0.3,eps=0")
    r.add_argument("sweep", nargs="?", help="key-value sweep file with scheme-specific settings")
    r.add_argument("--d1", type=float, required=True, help="distortion target of decoder 1")
    r.add_argument("--d2", type=float, required=True, help="distortion target of decoder 2")
    r.add_argument("--out", required=True, help="boundary CSV; .prov and .manifest sidecars")
    r.add_argument("--swap-symmetrize", action="store_true",
                   help="also sweep with the encoders exchanged and merge")
    r.add_argument("--threads", **thr)
    r.set_defaults(func=cmd_region)

    b = sub.add_parser("boho", help="BOHO boundaries for several epsilons in one CSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    b.add_argument("--p", type=float, required=True, help="Bernoulli parameter of Z")
    b.add_argument("--eps", type=float, action="append",
                   help="component mismatch probability; repeat for several curves (default 0)")
    b.add_argument("--d2max", type=float, required=True, help="distortion cap of decoder 2")
    b.add_argument("--delta-count", type=int, default=64)
    b.add_argument("--delta-min", type=float, default=0.01)
    b.add_argument("--delta-max", type=float, default=0.49)
    b.add_argument("--n-count", type=int, default=32, help="blocklengths per epsilon")
    b.add_argument("--n-value", type=int, action="append",
                   help="explicit blocklength; repeat to replace the automatic grid")
    b.add_argument("--tau-count", type=int, default=16)
    b.add_argument("--delta1-count", type=int, default=64)
    b.add_argument("--no-hull", action="store_true", help="keep non-convex Pareto corners")
    b.add_argument("--out", required=True, help="multi-curve CSV; .prov and .manifest sidecars")
    b.set_defaults(func=cmd_boho)

    s = sub.add_parser("sim", help="run a finite-length simulation config",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("kind", choices=("quantizer", "correction", "interleave", "boho"))
    s.add_argument("config", help="key-value simulation config")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.add_argument("--out", required=True, help="report; .trials.csv and .manifest sidecars")
    s.add_argument("--threads", **thr)
    s.set_defaults(func=cmd_sim)

    c = sub.add_parser("check", help="run invariant suites and print a margin table",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    c.add_argument("--suite", choices=("continuity", "typicality", "containment", "all"),
                   default="all")
    c.add_argument("--out", default=None, help="also write the table here")
    c.add_argument("--threads", **thr)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:  # InfeasibleError, StructureViolation and bad parameters
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
