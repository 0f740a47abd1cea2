#!/usr/bin/env python3
"""
fracjac command line
Norms, pairings, degrees, flat norms, level-set tracing and verification
experiments from option strings or a JSON run configuration. Structured
results go to stdout as sorted JSON; every run is appended to the run log.
"""
import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger
from tabulate import tabulate

import config
from atom_importer import AtomImporter
from degree import (
    degree_all,
    degree_boundary,
    degree_changevar,
    degree_preimage,
    disk_set,
    parse_set_spec,
)
from domain_field import Domain, parse_domain_spec
from errors import ConfigError, FracJacError
from field_library import parse_field_spec
from frac_norms import NormParams, compute_norm, extrapolated_seminorm
from jacobian_core import (
    Mollifier,
    bump,
    bump_integral,
    indicator,
    mollified_extension,
    pairing_both,
    parse_test_spec,
    sphere_pairing,
)
from levelset_trace import (
    audit_endpoints,
    drifting_slab,
    dump_curves,
    static_slab,
    trace_family,
)
from measures import atomic_from_regular_value, flat_norm
from options import parse_option_string, parse_vector, take
from report_generator import PDF_AVAILABLE, ReportGenerator
from run_log_db import RunLogDB
from verify import (
    ASampler,
    cauchy_experiment,
    coarea_extension_experiment,
    holder_chain_experiment,
    layer_cake_experiment,
    parse_change_of_variables,
    stability_experiment,
    stability_sweep_experiment,
    strong_chain_experiment,
    strong_coarea_experiment,
    ua_continuity_experiment,
    weak_chain_experiment,
    weak_coarea_experiment,
)
from workers import resolve_workers

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

COMMANDS = ("norm", "pairing", "extend", "degree", "flatnorm", "trace", "verify", "runs", "report")
EXPERIMENTS = ("weak_coarea", "weak_chain", "strong_chain", "strong_coarea", "holder_chain",
               "ua_continuity", "stability", "stability_sweep", "layer_cake", "cauchy",
               "coarea_extension")
VOLATILE_KEYS = {"runtime_ms", "created_at"}


@dataclass
class RunConfig:
    """
    One run's inputs. Unknown keys are rejected; None entries are omitted
    from the serialized form, so from_dict(to_dict()) is the identity.
    """
    command: str
    experiment: Optional[str] = None
    field: Optional[str] = None
    domain: Optional[str] = None
    test: Optional[str] = None
    F: Optional[str] = None
    set: Optional[str] = None
    perturbation: Optional[str] = None
    other: Optional[str] = None
    extension: Optional[str] = None
    profile: Optional[str] = None
    method: Optional[str] = None
    atoms: Optional[str] = None
    a: Optional[List[float]] = None
    x: Optional[List[float]] = None
    t: Optional[float] = None
    s: Optional[float] = None
    p: Optional[float] = None
    alpha: Optional[float] = None
    seed: Optional[int] = None
    samples: Optional[int] = None
    family_size: Optional[int] = None
    levels: Optional[int] = None
    targets: Optional[int] = None
    radius: Optional[float] = None
    scales: Optional[List[float]] = None
    slab: Optional[List[float]] = None
    tolerances: Optional[Dict[str, float]] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        Raises:
            ConfigError: unknown key or missing command
        """
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"Unknown config key '{key}'", key=key)
        if not data.get("command"):
            raise ConfigError("Run configuration needs a command", key="command")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=_json_default)
        return hashlib.sha256(text.encode()).hexdigest()


def _json_default(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Not JSON serializable: {type(value).__name__}")


def _strip_volatile(value):
    if isinstance(value, dict):
        return {k: _strip_volatile(v) for k, v in value.items() if k not in VOLATILE_KEYS}
    if isinstance(value, list):
        return [_strip_volatile(v) for v in value]
    return value


def dumps(result: Any, timestamps: bool = True) -> str:
    """Sorted JSON; timestamps and runtimes removed unless requested"""
    payload = result if timestamps else _strip_volatile(json.loads(json.dumps(result, default=_json_default)))
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default)


def load_run_config(path: str) -> Dict[str, Any]:
    """
    Raises:
        ConfigError: unreadable or non-object JSON
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}", key="config")
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}", key="config")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object", key="config")
    return data


# ---------------------------------------------------------------------------
# Building inputs
# ---------------------------------------------------------------------------

def _kwargs(**items) -> Dict[str, Any]:
    return {k: v for k, v in items.items() if v is not None}


def _vector(value, key: str) -> Optional[np.ndarray]:
    if value is None:
        return None
    if isinstance(value, str):
        value = parse_vector(value, key)
    return np.asarray(value, dtype=float)


def build_domain(cfg: RunConfig) -> Domain:
    return parse_domain_spec(cfg.domain or "square")


def build_test(cfg: RunConfig, domain: Domain):
    return parse_test_spec(cfg.test or "bump", domain)


def default_set(domain: Domain):
    lo, hi = (np.asarray(v, dtype=float) for v in domain.bounding_box())
    return disk_set(tuple((lo + hi) / 2), 0.25 * float(np.min(hi - lo)), nodes=2048)


def build_slab(cfg: RunConfig, domain: Domain):
    """Slab field U(x, t): mollified extension (default), static, or drift:c=..."""
    spec = cfg.extension or "mollified"
    name, opts = parse_option_string(spec)
    if name == "drift":
        take(opts, spec, {"c"})
        return drifting_slab(domain, opts.get("c", (1.0, 0.0)))
    u = parse_field_spec(cfg.field or "identity")
    if name == "static":
        take(opts, spec, set())
        return static_slab(u, domain)
    if name == "mollified":
        take(opts, spec, set())
        return mollified_extension(u, Mollifier(domain.dimension, cfg.profile or "exponential"), domain)
    raise ConfigError(f"Unknown extension '{name}' in {spec!r}", key="extension")


def slab_sampler(U, slab, seed: int, slices: int = 5, inflation: float = 0.0) -> ASampler:
    """Bounding box of U over the domain nodes on a few slices of the slab"""
    ts = np.linspace(slab[0], slab[1], slices)
    values = np.concatenate([U.slice(t)(U.domain.nodes) for t in ts])
    lo, hi = values.min(axis=0), values.max(axis=0)
    pad = inflation * float(np.linalg.norm(hi - lo))
    return ASampler(tuple((lo - pad).tolist()), tuple((hi + pad).tolist()), seed)


def run_experiment(cfg: RunConfig, workers: int):
    """Dispatch one verification experiment from its configuration"""
    name = cfg.experiment
    if name not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment '{name}'. Available: {', '.join(EXPERIMENTS)}", key="experiment")
    seed = config.DEFAULT_SEED if cfg.seed is None else int(cfg.seed)
    domain = build_domain(cfg)
    tol = cfg.tolerances

    if name in ("cauchy", "coarea_extension"):
        U = build_slab(cfg, domain)
        slab = tuple(cfg.slab or (0.05, 0.1))
        if name == "cauchy":
            sampler = slab_sampler(U, slab, seed, inflation=-0.1)
            return cauchy_experiment(U, sampler.draw(cfg.targets or 20), slab[0], slab[1], tolerance=tol)
        sampler = slab_sampler(U, slab, seed, inflation=config.SAMPLER_INFLATION)
        return coarea_extension_experiment(U, slab, sampler, **_kwargs(samples=cfg.samples, workers=workers,
                                                                       tolerance=tol))

    u = parse_field_spec(cfg.field or "identity")
    if name == "ua_continuity":
        w = parse_field_spec(cfg.perturbation or "quadratic")
        return ua_continuity_experiment(u, w, domain, **_kwargs(scales=cfg.scales, s=cfg.s, p=cfg.p,
                                                                radius=cfg.radius, samples=cfg.samples,
                                                                seed=seed, workers=workers))
    if name == "strong_coarea":
        sampler = ASampler.default_for(u, None, domain, seed)
        return strong_coarea_experiment(u, domain, sampler, **_kwargs(samples=cfg.samples,
                                                                      family_size=cfg.family_size,
                                                                      workers=workers, tolerance=tol))
    if name == "holder_chain":
        region = parse_set_spec(cfg.set) if cfg.set else default_set(domain)
        F = parse_change_of_variables(cfg.F or "identity")
        sampler = ASampler.default_for(u, indicator(region), domain, seed)
        return holder_chain_experiment(u, F, region, domain, sampler,
                                       **_kwargs(samples=cfg.samples, scales=cfg.scales, profile=cfg.profile,
                                                 holder_alpha=cfg.alpha, tolerance=tol))

    psi = build_test(cfg, domain)
    psi.check_support(domain)
    if name in ("stability", "stability_sweep"):
        if cfg.other:
            return stability_experiment(u, parse_field_spec(cfg.other), psi, domain,
                                        **_kwargs(alpha=cfg.alpha, workers=workers))
        w = parse_field_spec(cfg.perturbation or "quadratic")
        return stability_sweep_experiment(u, w, psi, domain,
                                          **_kwargs(scales=cfg.scales, alpha=cfg.alpha, workers=workers))
    if name == "strong_chain":
        F = parse_change_of_variables(cfg.F or "identity")
        return strong_chain_experiment(u, F, psi, domain, tolerance=tol)

    sampler = ASampler.default_for(u, psi, domain, seed)
    if name == "layer_cake":
        return layer_cake_experiment(u, psi, domain, sampler, **_kwargs(samples=cfg.samples, levels=cfg.levels,
                                                                        workers=workers, tolerance=tol))
    common = _kwargs(samples=cfg.samples, workers=workers, scales=cfg.scales, profile=cfg.profile, tolerance=tol)
    if name == "weak_chain":
        return weak_chain_experiment(u, parse_change_of_variables(cfg.F or "identity"), psi, domain, sampler,
                                     **common)
    return weak_coarea_experiment(u, psi, domain, sampler, **common)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_norm(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    u = parse_field_spec(cfg.field or "identity")
    params = NormParams(cfg.s if cfg.s is not None else 0.5, cfg.p if cfg.p is not None else 2.0,
                        cfg.alpha).validate()
    record = compute_norm(u, domain, params, workers)
    if args.extrapolate:
        record["extrapolated"] = extrapolated_seminorm(u, domain, params.s, params.p, workers)
    record.update({"field": u.name, "domain": domain.describe()})
    return record, EXIT_PASS


def cmd_pairing(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    u = parse_field_spec(cfg.field or "identity")
    psi = build_test(cfg, domain)
    psi.check_support(domain)
    record = {"field": u.name, "test": psi.name, "domain": domain.describe(),
              "pairing": pairing_both(u, psi, domain)}
    if cfg.a is not None:
        value, excluded = sphere_pairing(u, _vector(cfg.a, "a"), psi, domain)
        record["sphere"] = {"a": list(cfg.a), "value": value, "excluded_nodes": excluded}
    return record, EXIT_PASS


def cmd_extend(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    if cfg.x is None or cfg.t is None:
        raise ConfigError("extend needs --x and --t", key="x")
    U = build_slab(cfg, domain)
    x = _vector(cfg.x, "x")
    return {
        "field": U.name,
        "x": x.tolist(),
        "t": float(cfg.t),
        "value": np.asarray(U.evaluate(x, cfg.t)).tolist(),
        "joint_gradient": np.asarray(U.joint_gradient(x, cfg.t)).tolist(),
    }, EXIT_PASS


def cmd_degree(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    u = parse_field_spec(cfg.field or "identity")
    if cfg.a is None:
        raise ConfigError("degree needs a target --a", key="a")
    a = _vector(cfg.a, "a")
    method = cfg.method or "all"
    record = {"field": u.name, "domain": domain.describe(), "a": a.tolist(), "method": method}
    if method == "all":
        record.update(degree_all(u, domain, a))
        return record, EXIT_PASS if record["agree"] else EXIT_FAIL
    if method == "preimage":
        record["result"] = degree_preimage(u, domain, a).to_dict()
    elif method == "boundary":
        record["result"] = degree_boundary(u, domain, a).to_dict()
    elif method == "changevar":
        radius = cfg.radius or 0.2
        value = degree_changevar(u, domain, bump(tuple(a), radius))
        mass = bump_integral(radius, n=domain.dimension)
        record["result"] = {"value": value, "bump_mass": mass, "ratio": value / mass}
    else:
        raise ConfigError(f"Unknown degree method '{method}'", key="method")
    return record, EXIT_PASS


def cmd_flatnorm(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    if cfg.atoms:
        mu = AtomImporter(domain.dimension).load(cfg.atoms)
        source = cfg.atoms
    elif cfg.a is not None:
        u = parse_field_spec(cfg.field or "identity")
        mu = atomic_from_regular_value(u, domain, _vector(cfg.a, "a"))
        source = f"{u.name} at a={list(cfg.a)}"
    else:
        raise ConfigError("flatnorm needs --atoms or --a", key="atoms")
    mu.check_inside(domain)
    result = flat_norm(mu, domain, with_oracle=args.oracle)
    return {"source": source, "domain": domain.describe(), "measure": mu.to_dict(),
            "flat_norm": result.to_dict()}, EXIT_PASS


def cmd_trace(cfg: RunConfig, args, workers: int):
    domain = build_domain(cfg)
    if cfg.a is None:
        raise ConfigError("trace needs a target --a", key="a")
    slab = cfg.slab or [0.05, 0.1]
    U = build_slab(cfg, domain)
    a = _vector(cfg.a, "a")
    family = trace_family(U, a, slab[0], slab[1], strict=args.strict)
    audit = audit_endpoints(family.curves, family.bottom, family.top, slab[0], slab[1])
    flat = flat_norm(family.bottom.difference(family.top), domain).value
    bound = float(family.bottom.scale * family.total_length)
    if args.dump:
        dump_curves(family.curves, args.dump)
    record = {
        "field": U.name,
        "a": a.tolist(),
        "slab": list(slab),
        "curves": [c.to_dict() for c in family.curves] if args.polylines else len(family.curves),
        "total_length": family.total_length,
        "complete": family.complete,
        "audit": audit,
        "cauchy": {"flat_norm": flat, "length_bound": bound},
    }
    ok = family.complete and not audit["sign_violations"] and flat <= bound * 1.02 + 1e-12
    return record, EXIT_PASS if ok else EXIT_FAIL


def cmd_verify(cfg: RunConfig, args, workers: int):
    report = run_experiment(cfg, workers)
    if args.csv:
        ReportGenerator().write_rows_csv(report.to_rows(), args.csv)
    return report, EXIT_PASS if report.passed else EXIT_FAIL


def cmd_runs(args) -> int:
    df = RunLogDB().get_runs(limit=args.limit, command=args.filter)
    if df.empty:
        print("No runs logged yet")
        return EXIT_PASS
    df["config_hash"] = df["config_hash"].str[:12]
    print(tabulate(df.values.tolist(), headers=list(df.columns), tablefmt="simple"))
    return EXIT_PASS


def cmd_report(args) -> int:
    generator = ReportGenerator(output_dir=args.dir)
    files = generator.generate_csv_report(filename=args.name, run_id=args.run_id)
    if args.pdf:
        if not PDF_AVAILABLE:
            logger.error("reportlab is not installed; skipping PDF")
        else:
            files.append(generator.generate_pdf_report(run_id=args.run_id))
    print(json.dumps({"files": files}, sort_keys=True, indent=2))
    return EXIT_PASS


HANDLERS = {
    "norm": cmd_norm,
    "pairing": cmd_pairing,
    "extend": cmd_extend,
    "degree": cmd_degree,
    "flatnorm": cmd_flatnorm,
    "trace": cmd_trace,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, help=f'Random seed (default: {config.DEFAULT_SEED})')
    common.add_argument('--workers', type=int, help='Worker threads (default: FRACJAC_WORKERS or CPU count)')
    common.add_argument('--out', help='Write JSON here instead of stdout')
    common.add_argument('--no-timestamp', action='store_true', help='Omit runtimes and timestamps from output')
    common.add_argument('--log-level', help='stderr log level (default: FRACJAC_LOG_LEVEL)')

    specs = argparse.ArgumentParser(add_help=False)
    specs.add_argument('--field', help='Field spec, e.g. winding:k=2')
    specs.add_argument('--domain', help='Domain spec, e.g. disk:r=1:res=64')
    specs.add_argument('--test', help='Test function spec, e.g. bump:r=0.3:c=0.5,0.5')
    specs.add_argument('--F', dest='F', help='Change of variables, e.g. sine:eps=0.1')
    specs.add_argument('--a', help='Target vector, e.g. 0.5,0')
    specs.add_argument('--s', type=float, help='Fractional order s')
    specs.add_argument('--p', type=float, help='Integrability exponent p')
    specs.add_argument('--alpha', type=float, help='Hölder exponent')

    parser = argparse.ArgumentParser(
        prog='fracjac',
        description='Fractional norms, distributional Jacobians, degrees and verification experiments',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  fracjac norm --field identity --domain square --s 0.5 --p 2
  fracjac degree --field winding:k=2 --domain disk:r=1:res=64 --a 0.5,0 --method all
  fracjac flatnorm --atoms atoms.csv --domain square --oracle
  fracjac trace --field trig --domain square --a 0.2,0.1 --slab 0.05,0.1 --dump curves.json
  fracjac verify weak_coarea --config run.json --seed 42 --out report.json
  fracjac runs --limit 10
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('norm', parents=[common, specs], help='Fractional seminorm (and Hölder norm)')
    p.add_argument('--extrapolate', action='store_true', help='Also report the resolution-extrapolated value')

    sub.add_parser('pairing', parents=[common, specs], help='<Ju, ψ> in both modes; <Ju^a, ψ> with --a')

    p = sub.add_parser('extend', parents=[common, specs], help='Probe the extension U(x, t)')
    p.add_argument('--x', help='Point in the domain')
    p.add_argument('--t', type=float, help='Mollification scale in (0, 1)')
    p.add_argument('--extension', help='mollified (default), static or drift:c=..')
    p.add_argument('--profile', help='Mollifier profile: exponential or polynomial')

    p = sub.add_parser('degree', parents=[common, specs], help='Brouwer degree')
    p.add_argument('--method', choices=['preimage', 'boundary', 'changevar', 'all'], default='all')
    p.add_argument('--radius', type=float, help='Bump radius for changevar')

    p = sub.add_parser('flatnorm', parents=[common, specs], help='Flat norm of an atomic measure')
    p.add_argument('--atoms', help='Atoms as JSON or CSV')
    p.add_argument('--oracle', action='store_true', help='Check against the LP oracle')

    p = sub.add_parser('trace', parents=[common, specs], help='Trace U^{-1}(a) over a slab')
    p.add_argument('--slab', help='t_lo,t_hi (default: 0.05,0.1)')
    p.add_argument('--extension', help='mollified (default), static or drift:c=..')
    p.add_argument('--profile', help='Mollifier profile')
    p.add_argument('--strict', action='store_true', help='Fail on unmatched slice atoms')
    p.add_argument('--dump', help='Write curve polylines as JSON')
    p.add_argument('--polylines', action='store_true', help='Inline curve polylines in the output')

    p = sub.add_parser('verify', parents=[common, specs], help='Run a verification experiment')
    p.add_argument('experiment', choices=EXPERIMENTS)
    p.add_argument('--config', help='JSON run configuration')
    p.add_argument('--samples', type=int, help='Monte Carlo sample count')
    p.add_argument('--csv', help='Also write flat rows (sweeps) as CSV')

    p = sub.add_parser('runs', help='Show the run log')
    p.add_argument('--limit', type=int, default=20)
    p.add_argument('--filter', help='Only this command')

    p = sub.add_parser('report', help='CSV/PDF summary of stored experiments')
    p.add_argument('--pdf', action='store_true')
    p.add_argument('--run-id', type=int)
    p.add_argument('--name', help='Base filename')
    p.add_argument('--dir', help='Output directory (default: reports/)')
    return parser


def config_from_args(args) -> RunConfig:
    """Config file values, overridden by explicitly given flags"""
    data: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        data.update(load_run_config(args.config))
    data["command"] = args.command
    if args.command == "verify":
        data["experiment"] = args.experiment
    flag_keys = ("field", "domain", "test", "F", "a", "s", "p", "alpha", "seed", "method", "radius",
                 "atoms", "x", "t", "extension", "profile", "samples", "slab")
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key in ("a", "x", "slab"):
            value = list(parse_vector(value, key))
        data[key] = value
    return RunConfig.from_dict(data)


def _outcome(code: int) -> str:
    return {EXIT_PASS: "pass", EXIT_FAIL: "fail"}.get(code, "error")


def _log_run(command: str, cfg: Optional[RunConfig], code: int, output: Any = None, experiments=()):
    try:
        RunLogDB().log_run(command, cfg.config_hash() if cfg else hashlib.sha256(b"").hexdigest(),
                           cfg.seed if cfg else None, _outcome(code), code, output, experiments)
    except Exception as e:
        logger.error(f"Error writing run log: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse, dispatch, print, log; returns the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else EXIT_USAGE
        if code != 0:
            config.setup_logging()
            _log_run("usage", None, EXIT_USAGE)
        return code

    config.setup_logging(getattr(args, 'log_level', None))

    if args.command == "runs":
        return cmd_runs(args)
    if args.command == "report":
        return cmd_report(args)

    cfg = None
    try:
        cfg = config_from_args(args)
        workers = resolve_workers(args.workers)
        result, code = HANDLERS[args.command](cfg, args, workers)
    except FracJacError as e:
        logger.error(f"Error in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        _log_run(args.command, cfg, EXIT_USAGE, {"error": str(e)})
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        _log_run(args.command, cfg, EXIT_FAIL, {"error": str(e)})
        return EXIT_FAIL

    experiments = ()
    if hasattr(result, "to_dict"):
        full = result.to_dict()
        experiments = (full,)
        output = result.to_dict(include_runtime=not args.no_timestamp)
    else:
        output = result
    text = dumps(output, timestamps=not args.no_timestamp)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
        logger.info(f"Wrote {args.out}")
    else:
        print(text)
    _log_run(args.command, cfg, code, json.loads(text), experiments)
    return code


if __name__ == '__main__':
    sys.exit(main())
