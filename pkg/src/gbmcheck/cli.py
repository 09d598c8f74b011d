"""Command-line front end: ``simulate``, ``eval``, ``scan`` and ``moments``.

Exit codes: 0 success, 2 usage, 3 I/O, 4 data quality, 5 numerical
inconsistency.
"""

import argparse
import csv
import datetime
import hashlib
import json
import math
import os
import sys

from . import bhdsim, estimator, gbm, states
from .errors import ConfigurationError, GbmError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4, 5


def _read_text_arg(value):
    """Inline JSON/name, or ``@path`` / existing path to a JSON file."""
    if value.startswith("@"):
        with open(value[1:]) as fh:
            return fh.read()
    if value.endswith(".json") and os.path.exists(value):
        with open(value) as fh:
            return fh.read()
    return value


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_config(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_sidecar(out_path, args, extra):
    record = {"command": args.command, "config": _run_config(args)}
    record.update(extra)
    if not args.reproducible:
        record["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(out_path + ".json", "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _source(args):
    """(provider, provenance dict) from exactly one of --state / --data."""
    if (args.state is None) == (args.data is None):
        raise ConfigurationError("give exactly one of --state or --data")
    if args.state is not None:
        state = states.state_from_json(_read_text_arg(args.state))
        return gbm.AnalyticSource(state), {"state": state.to_dict()}
    data = bhdsim.read_dataset(args.data)
    data.require_uniform()
    provenance = {"data": args.data, "data_sha256": sha256_file(args.data), "records": data.M}
    return estimator.DataSource(data, cov_mode=args.cov, check_phases=False), provenance


def _spec_family(args):
    if (args.preset is None) == (args.spec is None):
        raise ConfigurationError("give exactly one of --preset or --spec")
    if args.preset is not None:
        family = gbm.preset_family(args.preset)
        if "(" in args.preset:
            fixed = gbm.preset(args.preset)
            return lambda beta: fixed
        return family
    d = json.loads(_read_text_arg(args.spec))

    # "beta" / "-beta" placeholders follow the scan point
    def family(beta):
        betas = []
        for b in d["betas"]:
            if b == "beta":
                betas.append(beta)
            elif b == "-beta":
                betas.append(-beta)
            else:
                betas.append(b)
        return gbm.GbmSpec.from_dict({"n": d["n"], "m": d["m"], "betas": betas})

    return family


def cmd_simulate(args):
    if args.config is not None:
        config = bhdsim.SimConfig.from_json(_read_text_arg(args.config))
    else:
        if args.state is None:
            raise ConfigurationError("simulate needs --state or --config")
        state = states.state_from_json(_read_text_arg(args.state))
        config = bhdsim.SimConfig(state, efficiency=args.efficiency, samples=args.samples,
                                  seed=args.seed, phase_mode=args.phase_mode, period=args.period)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(out_dir):
        raise FileNotFoundError(f"output directory {out_dir} does not exist")
    data = bhdsim.generate(config)
    bhdsim.write_dataset(data, args.out)
    _write_sidecar(args.out, args, {"sim_config": config.to_dict(), "data_sha256": sha256_file(args.out)})
    print(json.dumps({"out": args.out, "records": data.M}))
    return EXIT_OK


def cmd_eval(args):
    source, provenance = _source(args)
    family = _spec_family(args)
    beta = gbm.parse_complex(args.beta) if args.beta is not None else 0j
    spec = family(beta)
    result = gbm.evaluate(source, spec)
    payload = result.to_dict()
    payload["spec"] = spec.to_dict()
    payload.update(provenance)
    text = json.dumps(payload, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _fmt(value):
    return "nan" if value is None or not math.isfinite(value) else repr(float(value))


def cmd_scan(args):
    if args.out is None:
        raise ConfigurationError("scan needs --out")
    if args.grid is None:
        raise ConfigurationError("scan needs --grid")
    points = gbm.parse_grid(args.grid)
    source, provenance = _source(args)
    family = _spec_family(args)
    result = gbm.grid_scan(source, family, points)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["re_beta", "im_beta", "det", "sigma", "significance", "status"])
        for k, beta in enumerate(result.points):
            writer.writerow([repr(float(beta.real)), repr(float(beta.imag)), _fmt(result.det[k]),
                             _fmt(result.sigma[k]), _fmt(result.significance[k]), result.status[k]])
    finite = [d for d in result.det if math.isfinite(d)]
    summary = {
        "points": len(result.points),
        "failed": result.n_failed,
        "min_det": min(finite) if finite else None,
        "significant_points": int((abs(result.masked_significance(args.mask)) >= args.mask).sum()),
        "mask_threshold": args.mask,
    }
    _write_sidecar(args.out, args, {"provenance": provenance, "summary": summary})
    print(json.dumps(summary, sort_keys=True))
    return EXIT_NUMERIC if result.n_failed == len(result.points) else EXIT_OK


def cmd_moments(args):
    if args.data is None:
        raise ConfigurationError("moments needs --data")
    data = bhdsim.read_dataset(args.data)
    data.require_uniform()
    rows = []
    for total in range(args.order + 1):
        for k in range(total + 1):
            est = estimator.sample_moment(data, k, total - k, check_phases=False)
            se = est.std_error
            rows.append({"k": k, "l": total - k, "re": est.value.real, "im": est.value.imag,
                         "se_re": float(se[0]), "se_im": float(se[1])})
    payload = {"records": data.M, "data_sha256": sha256_file(args.data), "moments": rows}
    text = json.dumps(payload, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gbmcheck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path")
        p.add_argument("--reproducible", action="store_true",
                       help="omit timestamps so reruns are byte-identical")

    def source_opts(p):
        p.add_argument("--state", help="state JSON, @file, or name (vacuum, squeezed, pat-mixture)")
        p.add_argument("--data", help="dataset CSV (x,phi)")
        p.add_argument("--preset", help="bochner2, example3x3, squeezing, mom2, gbm2")
        p.add_argument("--spec", help="GbmSpec JSON or @file")
        p.add_argument("--cov", choices=["full", "diagonal"], default="full")

    p = sub.add_parser("simulate", help="generate a homodyne dataset")
    common(p)
    p.add_argument("--state")
    p.add_argument("--config", help="SimConfig JSON or @file")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--phase-mode", choices=["uniform", "sweep"], default="sweep")
    p.add_argument("--period", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="evaluate one determinant criterion")
    common(p)
    source_opts(p)
    p.add_argument("--beta", help="criterion point, e.g. '1.0,0.5' or '1+0.5j'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="criterion over a Re/Im beta lattice")
    common(p)
    source_opts(p)
    p.add_argument("--grid", help="remin:remax:step,immin:immax:step")
    p.add_argument("--mask", type=float, default=5.0, help="|significance| display threshold")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("moments", help="normally ordered moments from data")
    common(p)
    p.add_argument("--data")
    p.add_argument("--order", type=int, default=4, help="largest k + l")
    p.set_defaults(func=cmd_moments)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GbmError as exc:
        print(f"gbmcheck: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"gbmcheck: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gbmcheck: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
