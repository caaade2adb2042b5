"""Command-line frontend.

Subcommands cover the whole library: family listing, KL divergence,
moment-condition checks, redundancy and hindsight-gap curves, slope fits,
model-selection experiments, and file compression through the arithmetic
coder.  Every CSV artifact starts with a '#'-prefixed metadata block
carrying the resolved configuration and tool version; a fixed seed makes
reruns byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, coder, lab
from .codes import PluginConfig
from .families import Family, FamilyError, check_condition1, get_family, list_families
from .sources import (
    FiniteSupport,
    InModel,
    Mixture,
    PointMass,
    Source,
    load_empirical,
    uniform_integers,
)

DEFAULT_GRID_SPEC = ",".join(str(n) for n in lab.DEFAULT_N_GRID)


def _parse_family(spec: str) -> Family:
    try:
        return get_family(spec)
    except FamilyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_source(spec: str) -> Source:
    """Build a source from a CLI spec.

    Forms: pointmass:V | finite:v=p,v=p,... | uniform:a..b |
    inmodel:FAMILY:MU | empirical:PATH | mix:w*SPEC;w*SPEC;...
    """
    kind, _, rest = spec.strip().partition(":")
    kind = kind.lower()
    if kind == "pointmass":
        return PointMass(float(rest))
    if kind == "finite":
        values, probs = [], []
        for item in rest.split(","):
            v, _, p = item.partition("=")
            values.append(float(v))
            probs.append(float(p))
        return FiniteSupport(values, probs)
    if kind == "uniform":
        lo, _, hi = rest.partition("..")
        return uniform_integers(int(lo), int(hi))
    if kind == "inmodel":
        fam_spec, _, mu = rest.rpartition(":")
        if not fam_spec:
            raise ValueError("inmodel needs FAMILY:MU")
        return InModel(get_family(fam_spec), float(mu))
    if kind == "empirical":
        return load_empirical(rest)
    if kind == "mix":
        comps = []
        for item in rest.split(";"):
            w, _, sub = item.partition("*")
            comps.append((float(w), parse_source(sub)))
        return Mixture(comps)
    raise ValueError(
        f"unknown source spec {spec!r} "
        "(use pointmass:/finite:/uniform:/inmodel:/empirical:/mix:)"
    )


def _parse_source_arg(spec: str) -> Source:
    try:
        return parse_source(spec)
    except (ValueError, OSError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_code(spec: str, family: Family | None = None):
    """Build a code adapter from 'kind' or 'kind:key=val,key=val'."""
    kind, _, rest = spec.strip().partition(":")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            kwargs[k.strip()] = float(v)
    return lab.make_code(kind, family, **kwargs)


def _parse_grid(spec: str) -> np.ndarray:
    return np.asarray([int(s) for s in spec.split(",")], dtype=np.int64)


def _fmt(value: float) -> str:
    """Human output: six significant digits."""
    return f"{value:.6g}"


def _csv_value(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "undefined"
        return repr(value)
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[tuple], config: dict) -> None:
    lines = [f"# preqcode-version: {__version__}"]
    lines.append("# config: " + json.dumps(config, sort_keys=True))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_csv_value(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read_curve_csv(path: str) -> lab.RedundancyCurve:
    ns, gaps, errs, reps = [], [], [], [1]
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                idx = {name: i for i, name in enumerate(header)}
                continue
            cells = line.split(",")
            ns.append(int(cells[idx["n"]]))
            gaps.append(float(cells[idx["mean_gap_nats"]]))
            errs.append(float(cells[idx["stderr_nats"]]))
            reps.append(int(cells[idx["replicates"]]))
    if not ns:
        raise ValueError(f"{path}: no curve rows found")
    return lab.RedundancyCurve(
        family_id="?", source_id="?", code_id="?",
        n_grid=np.asarray(ns, dtype=np.int64),
        mean_gap=np.asarray(gaps), stderr=np.asarray(errs),
        replicates=max(reps), seed=0,
    )


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


class _Resolver:
    """Layered option lookup: explicit flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key)
        return default if value is None else value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preqcode",
        description="Universal-coding experiments for one-parameter exponential families",
    )
    parser.add_argument("--version", action="version", version=f"preqcode {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("families", help="list supported families")
    p.add_argument("action", choices=["list"])

    p = sub.add_parser("kl", help="KL divergence between two members of a family")
    p.add_argument("--family", type=_parse_family, required=True)
    p.add_argument("--from", dest="mu_from", type=float, required=True)
    p.add_argument("--to", dest="mu_to", type=float, required=True)

    p = sub.add_parser("condition-check", help="moment growth condition verdict")
    p.add_argument("--family", type=_parse_family, required=True)
    p.add_argument("--source", type=_parse_source_arg, required=True)

    def add_mc_options(p, with_code: bool):
        p.add_argument("--family", type=_parse_family, required=True)
        p.add_argument("--source", type=_parse_source_arg, required=True)
        if with_code:
            p.add_argument("--code", default=None, help="plugin[:x0=..,n0=..] | bayes[:..] | nml | two_part[:lo=..,hi=..]")
        p.add_argument("--n-grid", default=None, help=f"comma list (default {DEFAULT_GRID_SPEC})")
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None, help="CSV path, '-' for stdout")
        p.add_argument("--config", default=None, help="JSON file with the same fields; flags win")

    p = sub.add_parser("redundancy", help="Monte Carlo redundancy-gap curve")
    add_mc_options(p, with_code=True)
    p.add_argument("--allow-condition-failure", action="store_const", const=True, default=None)

    p = sub.add_parser("fit-c", help="fit the (1/2) ln n slope of a curve CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--n-min", type=int, default=lab.DEFAULT_FIT_N_MIN)

    p = sub.add_parser("dn", help="oracle-minus-hindsight gap curve (finite alphabets)")
    add_mc_options(p, with_code=False)

    p = sub.add_parser("select-model", help="codelength-based family selection error rates")
    p.add_argument("--true-family", type=_parse_family, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--candidates", default="poisson,geometric",
                   help="comma-separated candidate family specs")
    p.add_argument("--code", default=None, help="plugin | bayes | nml | two_part | all")
    p.add_argument("--n-grid", default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)

    p = sub.add_parser("compress", help="arithmetic-code a data file")
    p.add_argument("--family", type=_parse_family, required=True)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--n0", type=float, default=1.0)
    p.add_argument("--precision", type=int, default=32)
    p.add_argument("--tail-exp", type=int, default=32)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompress", help="decode a compressed stream")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_families(args) -> int:
    for line in list_families():
        print(line)
    return 0


def _cmd_kl(args) -> int:
    print(_fmt(args.family.kl_divergence(args.mu_from, args.mu_to)))
    return 0


def _cmd_condition_check(args) -> int:
    verdict = check_condition1(args.family, args.source.moments())
    if verdict.passed:
        print("pass")
    else:
        print(f"fail: {verdict.reason}")
    return 0


def _mc_settings(args):
    cfg = _load_config(getattr(args, "config", None))
    res = _Resolver(args, cfg)
    grid_spec = res.get("n_grid")
    grid = _parse_grid(grid_spec) if isinstance(grid_spec, str) else (
        np.asarray(grid_spec, dtype=np.int64) if grid_spec is not None
        else np.asarray(lab.DEFAULT_N_GRID, dtype=np.int64)
    )
    return res, {
        "n_grid": grid,
        "replicates": int(res.get("replicates", 1000)),
        "seed": int(res.get("seed", 0)),
        "threads": int(res.get("threads", 1)),
        "out": res.get("out", "-"),
    }


def _cmd_redundancy(args) -> int:
    res, opts = _mc_settings(args)
    code = parse_code(res.get("code", "plugin"), args.family)
    curve = lab.redundancy_curve(
        args.source, args.family, code,
        n_grid=opts["n_grid"], replicates=opts["replicates"], seed=opts["seed"],
        allow_condition_failure=bool(res.get("allow_condition_failure", False)),
        threads=opts["threads"],
    )
    config = {
        "command": "redundancy",
        "family": args.family.name,
        "source": args.source.source_id,
        "code": curve.meta["code"],
        "n_grid": [int(n) for n in curve.n_grid],
        "replicates": curve.replicates,
        "seed": curve.seed,
        "condition": curve.meta["condition_passed"],
        "mu_star": curve.meta["mu_star"],
        "version": __version__,
    }
    rows = [
        (int(n), float(g), float(se), curve.replicates)
        for n, g, se in zip(curve.n_grid, curve.mean_gap, curve.stderr)
    ]
    _write_csv(opts["out"], ["n", "mean_gap_nats", "stderr_nats", "replicates"], rows, config)
    return 0


def _cmd_fit_c(args) -> int:
    curve = _read_curve_csv(args.inp)
    fit = lab.fit_c(curve, n_min=args.n_min)
    print(f"c_hat {_fmt(fit.c_hat)}")
    print(f"intercept {_fmt(fit.intercept)}")
    print(f"c_stderr {_fmt(fit.c_stderr)}")
    return 0


def _cmd_dn(args) -> int:
    _, opts = _mc_settings(args)
    curve = lab.dn_curve(
        args.source, args.family,
        n_grid=opts["n_grid"], replicates=opts["replicates"], seed=opts["seed"],
        threads=opts["threads"],
    )
    config = {
        "command": "dn",
        "family": args.family.name,
        "source": args.source.source_id,
        "n_grid": [int(n) for n in curve.n_grid],
        "replicates": curve.replicates,
        "seed": curve.seed,
        "limit_prediction": curve.limit_prediction,
        "version": __version__,
    }
    rows = [
        (int(n), float(d), float(se), curve.replicates)
        for n, d, se in zip(curve.n_grid, curve.d_hat, curve.stderr)
    ]
    _write_csv(opts["out"], ["n", "d_hat_nats", "stderr_nats", "replicates"], rows, config)
    return 0


def _cmd_select_model(args) -> int:
    res, opts = _mc_settings(args)
    candidates = [get_family(s) for s in res.get("candidates", "poisson,geometric").split(",")]
    table = lab.model_selection_experiment(
        args.true_family, args.mu, candidates, res.get("code", "plugin"),
        n_grid=opts["n_grid"], replicates=opts["replicates"], seed=opts["seed"],
        threads=opts["threads"],
    )
    config = {
        "command": "select-model",
        "true_family": args.true_family.name,
        "mu": args.mu,
        "candidates": table.meta["candidates"],
        "n_grid": [int(n) for n in opts["n_grid"]],
        "replicates": opts["replicates"],
        "seed": opts["seed"],
        "version": __version__,
    }
    _write_csv(opts["out"], ["n", "code", "error_rate", "tie_rate", "replicates"],
               table.rows, config)
    return 0


def _cmd_compress(args) -> int:
    source = load_empirical(args.inp)
    x0 = args.x0
    if x0 is None:
        from .codes import default_plugin_config

        x0 = default_plugin_config(args.family).x0
    stream = coder.encode(
        args.family, PluginConfig(x0=x0, n0=args.n0), source.data,
        precision_bits=args.precision, tail_exp=args.tail_exp,
    )
    with open(args.out, "wb") as fh:
        fh.write(stream.to_bytes())
    print(f"n {stream.n} payload_bits {stream.payload_bits} backend {coder.kernel_backend()}")
    return 0


def _cmd_decompress(args) -> int:
    with open(args.inp, "rb") as fh:
        data = fh.read()
    values = coder.decode(data)
    with open(args.out, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write(f"{int(v)}\n")
    print(f"n {values.size}")
    return 0


_COMMANDS = {
    "families": _cmd_families,
    "kl": _cmd_kl,
    "condition-check": _cmd_condition_check,
    "redundancy": _cmd_redundancy,
    "fit-c": _cmd_fit_c,
    "dn": _cmd_dn,
    "select-model": _cmd_select_model,
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
