"""Command line front end: ``mgpboot {generate,bootstrap,trm,experiment,diagnose}``.

Each run writes its CSV outputs and a ``manifest.json`` into ``--out``. The
manifest echoes the resolved configuration, so passing it back through
``--config`` reruns the same computation with byte-identical results.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 statistical precondition not met (e.g. no exceedances).
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod
from .errors import ConfigError, MgpBootError, ShapeError, UnsupportedMethodError
from .experiment import DEFAULT_THETAS, ScenarioConfig, chi_coefficient, qq_data, run_scenario
from .io import read_dataset, write_csv, write_manifest, write_matrix
from .margins import (
    DEFAULT_THRESHOLD_LEVEL,
    MarginalModel,
    extract_exceedances,
    from_exponential_scale,
    select_threshold,
    to_exponential_scale,
)
from .rand_core import RngState, StudentTParams
from .spectral import compute_deltas, spectral_bootstrap
from .synthetic import JointModel, sample_joint_model
from .trm import METRICS, estimate, var_empirical, var_theoretical

log = logging.getLogger("mgpboot")

MARGIN_KINDS = ("fitted", "known", "empirical")
VAR_METHODS = ("theoretical", "empirical")
CHI_LEVELS = np.round(np.arange(0.900, 0.9951, 0.005), 3)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _alpha_list(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of reals: {s!r}") from None


def _common(p):
    p.add_argument("--config", metavar="PATH", help="INI config or a previous manifest.json")
    p.add_argument("--seed", type=int, help="64-bit unsigned master seed")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--alpha", type=_alpha_list, metavar="LIST", help="comma-separated risk levels")
    p.add_argument("--theta", type=float, help="Gumbel dependence parameter")
    p.add_argument("--threshold-level", type=float, help="marginal quantile level of the threshold")
    p.add_argument("--var-method", choices=VAR_METHODS)
    p.add_argument("--keep-intermediate", action="store_true", default=None,
                   help="also write exponential-scale intermediates")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgpboot", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate Student-t / Gumbel data")
    _common(p)
    p.add_argument("--n", type=int, help="number of rows")

    p = sub.add_parser("bootstrap", help="spectral bootstrap of a dataset's joint tail")
    _common(p)
    p.add_argument("data", help="input CSV")
    p.add_argument("--m", type=int, help="bootstrap sample size")
    p.add_argument("--replicates", type=int, help="number of bootstrap samples to write")
    p.add_argument("--margins", choices=MARGIN_KINDS, help="marginal model (default: fitted)")

    p = sub.add_parser("trm", help="tail risk metrics of a dataset and its bootstrap samples")
    _common(p)
    p.add_argument("data", help="source CSV (kind D)")
    p.add_argument("--bootstrap", nargs="+", default=[], metavar="CSV", help="bootstrap CSVs (kind D*)")
    p.add_argument("--margins", choices=("fitted", "known"), help="margins for theoretical VaR")
    p.add_argument("--metrics", help="comma-separated subset of ES,MMES,DCTE")

    p = sub.add_parser("experiment", help="run the replication study")
    _common(p)
    p.add_argument("--n-outer", type=int)
    p.add_argument("--n-inner", type=int)
    p.add_argument("--oracle-size", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("diagnose", help="QQ bands and chi(u) curves")
    _common(p)
    p.add_argument("source", help="source sample CSV (e.g. exceedances)")
    p.add_argument("other", nargs="?", help="bootstrap sample CSV to compare against")
    p.add_argument("--pairs", help="component pairs, e.g. 1-2,1-3 (default: all)")
    return parser


def _resolve(args) -> dict:
    cfg = cfgmod.load(args.config)
    o = cfgmod.override
    o(cfg, "rand_core", "seed", args.seed)
    o(cfg, "trm", "alphas", args.alpha)
    o(cfg, "synthetic", "theta", args.theta)
    if args.theta is not None:
        o(cfg, "experiment", "thetas", [args.theta])
    o(cfg, "margins", "threshold_level", args.threshold_level)
    o(cfg, "trm", "var_method", args.var_method)
    o(cfg, "spectral_boot", "keep_intermediate", args.keep_intermediate)
    extra = {
        "n": ("synthetic", "n"),
        "m": ("spectral_boot", "m"),
        "replicates": ("spectral_boot", "replicates"),
        "margins": ("margins", "kind"),
        "metrics": ("trm", "metrics"),
        "n_outer": ("experiment", "n_outer"),
        "n_inner": ("experiment", "n_inner"),
        "oracle_size": ("experiment", "oracle_size"),
        "workers": ("experiment", "workers"),
        "pairs": ("experiment", "chi_pairs"),
    }
    for attr, (sec, key) in extra.items():
        o(cfg, sec, key, getattr(args, attr, None))
    _validate(cfg)
    return cfg


def _validate(cfg):
    seed = cfg["rand_core"]["seed"]
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", key="rand_core.seed")
    for sec, key in (("synthetic", "n"), ("spectral_boot", "m"), ("spectral_boot", "replicates"),
                     ("experiment", "n_outer"), ("experiment", "n_inner"), ("experiment", "oracle_size"),
                     ("experiment", "workers")):
        if cfg[sec][key] < 1:
            raise ConfigError("must be at least 1", key=f"{sec}.{key}")
    level = cfg["margins"]["threshold_level"]
    if level is not None and not 0.5 <= level < 1.0:
        raise ConfigError("threshold level must lie in [0.5, 1)", key="margins.threshold_level")
    alphas = cfg["trm"]["alphas"]
    if not alphas or any(not 0.0 < a < 0.5 for a in alphas):
        raise ConfigError("risk levels must lie in (0, 0.5)", key="trm.alphas")
    if cfg["trm"]["var_method"] not in VAR_METHODS:
        raise UnsupportedMethodError(f"unknown VaR method {cfg['trm']['var_method']!r}")
    bad = set(cfg["trm"]["metrics"]) - set(METRICS)
    if bad or not cfg["trm"]["metrics"]:
        raise ConfigError(f"unknown metrics {sorted(bad)}", key="trm.metrics")
    kind = cfg["margins"]["kind"]
    if kind is not None and kind not in MARGIN_KINDS:
        raise ConfigError(f"unknown marginal model {kind!r}", key="margins.kind")


def _finish(args, cfg, inputs, outputs, counters):
    outputs = list(outputs)
    manifest = write_manifest(
        args.out,
        version=__version__,
        command=args.command,
        config=cfg,
        seed=cfg["rand_core"]["seed"],
        inputs=inputs,
        outputs=outputs,
        counters=counters,
    )
    log.info("wrote %d file(s) and %s", len(outputs), manifest)


def _margins_for(kind, cfg, x):
    if kind == "fitted":
        return MarginalModel.fitted(x)
    if kind == "empirical":
        return MarginalModel.empirical(x)
    m = cfg["margins"]
    d = x.shape[1]
    nu = m["nu"]
    if nu is None or len(nu) != d:
        raise ConfigError(f"known margins need {d} degrees of freedom", key="margins.nu")
    loc = m["location"] or [0.0] * d
    scale = m["scale"] or [1.0] * d
    if len(loc) != d or len(scale) != d:
        raise ConfigError(f"known margins need {d} locations and scales", key="margins.location")
    try:
        params = [StudentTParams(n_, l_, s_) for n_, l_, s_ in zip(nu, loc, scale)]
    except ValueError as exc:
        raise ConfigError(str(exc), key="margins.nu") from None
    return MarginalModel.known(params)


def _margin_echo(names, model):
    if not model.is_student:
        return None
    out = []
    for j, (name, p) in enumerate(zip(names, model.params)):
        entry = {"component": name, "nu": p.nu, "location": p.location, "scale": p.scale}
        if model.fits is not None:
            entry["near_gaussian"] = model.fits[j].near_gaussian
        out.append(entry)
    return out


def _check_names(ref, other):
    if other.names != ref.names:
        raise ShapeError(f"{other.path}: columns {list(other.names)} do not match {list(ref.names)}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args, cfg):
    syn = cfg["synthetic"]
    if syn["theta"] < 1.0:
        raise ConfigError("Gumbel parameter must be >= 1", key="synthetic.theta")
    if len(syn["nu"]) < 2 or any(v <= 1.0 for v in syn["nu"]):
        raise ConfigError("need at least two degrees of freedom, each > 1", key="synthetic.nu")
    model = JointModel.student(syn["nu"], syn["theta"])
    # stream 0 matches outer replicate 0 of the experiment
    x = sample_joint_model(RngState(cfg["rand_core"]["seed"], 0), model, syn["n"])
    names = [f"X{j + 1}" for j in range(model.d)]
    path = write_matrix(Path(args.out) / "data.csv", names, x)
    _finish(args, cfg, [], [path], {"n": syn["n"], "d": model.d})


def cmd_bootstrap(args, cfg):
    data = read_dataset(args.data)
    if data.d < 2:
        raise ShapeError("the spectral bootstrap needs at least two components")
    kind = cfg["margins"]["kind"] or "fitted"
    level = cfg["margins"]["threshold_level"]
    level = DEFAULT_THRESHOLD_LEVEL if level is None else level
    boot = cfg["spectral_boot"]
    seed = cfg["rand_core"]["seed"]
    out = Path(args.out)

    model = _margins_for(kind, cfg, data.values)
    x_exp = to_exponential_scale(data.values, model)
    threshold = select_threshold(x_exp, level)
    exceed = extract_exceedances(x_exp, threshold)
    deltas = compute_deltas(exceed.excesses)
    log.info("k = %d exceedances out of %d rows", exceed.k, data.values.shape[0])

    outputs, floored = [], []
    if boot["keep_intermediate"]:
        outputs.append(write_matrix(out / "exceedances.csv", data.names, exceed.excesses))
    for r in range(boot["replicates"]):
        b = spectral_bootstrap(RngState(seed, r), deltas, boot["m"])
        back = from_exponential_scale(b.z_star + threshold.u_exp, model, cfg["margins"]["floor"])
        floored.append(back.floored)
        outputs.append(write_matrix(out / f"bootstrap_{r:03d}.csv", data.names, back.values))
        if boot["keep_intermediate"]:
            outputs.append(write_matrix(out / f"bootstrap_std_{r:03d}.csv", data.names, b.z_star))
    counters = {
        "n": int(data.values.shape[0]),
        "k": exceed.k,
        "threshold_exp": [float(u) for u in threshold.u_exp],
        "floored": floored,
        "floored_total": int(sum(floored)),
        "margins": _margin_echo(data.names, model),
    }
    _finish(args, cfg, [args.data], outputs, counters)


TRM_HEADER = ("kind", "metric", "component", "alpha", "var", "estimate", "support_count",
              "support_mean", "replicates", "available", "mean", "sd")


def cmd_trm(args, cfg):
    data = read_dataset(args.data)
    boots = [read_dataset(p) for p in args.bootstrap]
    for b in boots:
        _check_names(data, b)
    metrics = [m for m in METRICS if m in cfg["trm"]["metrics"]]
    if data.d < 2 and any(m != "ES" for m in metrics):
        raise ShapeError("MMES and DCTE need at least two components; use --metrics ES for univariate data")

    method = cfg["trm"]["var_method"]
    counters = {}
    if method == "theoretical":
        kind = cfg["margins"]["kind"] or "fitted"
        if kind == "empirical":
            raise UnsupportedMethodError("theoretical VaR needs Student-t margins (fitted or known)")
        model = _margins_for(kind, cfg, data.values)
        counters["margins"] = _margin_echo(data.names, model)
        var_for = lambda a: var_theoretical(model, a)  # noqa: E731
    else:
        var_for = lambda a: var_empirical(data.values, a)  # noqa: E731

    groups = [("D", [data.values])]
    if boots:
        groups.append(("D*", [b.values for b in boots]))
        groups.append(("D+D*", [np.vstack((data.values, b.values)) for b in boots]))

    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        vars_ = {a: var_for(a) for a in cfg["trm"]["alphas"]}
    for w in caught:
        log.warning("%s", w.message)
    counters["small_sample_alphas"] = [a for a, v in vars_.items() if v.small_sample]

    for kind, samples in groups:
        for metric in metrics:
            for j, name in enumerate(data.names):
                for a, v in vars_.items():
                    reps = [estimate(metric, s, j, v) for s in samples]
                    vals = np.array([r.estimate for r in reps if r.available])
                    total = sum(r.support_count for r in reps)
                    mean = float(vals.mean()) if vals.size else None
                    sd = float(vals.std(ddof=1)) if vals.size > 1 else None
                    est = reps[0].estimate if len(reps) == 1 else mean
                    rows.append((kind, metric, name, a, float(v.values[j]), est, total,
                                 total / len(reps), len(reps), vals.size, mean, sd))
    path = write_csv(Path(args.out) / "trm.csv", TRM_HEADER, rows)
    _finish(args, cfg, [args.data, *args.bootstrap], [path], counters)


def _scenario(cfg, theta) -> ScenarioConfig:
    syn, ex = cfg["synthetic"], cfg["experiment"]
    level = cfg["margins"]["threshold_level"]
    kw = {} if level is None else {"threshold_level": level}
    return ScenarioConfig(
        n=syn["n"], m=cfg["spectral_boot"]["m"], nu=tuple(syn["nu"]), theta=float(theta),
        alphas=tuple(cfg["trm"]["alphas"]), n_outer=ex["n_outer"], n_inner=ex["n_inner"],
        seed=cfg["rand_core"]["seed"], oracle_size=ex["oracle_size"], target=ex["target"],
        metrics=tuple(m for m in METRICS if m in cfg["trm"]["metrics"]), **kw,
    )


def cmd_experiment(args, cfg):
    thetas = cfg["experiment"]["thetas"] or list(DEFAULT_THETAS)
    results = []
    for theta in thetas:
        scen = _scenario(cfg, theta)
        log.info("theta=%g: %d x %d replicates", theta, scen.n_outer, scen.n_inner)
        results.append(run_scenario(scen, workers=cfg["experiment"]["workers"]))

    out = Path(args.out)
    err_rows, cnt_rows, orc_rows = [], [], []
    for res in results:
        err_rows.extend(res.errors.rows())
        cnt_rows.extend(res.counts.rows())
        for (metric, a), o in res.oracle.items():
            orc_rows.append((metric, a, res.config.theta, o.component + 1, o.value, o.se, o.count,
                             o.mc_size, o.precision_warning))
    outputs = [
        write_csv(out / "errors.csv", ("metric", "alpha", "theta", "kind", "pooling", "index",
                                       "relative_error"), err_rows),
        write_csv(out / "counts.csv", ("metric", "alpha", "theta", "kind", "pooling", "mean", "sd",
                                       "replicates"), cnt_rows),
        write_csv(out / "oracle.csv", ("metric", "alpha", "theta", "component", "value", "se", "count",
                                       "mc_size", "precision_warning"), orc_rows),
    ]
    counters = {
        str(res.config.theta): {
            "skipped_outer": res.skipped,
            "floored": res.floored,
            "mean_k": float(np.mean(res.exceedance_counts)),
            "excluded": {"|".join(map(str, k)): v for k, v in sorted(res.errors.excluded.items()) if v},
        }
        for res in results
    }
    _finish(args, cfg, [], outputs, counters)


def _parse_pairs(spec, d):
    if not spec:
        return list(itertools.combinations(range(d), 2))
    pairs = []
    for item in spec.split(","):
        try:
            j, k = (int(v) - 1 for v in item.split("-"))
        except ValueError:
            raise ConfigError(f"bad pair {item!r}; expected e.g. 1-2", key="experiment.chi_pairs") from None
        if not (0 <= j < d and 0 <= k < d) or j == k:
            raise ConfigError(f"pair {item!r} out of range for d={d}", key="experiment.chi_pairs")
        pairs.append((j, k))
    return pairs


def cmd_diagnose(args, cfg):
    a = read_dataset(args.source)
    samples = [("source", a)]
    outputs = []
    out = Path(args.out)
    counters = {}
    if args.other:
        b = read_dataset(args.other)
        if b.d != a.d:
            raise ShapeError(f"samples have {a.d} and {b.d} columns")
        _check_names(a, b)
        samples.append(("other", b))
        rows = []
        coverage = {}
        for j, name in enumerate(a.names):
            rng = RngState(cfg["rand_core"]["seed"], 0, (j,))
            qq = qq_data(a.values[:, j], b.values[:, j], cfg["experiment"]["qq_boot"], rng)
            cov = qq.covers_diagonal()
            coverage[name] = float(cov.mean())
            for i, p in enumerate(qq.probs):
                rows.append((name, p, qq.qa[i], qq.qb[i], qq.lower[i], qq.upper[i], bool(cov[i])))
        outputs.append(write_csv(out / "qq.csv", ("component", "p", "q_source", "q_other", "lower",
                                                  "upper", "covered"), rows))
        counters["qq_coverage"] = coverage
    elif a.d < 2:
        raise ShapeError("chi curves need at least two components")

    pairs = _parse_pairs(cfg["experiment"]["chi_pairs"], a.d)
    rows = []
    for label, s in samples:
        for j, k in pairs:
            for u in CHI_LEVELS:
                rows.append((label, a.names[j], a.names[k], u, chi_coefficient(s.values, (j, k), u)))
    outputs.append(write_csv(out / "chi.csv", ("sample", "component", "given", "level", "chi"), rows))
    _finish(args, cfg, [p for p in (args.source, args.other) if p], outputs, counters)


COMMANDS = {
    "generate": cmd_generate,
    "bootstrap": cmd_bootstrap,
    "trm": cmd_trm,
    "experiment": cmd_experiment,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](args, cfg)
    except MgpBootError as exc:
        log.error("%s", exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
