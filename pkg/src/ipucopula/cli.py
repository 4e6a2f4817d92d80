"""Command line interface: ``ipucopula <subcommand> [flags]``.

Every artifact carries the seed, the sample count and a hash of the resolved
configuration, so reruns can be checked for byte identity.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import data as data_mod
from .drivers import (
    BaseKind,
    DriverSpec,
    bernstein,
    comonotone,
    independence,
    shuffle_of_m,
    worst_case_shuffle,
)
from .engine import IpuModel, TruncationPolicy, density_grid, simulate
from .families import FamilyKind, FamilyParams
from .risk import (
    MarginalKind,
    aggregate_var,
    fit_frechet,
    fit_lognormal,
    quantile_marginal,
    quantile_table,
)
from .tails import empirical_lambda_u, lambda_u_nb_asymptotic, lambda_u_nb_exact

SUBCOMMANDS = ("ranks", "simulate", "density", "taildep", "fit", "var", "reproduce-paper")

# Values reported for the example dataset at alpha = 0.05 with 5,000,000 samples.
REFERENCE_MARGINAL_VAR = {"X": 6.8190, "Y": 2.0984}
REFERENCE_COMPARATOR = 8.9174
REFERENCE_TABLE = {
    "Bernstein": 8.9586,
    "NB 5": 8.8474,
    "NB 5 WC": 9.3989,
    "NB 10": 8.8834,
    "NB 10 WC": 9.5421,
    "NB 15": 8.8978,
    "NB 15 WC": 9.6198,
    "Po 6": 8.8200,
    "Po 6 WC": 9.1402,
    "Po 10": 8.8453,
    "Po 10 WC": 9.2412,
    "Po 15": 8.8820,
    "Po 15 WC": 9.3532,
}

QUANTILE_PROBS = tuple(round(0.01 * k, 2) for k in range(1, 100)) + (0.995, 0.999)


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(message)
        self.field = field_name


@dataclass
class RunConfig:
    dataset: str = f"fixture:{data_mod.FIXTURE_NAME}"
    has_header: bool = False
    family: list = field(default_factory=lambda: ["nb"])
    a: list = field(default_factory=lambda: [5.0])
    base: str = "shuffle"
    corner_size: int | None = None
    marginal: list = field(default_factory=list)
    count: int = 100_000
    seed: int = 0
    alpha: float = 0.05
    t: list = field(default_factory=list)
    resolution: int = 100
    workers: int = 1
    out: str | None = None

    def validate(self):
        if not self.family or any(f not in ("nb", "poisson") for f in self.family):
            raise ConfigError("family", f"expected nb or poisson, got {self.family}")
        if not self.a:
            raise ConfigError("a", "at least one value required")
        for a in self.a:
            if not (isinstance(a, (int, float)) and math.isfinite(a) and a > 0):
                raise ConfigError("a", f"must be positive, got {a!r}")
        if self.base not in [k.value for k in BaseKind]:
            raise ConfigError("base", f"unknown base {self.base!r}")
        if self.corner_size is not None and self.corner_size < 1:
            raise ConfigError("corner_size", "must be a positive integer")
        if any(m not in [k.value for k in MarginalKind] for m in self.marginal):
            raise ConfigError("marginal", f"expected lognormal or frechet, got {self.marginal}")
        if not (isinstance(self.count, int) and self.count >= 1):
            raise ConfigError("count", f"must be a positive integer, got {self.count!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", f"must be a nonnegative integer, got {self.seed!r}")
        if not (isinstance(self.alpha, (int, float)) and 0 < self.alpha < 1):
            raise ConfigError("alpha", f"must lie in (0, 1), got {self.alpha!r}")
        for t in self.t:
            if not 0 < t < 1:
                raise ConfigError("t", f"must lie in (0, 1), got {t!r}")
        if not (isinstance(self.resolution, int) and self.resolution >= 2):
            raise ConfigError("resolution", f"must be an integer >= 2, got {self.resolution!r}")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        return self

    def resolved(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("argv", message)


def _add_common(p):
    p.add_argument("--config", help="JSON file with flat RunConfig keys")
    p.add_argument("--dataset")
    p.add_argument("--has-header", action="store_true", default=None)
    p.add_argument("--family", action="append", choices=["nb", "poisson"])
    p.add_argument("--a", action="append", type=float)
    p.add_argument("--base", choices=[k.value for k in BaseKind])
    p.add_argument("--corner-size", dest="corner_size", type=int)
    p.add_argument("--marginal", action="append", choices=[k.value for k in MarginalKind])
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", action="append", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipucopula", description="IPU copulas and VaR aggregation")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        _add_common(sub.add_parser(name))
    return parser


def resolve_config(args, command: str) -> RunConfig:
    cfg = RunConfig()
    if command == "reproduce-paper":
        cfg.count = 5_000_000
    if command == "var":
        cfg.count = 1_000_000
    known = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be a JSON object")
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(key, "unknown config key")
            if key in ("family", "a", "t", "marginal") and not isinstance(value, list):
                value = [value]
            setattr(cfg, key, value)
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    try:
        cfg.a = [float(a) for a in cfg.a]
    except (TypeError, ValueError):
        raise ConfigError("a", f"must be numbers, got {cfg.a!r}") from None
    return cfg.validate()


def _broadcast(values, d, name):
    if len(values) == 1:
        return list(values) * d
    if len(values) != d:
        raise ConfigError(name, f"expected 1 or {d} values, got {len(values)}")
    return list(values)


def build_model(cfg: RunConfig, obs=None, base_only=False):
    """Base copula (and IPU model) described by ``cfg``."""
    kind = BaseKind(cfg.base)
    if kind in (BaseKind.COMONOTONE, BaseKind.INDEPENDENCE) and obs is None:
        d = max(len(cfg.family), len(cfg.a), 2)
    else:
        obs = obs if obs is not None else data_mod.resolve_dataset(cfg.dataset, cfg.has_header)
        d = obs.d
    if kind is BaseKind.COMONOTONE:
        base = comonotone(d)
    elif kind is BaseKind.INDEPENDENCE:
        base = independence(d)
    else:
        ranks = data_mod.compute_ranks(obs)
        if kind is BaseKind.SHUFFLE_M:
            base = shuffle_of_m(ranks)
        elif kind is BaseKind.BERNSTEIN:
            base = bernstein(ranks)
        else:
            try:
                base = worst_case_shuffle(ranks, cfg.corner_size)
            except ValueError as exc:
                raise ConfigError("corner_size", str(exc)) from None
    if base_only:
        return base
    fams = _broadcast(cfg.family, d, "family")
    avals = _broadcast(cfg.a, d, "a")
    try:
        families = tuple(FamilyParams(FamilyKind(f), a) for f, a in zip(fams, avals))
    except ValueError as exc:
        raise ConfigError("a", str(exc)) from None
    return IpuModel(DriverSpec(base, families))


def fit_marginals(cfg: RunConfig, obs):
    kinds = cfg.marginal or (["lognormal", "frechet"] if obs.d == 2 else [])
    if len(kinds) != obs.d:
        raise ConfigError("marginal", f"need one marginal kind per column ({obs.d})")
    fitters = {"lognormal": fit_lognormal, "frechet": fit_frechet}
    return [fitters[k](obs.values[:, j]) for j, k in enumerate(kinds)]


def _fmt(x) -> str:
    return repr(float(x))


def _comment(cfg: RunConfig, command: str) -> str:
    return f"# command={command} seed={cfg.seed} count={cfg.count} config={cfg.digest()}"


def _csv_text(header, rows, comment=None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _meta(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "seed": cfg.seed, "count": cfg.count,
            "config_hash": cfg.digest(), "config": cfg.resolved()}


class _Emitter:
    """Writes artifacts to ``--out`` or, without it, to stdout."""

    def __init__(self, cfg: RunConfig, stdout):
        self.out = Path(cfg.out) if cfg.out else None
        self.stdout = stdout
        self.written = []
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str):
        if self.out is None:
            self.stdout.write(text)
        else:
            with open(self.out / name, "w", newline="\n") as fh:
                fh.write(text)
            self.written.append(name)


def cmd_ranks(cfg, em):
    obs = data_mod.resolve_dataset(cfg.dataset, cfg.has_header)
    ranks = data_mod.compute_ranks(obs).ranks
    d = obs.d
    header = ["i"] + [f"x{k + 1}" for k in range(d)] + [f"r{k + 1}" for k in range(d)]
    rows = [[j + 1, *map(float, obs.values[j]), *map(int, ranks[j])] for j in range(obs.n)]
    em.emit("ranks.csv", _csv_text(header, rows, _comment(cfg, "ranks")))


def cmd_simulate(cfg, em):
    model = build_model(cfg)
    u = simulate(model, cfg.count, cfg.seed, workers=cfg.workers)
    header = [f"u{k + 1}" for k in range(model.d)]
    em.emit("samples.csv", _csv_text(header, u.tolist(), _comment(cfg, "simulate")))


def cmd_density(cfg, em):
    model = build_model(cfg)
    if model.d != 2:
        raise ConfigError("family", "density grids need d = 2")
    grid = density_grid(model, cfg.resolution, TruncationPolicy())
    comment = _comment(cfg, "density") + f" residual_bound={grid.residual:.6g}"
    em.emit("density.csv", _csv_text(["u", "v", "density"], grid.rows().tolist(), comment))


def cmd_taildep(cfg, em):
    fam = cfg.family[0]
    a = cfg.a[0]
    payload = _meta(cfg, "taildep")
    payload["family"] = fam
    payload["a"] = a
    if fam == "nb":
        payload["exact"] = lambda_u_nb_exact(int(a)) if a == int(a) else None
        payload["asymptotic"] = lambda_u_nb_asymptotic(a)
    else:
        # Poisson copulas with a comonotone driver have no upper tail dependence
        payload["exact"] = 0.0
        payload["asymptotic"] = 0.0
    payload["empirical"] = []
    if cfg.t:
        model = build_model(cfg)
        if model.d != 2:
            raise ConfigError("family", "empirical tail dependence needs d = 2")
        u = simulate(model, cfg.count, cfg.seed, workers=cfg.workers)
        for t in cfg.t:
            est = empirical_lambda_u(u, t)
            payload["empirical"].append({"t": est.threshold, "estimate": est.estimate, "count": est.count})
    em.emit("taildep.json", _json_text(payload))


def cmd_fit(cfg, em):
    obs = data_mod.resolve_dataset(cfg.dataset, cfg.has_header)
    p = 1 - cfg.alpha
    columns = []
    for j in range(obs.d):
        col = {"column": j + 1}
        for name, fitter in (("lognormal", fit_lognormal), ("frechet", fit_frechet)):
            m = fitter(obs.values[:, j])
            col[name] = {**m.to_dict(), "var": quantile_marginal(m, p)}
        columns.append(col)
    payload = _meta(cfg, "fit")
    payload["alpha"] = cfg.alpha
    payload["columns"] = columns
    if obs.d == 2 or cfg.marginal:
        chosen = fit_marginals(cfg, obs)
        payload["selected"] = [{**m.to_dict(), "var": quantile_marginal(m, p)} for m in chosen]
    em.emit("marginals.json", _json_text(payload))


def cmd_var(cfg, em):
    obs = data_mod.resolve_dataset(cfg.dataset, cfg.has_header)
    model = build_model(cfg, obs)
    marginals = fit_marginals(cfg, obs)
    report, sums = aggregate_var(model, marginals, cfg.alpha, cfg.count, cfg.seed,
                                 workers=cfg.workers, return_sums=True)
    payload = {**_meta(cfg, "var"), **json.loads(report.to_json())}
    em.emit("var_report.json", _json_text(payload))
    table = quantile_table(sums, QUANTILE_PROBS)
    em.emit("quantiles.csv", _csv_text(["p", "quantile"], table, _comment(cfg, "var")))


def reference_configurations(alpha: float, n: int):
    """The thirteen copula configurations of the worked VaR example.

    Yields ``(label, overrides, bare)``; ``bare`` configurations aggregate
    directly under the base copula (the classical Bernstein benchmark) instead
    of an IPU model built on it. The worst-case versions put the
    countermonotone corner on the top ``ceil(alpha * n)`` cells, i.e. exactly
    on the tail that defines VaR.
    """
    corner = max(1, math.ceil(alpha * n))
    yield "Bernstein", dict(base="bernstein"), True
    for fam, label, values in (("nb", "NB", (5, 10, 15)), ("poisson", "Po", (6, 10, 15))):
        for a in values:
            yield f"{label} {a}", dict(base="shuffle", family=[fam], a=[float(a)]), False
            yield f"{label} {a} WC", dict(base="wc-shuffle", family=[fam], a=[float(a)], corner_size=corner), False


def cmd_reproduce(cfg, em):
    obs = data_mod.resolve_dataset(cfg.dataset, cfg.has_header)
    marginals = fit_marginals(cfg, obs)
    per = [quantile_marginal(m, 1 - cfg.alpha) for m in marginals]
    fit_payload = _meta(cfg, "reproduce-paper")
    fit_payload["marginals"] = [
        {**m.to_dict(), "var": v, "reference_var": rv, "abs_diff": abs(v - rv), "rel_diff": (v - rv) / rv}
        for m, v, rv in zip(marginals, per, REFERENCE_MARGINAL_VAR.values())
    ]
    fit_payload["comparator"] = sum(per)
    fit_payload["reference_comparator"] = REFERENCE_COMPARATOR
    em.emit("marginals.json", _json_text(fit_payload))

    rows = []
    for label, overrides, bare in reference_configurations(cfg.alpha, obs.n):
        run = RunConfig(**{**asdict(cfg), **overrides})
        model = build_model(run, obs, base_only=bare)
        report, sums = aggregate_var(model, marginals, cfg.alpha, cfg.count, cfg.seed,
                                     workers=cfg.workers, return_sums=True)
        ref = REFERENCE_TABLE[label]
        rows.append({
            "configuration": label,
            "estimate": report.aggregate,
            "reference": ref,
            "abs_diff": abs(report.aggregate - ref),
            "comparator": report.comparator,
            "reference_comparator": REFERENCE_COMPARATOR,
        })
        slug = label.lower().replace(" ", "_")
        table = quantile_table(sums, QUANTILE_PROBS)
        em.emit(f"quantiles_{slug}.csv",
                _csv_text(["p", "quantile"], table, _comment(cfg, "reproduce-paper") + f" configuration={label}"))
        # flush the comparison after every configuration
        _emit_comparison(cfg, em, rows)
    return rows


def _emit_comparison(cfg, em, rows):
    if em.out is None and len(rows) < len(REFERENCE_TABLE):
        return
    payload = {**_meta(cfg, "reproduce-paper"), "alpha": cfg.alpha, "rows": rows}
    em.emit("comparison.json", _json_text(payload))
    header = ["configuration", "estimate", "reference", "abs_diff", "comparator", "reference_comparator"]
    em.emit("comparison.csv", _csv_text(header, [[r[h] for h in header] for r in rows],
                                        _comment(cfg, "reproduce-paper")))


HANDLERS = {
    "ranks": cmd_ranks,
    "simulate": cmd_simulate,
    "density": cmd_density,
    "taildep": cmd_taildep,
    "fit": cmd_fit,
    "var": cmd_var,
    "reproduce-paper": cmd_reproduce,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("argv", f"missing subcommand, expected one of {', '.join(SUBCOMMANDS)}")
        cfg = resolve_config(args, args.command)
        em = _Emitter(cfg, stdout)
        HANDLERS[args.command](cfg, em)
    except ConfigError as exc:
        stderr.write(f"error: field={exc.field} {exc}\n")
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        msg = " ".join(str(exc).split())
        stderr.write(f"error: {type(exc).__name__}: {msg}\n")
        return 1
    if em.out is not None:
        echo = {**_meta(cfg, args.command), "artifacts": em.written}
        stdout.write(json.dumps(echo, sort_keys=True) + "\n")
    else:
        stderr.write(json.dumps(_meta(cfg, args.command), sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
