"""Command-line front end: ``metricpolytope <verb> [flags]``.

Exit codes: 0 success, 2 invalid configuration, 3 resource cap reached,
4 a ``verify`` check failed.  Errors are also written to stderr as JSON.

A config file (``--config``) is INI-style; keys in ``[defaults]`` apply to
every verb and keys in a section named after the verb apply to that verb.
Command-line flags win over the file.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .discrete import count_discrete_report, hypergraph_stats, sandwich_check
from .errors import BudgetExceeded, CapabilityError, CapacityError, RefineScheduleError
from .estimators import (
    default_schedule,
    min_distance_cdf,
    multilevel_volume,
    prob_distance_below,
    rows_to_csv,
)
from .exactvol import EXACT_LIMIT, EXTENDED_LIMIT, exact_volume, format_rational, metric_polytope, metric_volume
from .sampler import ChainConfig, default_delta, hit_and_run, local_lemma_experiment
from .verification import SUITES, run_suite

SCHEMA_VERSION = 1
VERBS = (
    "exact-volume", "sample", "estimate-volume", "estimate-tail", "min-distance",
    "local-lemma", "count-discrete", "sandwich", "hypergraph", "verify",
)
RANDOMIZED = {"sample", "estimate-volume", "estimate-tail", "min-distance", "local-lemma", "verify"}
EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class ExperimentConfig:
    verb: str
    n: list[int] = field(default_factory=list)
    M: int | None = None
    seed: int | None = None
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "json"
    workers: int | None = None
    seed_was_generated: bool = False

    def validate(self):
        if self.verb not in VERBS:
            raise ConfigError(f"unknown verb {self.verb!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        needs_n = self.verb not in ("verify",)
        if needs_n and not self.n:
            raise ConfigError(f"{self.verb} requires --n")
        if any(k < 2 for k in self.n):
            raise ConfigError("--n must be at least 2")
        if self.verb in ("count-discrete", "sandwich", "hypergraph"):
            if self.M is None or self.M < 1:
                raise ConfigError(f"{self.verb} requires --M >= 1")
        if self.verb == "hypergraph" and self.n[0] < 3:
            raise ConfigError("hypergraph requires n >= 3")
        if self.verb == "exact-volume":
            limit = EXTENDED_LIMIT if self.params.get("allow_n5") else EXACT_LIMIT
            if self.n[0] > limit:
                raise CapabilityError(f"exact volume supported for n <= {limit}; use estimate-volume")
        if self.verb == "sandwich" and self.n[0] > EXACT_LIMIT:
            raise CapabilityError(f"sandwich needs an exact volume; n <= {EXACT_LIMIT}")
        if self.verb in ("sample", "estimate-volume", "estimate-tail", "min-distance", "local-lemma"):
            if self.params.get("samples") is None or self.params["samples"] < 1:
                raise ConfigError(f"{self.verb} requires --samples >= 1")
        if self.verb == "min-distance" and not self.params.get("thresholds"):
            raise ConfigError("min-distance requires --thresholds")
        if self.verb == "local-lemma":
            delta = self.params.get("delta")
            if delta is not None and not 0 < delta < 1:
                raise ConfigError("--delta must lie in (0, 1)")
        if self.verb == "verify":
            suite = self.params.get("suite")
            if suite not in SUITES:
                raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
        if self.verb in ("sample",) and self.format == "json" and len(self.n) > 1:
            raise ConfigError("sample takes a single --n")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if self.params.get("direction") not in (None, "sphere", "coordinate"):
            raise ConfigError("--direction must be sphere or coordinate")
        return self


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="metricpolytope", description="Experiments on the metric polytope.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config")
    p.add_argument("--n", type=_int_list, help="number of points; comma list for sweeps")
    p.add_argument("--M", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--thresholds", type=_float_list)
    p.add_argument("--levels", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--direction", choices=("sphere", "coordinate"))
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thinning", type=int)
    p.add_argument("--suite")
    p.add_argument("--node-budget", dest="node_budget", type=int)
    p.add_argument("--allow-n5", dest="allow_n5", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"))
    return p


_CONVERT = {
    "n": _int_list, "M": int, "seed": int, "samples": int, "delta": float, "threshold": float,
    "thresholds": _float_list, "levels": int, "chains": int, "direction": str, "burn_in": int,
    "thinning": int, "suite": str, "node_budget": int, "workers": int, "out": str, "format": str,
    "allow_n5": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}


def _read_config_file(path: str, verb: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep "M" distinct from lower-case keys
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    merged = {}
    for section in ("defaults", verb):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                key = key.replace("-", "_")
                if key not in _CONVERT:
                    raise ConfigError(f"unknown config key {key!r} in [{section}]")
                merged[key] = _CONVERT[key](raw)
    return merged


def parse_config(argv: list[str]) -> ExperimentConfig:
    args = vars(build_parser().parse_args(argv))
    verb = args.pop("verb")
    config_path = args.pop("config")
    values = _read_config_file(config_path, verb) if config_path else {}
    values.update({k: v for k, v in args.items() if v is not None})
    seed = values.pop("seed", None)
    generated = False
    if seed is None and verb in RANDOMIZED:
        seed = int(np.random.SeedSequence().generate_state(2, dtype=np.uint32).view(np.uint64)[0])
        generated = True
    cfg = ExperimentConfig(
        verb=verb,
        n=values.pop("n", []),
        M=values.pop("M", None),
        seed=seed,
        output_path=values.pop("out", None),
        format=values.pop("format", "json"),
        workers=values.pop("workers", None),
        params=values,
        seed_was_generated=generated,
    )
    return cfg.validate()


# -- verbs -----------------------------------------------------------------


def _chain_config(cfg: ExperimentConfig, n: int, seed: int) -> ChainConfig:
    p = cfg.params
    return ChainConfig(
        n, seed=seed, burn_in=p.get("burn_in"), thinning=p.get("thinning"),
        chains=p.get("chains", 1), direction=p.get("direction", "sphere"),
    )


def _do_exact_volume(cfg):
    n = cfg.n[0]
    ev = exact_volume(metric_polytope(n))
    rep = ev.report()
    return rep, f"Vol(M_{n}) = {rep['volume']} ~ {rep['volume_float']:.12g}", None


def _do_sample(cfg):
    n = cfg.n[0]
    batch = hit_and_run(_chain_config(cfg, n, cfg.seed), cfg.params["samples"], workers=cfg.workers)
    side = batch.sidecar()
    side["n_samples"] = len(batch)
    return side, f"{len(batch)} samples from M_{n}", batch.to_csv()


def _do_estimate_volume(cfg):
    rows = []
    for n in cfg.n:
        levels = cfg.params.get("levels")
        sched = default_schedule(n, cfg.params["samples"], cfg.seed, levels)
        est = multilevel_volume(
            sched, chains=cfg.params.get("chains", 4), direction=cfg.params.get("direction", "sphere"),
            burn_in=cfg.params.get("burn_in"), thinning=cfg.params.get("thinning"), workers=cfg.workers,
        )
        rows.append({
            "quantity": "log_volume", "n": n,
            "params": {"levels": sched.levels, "samples_per_level": cfg.params["samples"]},
            "estimate": est.value, "std_error": est.std_error,
            "ci": [est.ci_low, est.ci_high], "n_samples": est.n_samples, "seed": cfg.seed,
            "schedule": list(sched.thresholds), "levels": est.details["levels"],
        })
    summary = "; ".join(f"log Vol(M_{r['n']}) = {r['estimate']:.5f} +- {r['std_error']:.5f}" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _tail_batch(cfg, n):
    params = dict(cfg.params)
    params.setdefault("chains", 4)
    params.setdefault("direction", "coordinate" if n > 4 else "sphere")
    sub = ExperimentConfig(cfg.verb, [n], params=params)
    return hit_and_run(_chain_config(sub, n, cfg.seed + n), cfg.params["samples"], workers=cfg.workers)


def _do_estimate_tail(cfg):
    t = cfg.params.get("threshold", 1.0)
    rows = []
    for n in cfg.n:
        est = prob_distance_below(n, t, _tail_batch(cfg, n))
        rows.append({
            "quantity": "P(d12 < t)", "n": n, "params": {"threshold": t}, "estimate": est.value,
            "std_error": est.std_error, "ci": [est.ci_low, est.ci_high], "n_samples": est.n_samples,
            "seed": cfg.seed, "sqrt_n_estimate": math.sqrt(n) * est.value,
        })
    summary = "; ".join(f"n={r['n']}: P(d12<{t:g}) = {r['estimate']:.5f}" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _do_min_distance(cfg):
    rows = []
    for n in cfg.n:
        ests = min_distance_cdf(n, cfg.params["thresholds"], _tail_batch(cfg, n))
        for th, est in zip(cfg.params["thresholds"], ests):
            rows.append({
                "quantity": "P(min d <= t)", "n": n, "params": {"threshold": th}, "estimate": est.value,
                "std_error": est.std_error, "ci": [est.ci_low, est.ci_high], "n_samples": est.n_samples,
                "seed": cfg.seed,
            })
    return _sweep(rows, cfg), f"{len(rows)} minimum-distance estimates", _sweep_csv(rows, cfg)


def _do_local_lemma(cfg):
    rows = []
    for n in cfg.n:
        delta = cfg.params.get("delta") or default_delta(n)
        res = local_lemma_experiment(n, delta, cfg.params["samples"], cfg.seed)
        row = json.loads(res.to_json())
        row["seed"] = cfg.seed
        rows.append(row)
    summary = "; ".join(f"n={r['n']}: p_hat = {r['p_hat']}" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _do_count_discrete(cfg):
    rows = []
    for n in cfg.n:
        rep = count_discrete_report(n, cfg.M, cfg.params.get("node_budget"), cfg.workers)
        rep["count"] = str(rep["count"])
        rows.append(rep)
    summary = "; ".join(f"|M_{r['n']}^{r['M']}| = {r['count']}" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _do_sandwich(cfg):
    rows = []
    for n in cfg.n:
        rep = sandwich_check(n, cfg.M, metric_volume(n))
        rows.append({
            "n": n, "M": cfg.M, "lower": format_rational(rep["lower"]), "count": str(rep["count"]),
            "upper": format_rational(rep["upper"]), "lower_holds": rep["lower_holds"], "upper_holds": rep["upper_holds"],
        })
    summary = "; ".join(f"n={r['n']}: {r['lower']} <= {r['count']} <= {r['upper']}" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _do_hypergraph(cfg):
    rows = [hypergraph_stats(n, cfg.M).as_dict() for n in cfg.n]
    summary = "; ".join(f"n={r['n']} M={r['M']}: {r['edge_count']} edges" for r in rows)
    return _sweep(rows, cfg), summary, _sweep_csv(rows, cfg)


def _do_verify(cfg):
    rep = run_suite(cfg.params["suite"], samples=cfg.params.get("samples"), seed=cfg.seed, workers=cfg.workers)
    rep["seed"] = cfg.seed
    status = "PASS" if rep["passed"] else "FAIL"
    lines = ", ".join(f"{c['name']}: {'ok' if c['passed'] else 'FAILED'}" for c in rep["checks"])
    return rep, f"{status} {rep['suite']} ({lines})", None


def _sweep(rows, cfg):
    return rows[0] if len(rows) == 1 else {"rows": rows}


def _flat(row):
    return {k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in row.items()}


def _sweep_csv(rows, cfg):
    return rows_to_csv([_flat(r) for r in rows])


HANDLERS = {
    "exact-volume": _do_exact_volume,
    "sample": _do_sample,
    "estimate-volume": _do_estimate_volume,
    "estimate-tail": _do_estimate_tail,
    "min-distance": _do_min_distance,
    "local-lemma": _do_local_lemma,
    "count-discrete": _do_count_discrete,
    "sandwich": _do_sandwich,
    "hypergraph": _do_hypergraph,
    "verify": _do_verify,
}


def _json_default(obj):
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_error(kind: str, message: str, code: int, stream) -> int:
    stream.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def run(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        payload, summary, csv_text = HANDLERS[cfg.verb](cfg)
    except (BudgetExceeded, CapacityError, CapabilityError) as err:
        return _emit_error(type(err).__name__, str(err), EXIT_CAP, stderr)
    except RefineScheduleError as err:
        return _emit_error(type(err).__name__, str(err), EXIT_CAP, stderr)
    except ValueError as err:
        return _emit_error(type(err).__name__, str(err), EXIT_INVALID, stderr)

    artifact = {"schema_version": SCHEMA_VERSION, "verb": cfg.verb}
    if cfg.seed is not None:
        artifact["seed"] = cfg.seed
        artifact["seed_generated"] = cfg.seed_was_generated
    artifact["result"] = payload
    json_text = json.dumps(artifact, indent=2, default=_json_default) + "\n"

    if cfg.verb == "sample":
        # samples are CSV; configuration and diagnostics go to a JSON sidecar
        body = csv_text
        sidecar = json_text
    elif cfg.format == "csv" and csv_text is not None:
        body, sidecar = csv_text, None
    else:
        body, sidecar = json_text, None

    if cfg.output_path:
        out = Path(cfg.output_path)
        out.write_text(body)
        if sidecar is not None:
            Path(str(out) + ".json").write_text(sidecar)
        stdout.write(summary + "\n")
    else:
        stdout.write(body)
        if sidecar is not None:
            stderr.write(sidecar)
        stderr.write(summary + "\n")

    if cfg.verb == "verify" and not payload["passed"]:
        return EXIT_CHECK
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except CapabilityError as err:
        return _emit_error("CapabilityError", str(err), EXIT_CAP, sys.stderr)
    except (ConfigError, ValueError) as err:
        return _emit_error("ConfigError", str(err), EXIT_INVALID, sys.stderr)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
