"""Experiment registry, seeded trial execution and CSV/manifest output.

Every experiment maps a resolved parameter dict and a per-trial generator to a
list of rows; a check then turns all rows into a verdict.  Hard experiments
assert exact bounds and decide the exit code; soft ones test statistical
trends and only raise a separate flag.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .arrangement import candidate_diagram
from .backward import (
    TailConfig, backward_run, quicksort_comparisons, quicksort_expected_total, staircase_property, tail_threshold,
)
from .candidate import (
    candidate_set, default_bbox, k_environment_polygon, proxy_overlay_complexity, proxy_set, ray_profiles,
)
from .levels import incremental_k_level_vertices, line_levels, moment_trial, random_lines
from .random_model import ConfigError, DistributionSpec, harmonic, sample_site_set, substream, v_delta_mc
from .staircase import staircase_mask

SEED_ENV = "PPLAB_SEED"
MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class Experiment:
    name: str
    claim: str
    hard: bool
    defaults: dict
    columns: tuple[str, ...]
    trial: Callable[[dict, int, np.random.Generator], list[dict]]
    check: Callable[[dict, list[dict]], tuple[bool, str]]


REGISTRY: dict[str, Experiment] = {}


def register(name, claim, *, hard, defaults, columns):
    def deco(fn):
        trial, check = fn()
        REGISTRY[name] = Experiment(name, claim, hard, dict(defaults), tuple(columns), trial, check)
        return fn
    return deco


def registry_list() -> list[tuple[str, str, str]]:
    return [(e.name, "hard" if e.hard else "soft", e.claim) for e in REGISTRY.values()]


# configuration ---------------------------------------------------------------

_INT_KEYS = {"n", "d", "k", "r", "trials", "samples", "queries", "kmax", "rays", "ray_samples"}
_FLOAT_KEYS = {"gamma", "delta", "c1", "c", "c_prime", "r_ratio"}
_LIST_KEYS = {"ns", "ks"}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    attr_dist: DistributionSpec | None = None
    out: str | None = None
    threads: int = 1

    def resolved(self) -> dict:
        """Experiment defaults overlaid with the given parameters, validated."""
        exp = get_experiment(self.experiment)
        p = dict(exp.defaults)
        for key, val in self.params.items():
            if val is None:
                continue
            if key == "n" and "ns" in p and "n" not in p:
                p["ns"] = [int(val)]
                continue
            if key not in p:
                raise ConfigError(f"experiment {exp.name!r} has no parameter {key!r}")
            p[key] = val
        for key, val in p.items():
            if val is None:
                continue
            try:
                if key in _INT_KEYS:
                    p[key] = int(val)
                elif key in _FLOAT_KEYS:
                    p[key] = float(val)
                elif key in _LIST_KEYS:
                    p[key] = [int(v) for v in val]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {val!r}") from exc
        for key in ("n", "d", "k", "r", "samples", "queries", "rays", "ray_samples"):
            if p.get(key) is not None and p[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
        if p.get("trials") is not None and p["trials"] < 0:
            raise ConfigError("trials must be >= 0")
        if "ns" in p and (not p["ns"] or min(p["ns"]) < 1):
            raise ConfigError("ns must be a nonempty list of positive sizes")
        if p.get("delta") is not None and not 0.0 < p["delta"] <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        if p.get("gamma") is not None and p["gamma"] < 2 * math.e:
            raise ConfigError("gamma must be >= 2e")
        if p.get("kmax") is not None and p["kmax"] < 0:
            raise ConfigError("kmax must be >= 0")
        if self.attr_dist is not None:
            p["attr_dist"] = self.attr_dist.to_json()
        return p

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {"experiment", "seed", "params", "attr_dist", "out", "threads"}
        extra = set(data) - known
        # parameters may also sit at the top level
        params = dict(data.pop("params", {}) or {})
        for key in extra:
            params[key] = data.pop(key)
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' name")
        attr = data.get("attr_dist")
        return cls(
            experiment=str(data["experiment"]),
            seed=parse_seed(data.get("seed", 0)),
            params=params,
            attr_dist=DistributionSpec.from_json(attr) if attr is not None else None,
            out=data.get("out"),
            threads=int(data.get("threads", 1)),
        )


def parse_seed(value) -> int:
    try:
        seed = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}") from exc
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed out of range: {seed}")
    return seed


def default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    return parse_seed(env) if env not in (None, "") else 0


def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(REGISTRY)}") from None


def _attr_spec(p):
    return DistributionSpec.from_json(p["attr_dist"]) if p.get("attr_dist") else None


def _mean_se(xs):
    a = np.asarray(xs, dtype=float)
    if len(a) == 0:
        return float("nan"), float("nan")
    se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else float("nan")
    return float(a.mean()), se


# experiments -----------------------------------------------------------------

@register("vdelta", "V_d(delta) = sum_{i<d} delta ln^i(1/delta) / i!  vs Monte Carlo, |diff| <= 4 stderr",
          hard=False, defaults={"d": 2, "delta": 0.1, "samples": 1_000_000, "trials": 1},
          columns=("d", "delta", "samples", "closed_form", "estimate", "stderr", "z", "pass"))
def _vdelta():
    def trial(p, t, rng):
        res = v_delta_mc(p["d"], p["delta"], p["samples"], rng=rng)
        z = (res.estimate - res.value) / res.stderr if res.stderr > 0 else (0.0 if res.estimate == res.value else math.inf)
        return [{"d": p["d"], "delta": p["delta"], "samples": p["samples"], "closed_form": res.value,
                 "estimate": res.estimate, "stderr": res.stderr, "z": z, "pass": abs(z) <= 4.0}]

    def check(p, rows):
        ok = all(r["pass"] for r in rows)
        return ok, f"max |z| = {max((abs(r['z']) for r in rows), default=0.0):.3g}"

    return trial, check


def _staircase_sizes(n, d, rng):
    pts = rng.random((n, d))
    return int(np.count_nonzero(staircase_mask(pts, np.arange(n))))


@register("staircase-2d-mean", "E|St| = H_n for n uniform points in [0,1]^2; mean within 4 stderr",
          hard=False, defaults={"n": 4096, "trials": 400},
          columns=("n", "size", "harmonic"))
def _st_mean():
    def trial(p, t, rng):
        return [{"n": p["n"], "size": _staircase_sizes(p["n"], 2, rng), "harmonic": harmonic(p["n"])}]

    def check(p, rows):
        if len(rows) < 2:
            return True, "too few trials for a verdict"
        mean, se = _mean_se([r["size"] for r in rows])
        h = harmonic(p["n"])
        ok = abs(mean - h) <= 4.0 * se
        return ok, f"mean {mean:.4f} +- {se:.4f} vs H_n = {h:.4f}"

    return trial, check


@register("staircase-whp", "|St| <= 8 ln^{d-1} n in every trial (whp growth ceiling)",
          hard=False, defaults={"n": 4096, "d": 2, "trials": 400},
          columns=("n", "d", "size", "ceiling", "pass"))
def _st_whp():
    def trial(p, t, rng):
        size = _staircase_sizes(p["n"], p["d"], rng)
        ceiling = 8.0 * math.log(p["n"]) ** (p["d"] - 1)
        return [{"n": p["n"], "d": p["d"], "size": size, "ceiling": ceiling, "pass": size <= ceiling}]

    def check(p, rows):
        return all(r["pass"] for r in rows), f"max size {max((r['size'] for r in rows), default=0)}"

    return trial, check


@register("backward-quicksort",
          "per-element comparisons <= gamma 2k ln n with k=2; mean total = 2(n+1)H_n - 4n within 5%",
          hard=True, defaults={"n": 10_000, "trials": 50, "gamma": 2 * math.e},
          columns=("n", "total", "expected_total", "max_count", "bound", "pass"))
def _quicksort():
    def trial(p, t, rng):
        res = quicksort_comparisons(p["n"], rng=rng)
        bound = tail_threshold(p["n"], 2, p["gamma"])
        return [{"n": p["n"], "total": res.total, "expected_total": quicksort_expected_total(p["n"]),
                 "max_count": res.max_count, "bound": bound, "pass": res.max_count <= bound}]

    def check(p, rows):
        if not rows:
            return True, "no trials"
        exp = quicksort_expected_total(p["n"])
        mean = float(np.mean([r["total"] for r in rows]))
        rel = abs(mean - exp) / exp
        ok = all(r["pass"] for r in rows) and rel <= 0.05
        return ok, f"max count {max(r['max_count'] for r in rows)} vs {rows[0]['bound']:.1f}; mean total off by {rel:.2%}"

    return trial, check


@register("backward-tail",
          "Pr[sum X_i > gamma 2c'k ln n] <= n^{-gamma k} + n^{-c} for the staircase of a random prefix",
          hard=False, defaults={"n": 512, "d": 2, "k": None, "gamma": 2 * math.e, "c": 1.0, "c_prime": 1.0,
                                "trials": 100},
          columns=("n", "d", "k", "gamma", "sum", "threshold", "exceeded", "max_output"))
def _tail():
    def k_of(p):
        return p["k"] if p["k"] is not None else math.ceil(2.0 * math.log(p["n"]) ** (p["d"] - 1))

    def trial(p, t, rng):
        pts = rng.random((p["n"], p["d"]))
        k = k_of(p)
        run = backward_run(np.arange(p["n"]), staircase_property(pts), rng=rng)
        thr = tail_threshold(p["n"], k, p["gamma"], p["c_prime"])
        return [{"n": p["n"], "d": p["d"], "k": k, "gamma": p["gamma"], "sum": run.sum, "threshold": thr,
                 "exceeded": run.sum > thr, "max_output": run.max_output}]

    def check(p, rows):
        if not rows:
            return True, "no trials"
        cfg = TailConfig(k_of(p), p["gamma"], len(rows), 0, p["c"], p["c_prime"])
        frac = sum(r["exceeded"] for r in rows) / len(rows)
        bound = p["n"] ** (-cfg.gamma * cfg.k) + (p["n"] ** (-cfg.c) if cfg.c is not None else 0.0)
        slack = 3.0 * math.sqrt(frac * (1 - frac) / len(rows))
        return frac <= bound + slack, f"tail fraction {frac:.3g} vs bound {bound:.3g}"

    return trial, check


@register("candidate-vs-oracle", "stored per-face candidate set == direct staircase of P(x) at every query",
          hard=True, defaults={"ns": [6, 10], "d": 2, "trials": 20, "queries": 500},
          columns=("n", "queries", "mismatches", "nudged", "faces", "V", "E", "F", "space", "pass"))
def _cand_oracle():
    def trial(p, t, rng):
        rows = []
        for n in p["ns"]:
            sites = sample_site_set(n, p["d"], attr_spec=_attr_spec(p), rng=rng)
            diag = candidate_diagram(sites)
            qs = np.column_stack([rng.uniform(0.0, 1.0, p["queries"]), rng.uniform(0.0, 1.0, p["queries"])])
            bad = nudged = 0
            for q in qs:
                stored, used, moved = diag.query(q)
                nudged += moved
                bad += list(stored) != candidate_set(used, sites).member_ids
            V, E, F = diag.complexity
            rows.append({"n": n, "queries": p["queries"], "mismatches": bad, "nudged": nudged,
                         "faces": diag.subdivision.n_faces, "V": V, "E": E, "F": F,
                         "space": diag.space_complexity, "pass": bad == 0})
        return rows

    def check(p, rows):
        bad = sum(r["mismatches"] for r in rows)
        return bad == 0, f"{bad} mismatches over {sum(r['queries'] for r in rows)} queries"

    return trial, check


_PROXY_COLUMNS = ("query_x", "query_y", "n", "k", "cand_size", "proxy_size", "contained", "size_bound", "within_bound")


def _proxy_trial(p, t, rng):
    n, d = p["n"], p["d"]
    k = p["k"] if p["k"] is not None else math.ceil(p["c1"] * math.log(n) ** d)
    k = min(k, n)
    sites = sample_site_set(n, d, attr_spec=_attr_spec(p), rng=rng)
    qs = rng.random((p["queries"], 2))
    bound = 2.0 * k * math.log(n)
    rows = []
    for qx, qy in qs:
        cand = candidate_set((qx, qy), sites).member_ids
        prox = set(proxy_set((qx, qy), sites, k).member_ids)
        rows.append({"query_x": qx, "query_y": qy, "n": n, "k": k, "cand_size": len(cand), "proxy_size": len(prox),
                     "contained": all(c in prox for c in cand), "size_bound": bound,
                     "within_bound": len(prox) <= bound})
    return rows


_PROXY_DEFAULTS = {"n": 2048, "d": 2, "k": None, "c1": 2.0, "trials": 20, "queries": 200}


@register("containment", "C(x) ⊆ Π_k(x) at sampled queries for k = ⌈c1 ln^d n⌉, i.e. k = Θ(log^d n)",
          hard=True, defaults=_PROXY_DEFAULTS, columns=_PROXY_COLUMNS)
def _containment():
    def check(p, rows):
        bad = sum(not r["contained"] for r in rows)
        return bad == 0, f"{bad} of {len(rows)} queries with C(x) not inside the proxy set"

    return _proxy_trial, check


def expected_proxy_size(n: int, k: int) -> float:
    """``sum_i min(k/i, 1)``: the i-th site in volume order joins with probability ``min(k/i, 1)``."""
    return float(sum(min(k / i, 1.0) for i in range(1, n + 1)))


@register("proxy-size", "|Π_k(x)| <= 2k ln n at sampled queries; mean ≈ k(1 + ln(n/k)) within 25%",
          hard=False, defaults=_PROXY_DEFAULTS, columns=_PROXY_COLUMNS)
def _proxy_size():
    def check(p, rows):
        if not rows:
            return True, "no trials"
        n, k = rows[0]["n"], rows[0]["k"]
        ref = k * (1.0 + math.log(n / k))
        mean = float(np.mean([r["proxy_size"] for r in rows]))
        ok = all(r["within_bound"] for r in rows) and abs(mean - ref) <= 0.25 * ref
        return ok, (f"max |Π| {max(r['proxy_size'] for r in rows)} vs {rows[0]['size_bound']:.1f}; "
                    f"mean {mean:.2f} vs k(1+ln(n/k)) = {ref:.2f}")

    return _proxy_trial, check


@register("online-klevel", "distinct k-level vertices over all insertion prefixes <= 2(k+2)n",
          hard=True, defaults={"n": 40, "k": 3, "trials": 50},
          columns=("n", "k", "vertices", "bound", "pass"))
def _online():
    def trial(p, t, rng):
        # one line set per base seed; trials vary the insertion order
        lines = random_lines(p["n"], p["_lines_rng"]())
        total = incremental_k_level_vertices(lines, rng.permutation(p["n"]), p["k"])
        bound = 2 * (p["k"] + 2) * p["n"]
        return [{"n": p["n"], "k": p["k"], "vertices": total, "bound": bound, "pass": total <= bound}]

    def check(p, rows):
        return all(r["pass"] for r in rows), f"max {max((r['vertices'] for r in rows), default=0)} vertices"

    return trial, check


@register("edges-per-line", "each line carries at most k+2 edges of the k-level",
          hard=True, defaults={"n": 12, "kmax": 5, "trials": 200},
          columns=("n", "k", "max_edges", "bound", "violations", "pass"))
def _edges_per_line():
    def trial(p, t, rng):
        lv = line_levels(random_lines(p["n"], rng))
        rows = []
        for k in range(p["kmax"] + 1):
            counts = np.bincount([e.line for e in lv.at_level(k)], minlength=p["n"])
            viol = int(np.count_nonzero(counts > k + 2))
            rows.append({"n": p["n"], "k": k, "max_edges": int(counts.max()), "bound": k + 2,
                         "violations": viol, "pass": viol == 0})
        return rows

    def check(p, rows):
        v = sum(r["violations"] for r in rows)
        return v == 0, f"{v} violations"

    return trial, check


def _ratio_check(metric, lo, hi):
    def check(p, rows):
        ns = p["ns"]
        means = {n: float(np.mean([r[metric] for r in rows if r["n"] == n])) for n in ns if any(r["n"] == n for r in rows)}
        if len(means) < 2:
            return True, "means " + ", ".join(f"n={n}: {m:.2f}" for n, m in means.items())
        a, b = means[ns[0]], means[ns[-1]]
        ratio = b / a if a > 0 else math.inf
        ok = (lo is None or ratio >= lo) and ratio <= hi
        window = f"[{lo}, {hi}]" if lo is not None else f"<= {hi}"
        return ok, f"mean {metric} n={ns[-1]} / n={ns[0]} = {ratio:.3f} (want {window})"
    return check


@register("moments", "E[sum_{v in V<=k(R)} b(v)] = O(n k^3) for R a sample without replacement; n-trend only",
          hard=False, defaults={"ns": [20, 40], "r_ratio": 0.5, "r": None, "k": 2, "trials": 50},
          columns=("n", "r", "k", "sum_b_vertices", "sum_b_edges"))
def _moments():
    def trial(p, t, rng):
        rows = []
        for n in p["ns"]:
            r = p["r"] if p["r"] is not None else max(3, int(round(p["r_ratio"] * n)))
            if r > n:
                raise ConfigError(f"r={r} exceeds n={n}")
            v, e = moment_trial(n, r, p["k"], rng)
            rows.append({"n": n, "r": r, "k": p["k"], "sum_b_vertices": v, "sum_b_edges": e})
        return rows

    return trial, _ratio_check("sum_b_vertices", 1.2, 3.0)


@register("overlay-trend", "complexity of the overlay of env_k(s_i, S_i) over volume-order prefixes grows quasi-linearly",
          hard=False, defaults={"ns": [16, 32], "k": 2, "trials": 10},
          columns=("n", "k", "V", "E", "F", "total"))
def _overlay():
    def trial(p, t, rng):
        rows = []
        for n in p["ns"]:
            sites = sample_site_set(n, 2, attr_spec=_attr_spec(p), rng=rng)
            oc = proxy_overlay_complexity(sites, p["k"])
            rows.append({"n": n, "k": p["k"], "V": oc.V, "E": oc.E, "F": oc.F, "total": oc.total})
        return rows

    return trial, _ratio_check("total", None, 3.5)


@register("star-shaped", "env_k(s, S) is star-shaped about s: closer-site count non-decreasing along rays",
          hard=True, defaults={"n": 16, "ks": [2, 4], "rays": 360, "ray_samples": 100, "trials": 1},
          columns=("n", "k", "site", "rays", "nonmonotone", "polygon_mismatch", "pass"))
def _star():
    def trial(p, t, rng):
        sites = sample_site_set(p["n"], 2, attr_spec=_attr_spec(p), rng=rng)
        bbox = default_bbox(sites)
        rows = []
        for k in p["ks"]:
            for sid in sites.ids:
                sid = int(sid)
                poly = k_environment_polygon(sid, sites, k, bbox)
                profs = ray_profiles(sid, sites, bbox, rays=p["rays"], samples=p["ray_samples"], polygon=poly)
                nonmono = sum(not pr.monotone for pr in profs)
                # the polygon must hold exactly the sample points with count <= k-1
                mism = sum(int(np.count_nonzero(pr.inside != (pr.counts <= k - 1))) > 0 or not pr.prefix_shaped
                           for pr in profs)
                rows.append({"n": p["n"], "k": k, "site": sid, "rays": p["rays"], "nonmonotone": nonmono,
                             "polygon_mismatch": mism, "pass": nonmono == 0 and mism == 0})
        return rows

    def check(p, rows):
        a = sum(r["nonmonotone"] for r in rows)
        b = sum(r["polygon_mismatch"] for r in rows)
        return a == 0 and b == 0, f"{a} non-monotone rays, {b} rays where the polygon disagrees"

    return trial, check


# running -----------------------------------------------------------------------

@dataclass
class RunResult:
    experiment: str
    rows: list[dict]
    manifest: dict
    passed: bool
    hard: bool
    summary: str

    @property
    def hard_failure(self) -> bool:
        return self.hard and not self.passed

    @property
    def soft_failure(self) -> bool:
        return not self.hard and not self.passed


def config_digest(params: dict, experiment: str, seed: int) -> str:
    blob = json.dumps({"experiment": experiment, "seed": seed, "params": params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run every trial of ``cfg`` and check the result.

    Trial ``t`` draws from the substream ``(seed, t)``, so rows do not depend
    on the number of worker threads; they are returned sorted by trial.
    """
    exp = get_experiment(cfg.experiment)
    p = cfg.resolved()
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    started = time.time()
    params = dict(p)
    seed = cfg.seed
    # experiments that share one instance across trials draw it from this stream
    params["_lines_rng"] = lambda: substream(seed, 1 << 32)

    def one(t):
        rows = exp.trial(params, t, substream(seed, t))
        return [{"experiment": exp.name, "trial": t, **r} for r in rows]

    trials = range(p.get("trials", 1))
    if cfg.threads == 1:
        chunks = [one(t) for t in trials]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(one, trials))
    rows = [r for c in chunks for r in c]
    rows.sort(key=lambda r: r["trial"])
    passed, summary = exp.check(p, rows)
    manifest = {
        "experiment": exp.name,
        "config_digest": config_digest(p, exp.name, seed),
        "config": p,
        "base_seed": seed,
        "version": __version__,
        "started": started,
        "finished": time.time(),
        "rows": len(rows),
        "kind": "hard" if exp.hard else "soft",
        "passed": bool(passed),
        "soft_fail": bool(not exp.hard and not passed),
        "summary": summary,
    }
    return RunResult(exp.name, rows, manifest, bool(passed), exp.hard, summary)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % float(v)
    if v is None:
        return ""
    return str(v)


def csv_text(result: RunResult) -> str:
    exp = get_experiment(result.experiment)
    header = ["experiment", "trial", *exp.columns]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in result.rows:
        w.writerow([_fmt(r.get(c)) for c in header])
    return buf.getvalue()


def write_outputs(result: RunResult, out: str) -> str:
    """Write the CSV to ``out`` and the manifest next to it; returns the manifest path."""
    with open(out, "w", newline="") as fh:
        fh.write(csv_text(result))
    mpath = out + ".manifest.json"
    with open(mpath, "w") as fh:
        json.dump(result.manifest, fh, indent=1, sort_keys=True)
    return mpath


__all__ = [
    "REGISTRY", "Experiment", "ExperimentConfig", "RunResult", "registry_list", "run_experiment", "csv_text",
    "write_outputs", "parse_seed", "default_seed", "get_experiment", "expected_proxy_size", "config_digest",
]
