"""Config-driven experiment runner.

A config is a TOML file with top-level ``kind``, ``seed``, ``workers`` and
``max_work`` keys, a ``[grid]`` table of parameter lists and an optional
``[geometry]`` table of overrides.  Each kind expands its grid into cells
in a fixed order, evaluates them (optionally in a process pool) and writes
one CSV plus a JSON summary sidecar.  Every random draw comes from a
generator seeded by ``(seed, cell index)``, so results do not depend on
scheduling.  Wall time is written only when timings are requested, which
keeps default output byte-identical across runs.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalAbort, PreconditionError, UnsupportedRegimeError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("bilinear-sweep", "measure-sweep", "extremizer", "imethod", "decay")
SCHEMA_VERSION = 1

# keys each kind reads from [grid] and [geometry]; anything else is a typo
GRID_KEYS = {
    "bilinear-sweep": {"m", "n", "lambda", "N1", "N2", "T", "draws"},
    "measure-sweep": {"lambda", "N1", "N2", "draws", "thickness", "adversarial_etas"},
    "extremizer": {"case", "m", "n", "lambda", "N1", "N2"},
    "imethod": {"s", "alpha", "k", "N"},
    "decay": {"lambda", "N1", "N2", "T"},
}
GEOMETRY_KEYS = {
    "bilinear-sweep": {"box_length", "real_width", "torus_width", "samples_per_period",
                       "shift", "check_wrap"},
    "measure-sweep": set(),
    "extremizer": {"box_length", "samples_per_period", "window"},
    "imethod": {"band_factor", "dt_scale", "box_length", "horizon", "coupling"},
    "decay": {"box_length", "steps_per_window", "grid_points"},
}

BILINEAR_COLUMNS = ["m", "n", "lambda", "L", "N1", "N2", "T", "steps", "lhs", "norm_f",
                    "norm_g", "k_pred", "ratio", "seconds"]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class ResourceRefusal(RuntimeError):
    """The estimated work exceeds the configured ceiling."""

    def __init__(self, estimate, ceiling):
        super().__init__(f"estimated work {estimate:.3g} exceeds the ceiling {ceiling:.3g}; "
                         "raise max_work or shrink the grid")
        self.estimate = estimate
        self.ceiling = ceiling


@dataclass
class ExperimentConfig:
    kind: str
    grid: dict
    geometry: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    max_work: float = 1e13
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if not isinstance(self.grid, dict) or not self.grid:
            raise ConfigError("the [grid] table is empty")
        for table, allowed in (("grid", GRID_KEYS), ("geometry", GEOMETRY_KEYS)):
            extra = set(getattr(self, table)) - allowed[self.kind]
            if extra:
                raise ConfigError(f"unknown [{table}] keys for {self.kind}: {sorted(extra)}")
        for key, val in self.grid.items():
            if isinstance(val, list) and not val:
                raise ConfigError(f"grid entry {key!r} is an empty list")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        try:
            kind = d.pop("kind")
        except KeyError:
            raise ConfigError("config needs a 'kind' key") from None
        known = {"grid", "geometry", "seed", "workers", "max_work", "out"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(kind=kind, **d)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def _list(grid, key, default=None):
    if key not in grid:
        if default is None:
            raise ConfigError(f"grid needs {key!r}")
        return list(default)
    v = grid[key]
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _pairs(grid):
    N1s, N2s = _list(grid, "N1"), _list(grid, "N2")
    pairs = [(N1, N2) for N2 in N2s for N1 in N1s if N1 >= N2]
    if not pairs:
        raise ConfigError("no (N1, N2) pair with N1 >= N2 in the grid")
    return pairs


# -- cell expansion ----------------------------------------------------------

def expand_cells(cfg):
    """Ordered list of parameter dicts, one per output row group."""
    g, geo = cfg.grid, cfg.geometry
    cells = []
    if cfg.kind == "bilinear-sweep":
        m, n = int(g.get("m", 1)), int(g.get("n", 1))
        T = sorted(float(t) for t in _list(g, "T", [1.0]))
        draws = int(g.get("draws", 1))
        for lam in _list(g, "lambda"):
            for N1, N2 in _pairs(g):
                for draw in range(draws):
                    cells.append(dict(m=m, n=n, lam=lam, N1=N1, N2=N2, T=T, draw=draw,
                                      **geo))
    elif cfg.kind == "measure-sweep":
        for lam in _list(g, "lambda"):
            for N1, N2 in _pairs(g):
                cells.append(dict(lam=lam, N1=N1, N2=N2, draws=int(g.get("draws", 1000)),
                                  thickness=float(g.get("thickness", 1.0)),
                                  adversarial_etas=int(g.get("adversarial_etas", 16))))
    elif cfg.kind == "extremizer":
        case = g.get("case")
        if case is None:
            raise ConfigError("extremizer grid needs 'case'")
        m, n = int(g.get("m", 1)), int(g.get("n", 1))
        for lam in _list(g, "lambda"):
            for N1, N2 in _pairs(g):
                cells.append(dict(case=case, m=m, n=n, lam=lam, N1=N1, N2=N2, **geo))
    elif cfg.kind == "imethod":
        Ns = _list(g, "N")
        if len(Ns) < 3:
            raise ConfigError("imethod needs at least three N values")
        for s in _list(g, "s"):
            for alpha in _list(g, "alpha", [None]):
                for k in _list(g, "k", [1]):
                    a = (1 - s) / s if alpha is None else alpha
                    cells.append(dict(s=s, alpha=a, k=k, N=Ns, **geo))
    else:
        cells.append(dict(lam=g.get("lambda", 4), N1=g.get("N1", 8), N2=g.get("N2", 1),
                          T=_list(g, "T", [10, 100, 1000, 10000]), **geo))
    if not cells:
        raise ConfigError("the grid expands to no cells")
    return cells


def estimate_work(cfg, cells):
    """Rough cost: lattice sites touched per cell times time nodes."""
    total = 0.0
    for c in cells:
        if cfg.kind == "bilinear-sweep":
            L = float(c.get("box_length", 16.0))
            rw = float(c.get("real_width", 1.0))
            tw = float(c.get("torus_width", 1.0))
            per_axis = [rw * L + 1] * c["m"] + [tw * c["lam"] + 1] * c["n"]
            # with at most one torus axis the packet is a tensor product and
            # the separable engine costs a sum over axes, not a product
            sites = sum(per_axis) if c["n"] <= 1 else float(np.prod(per_axis))
            nodes = 8 * math.pi * (tw + 2 * c["N1"]) * (tw + rw) * max(c["T"]) + 64
            total += sites * nodes
        elif cfg.kind == "measure-sweep":
            total += c["draws"] * (4 * c["N2"] * c["lam"] + 1)
        elif cfg.kind == "extremizer":
            L = float(c.get("box_length", 128.0))
            total += (c["N2"] * L + 1) * (c["N2"] * c["lam"] + 1) * 64 * c["N1"]
        elif cfg.kind == "imethod":
            L = c.get("box_length")
            for N in c["N"]:
                lam = N ** c["alpha"]
                Lr = lam if L is None else float(L)
                cells_ = 16 * (2 * N) ** 2 * lam * Lr
                total += cells_ * N ** 2 / float(c.get("dt_scale", 0.01))
        else:
            total += float(c.get("box_length", 2.0 ** 18)) * 2 * 128 * (len(c["T"]) + 1)
    return total


# -- per-kind evaluation -----------------------------------------------------

def _rng(seed, index):
    return np.random.default_rng([int(seed), int(index)])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x) if x != int(x) or abs(x) >= 1e16 else str(int(x))
    return str(x)


def _bilinear_cell(c, rng):
    from .bilinear import (EstimateRecord, check_no_wrap, packet_geometry, predicted_constant,
                           random_packet, spacetime_l2_profile, support_steps)
    import time
    t0 = time.perf_counter()
    m, n, lam, N1, N2, T = c["m"], c["n"], c["lam"], c["N1"], c["N2"], c["T"]
    L = float(c.get("box_length", 16.0))
    rw = float(c.get("real_width", 1.0))
    tw = float(c.get("torus_width", 1.0))
    spp = float(c.get("samples_per_period", 4.0))
    shift = float(c.get("shift", 1.0))
    edges = [rw] * m + [N1 + tw + 1.0] * n
    geo = packet_geometry(m, n, lam, L, edges)
    f = random_packet(geo, N1, rng, real_width=rw, torus_width=tw, shift=shift)
    g = random_packet(geo, N2, rng, real_width=rw, torus_width=tw, shift=shift)
    if c.get("check_wrap", True):
        check_no_wrap(f, max(T))
        check_no_wrap(g, max(T))
    bp = [0.0] + list(T)
    steps = [support_steps(f, g, N1, N2, b - a, samples_per_period=spp)
             for a, b in zip(bp[:-1], bp[1:])]
    prof = spacetime_l2_profile(f, g, N1, N2, bp, steps)
    K = float(predicted_constant(m, n, lam, N1, N2))
    nf, ng = f.norm(), g.norm()
    secs = time.perf_counter() - t0
    rows = []
    for j, (t, lhs) in enumerate(zip(T, prof)):
        rec = EstimateRecord(m, n, lam, L, N1, N2, t, int(sum(steps[:j + 1])), float(lhs),
                             nf, ng, K, float(lhs / (math.sqrt(K) * nf * ng)), secs)
        row = rec.as_row()
        row["draw"] = c["draw"]
        rows.append(row)
    return rows


def _measure_cell(c, rng):
    from .counting import measure_C_sup
    r = measure_C_sup(c["lam"], c["N1"], c["N2"], draws=c["draws"], rng=rng,
                      thickness=c["thickness"], adversarial_etas=c["adversarial_etas"])
    env = 1.0 / c["lam"] + c["N2"] / c["N1"]
    return [dict(m=1, n=1, **{"lambda": c["lam"]}, N1=c["N1"], N2=c["N2"],
                 thickness=c["thickness"], evaluated=r.evaluated, sup_measure=r.sup,
                 envelope=env, ratio=r.sup / env, eta1=r.eta[0], eta2=r.eta[1], tau=r.tau)]


def _extremizer_cell(c, rng):
    from .extremizers import ExtremizerCase, lower_bound_check
    import time
    t0 = time.perf_counter()
    kw = {k: c[k] for k in ("box_length", "samples_per_period") if k in c}
    if "window" in c:
        kw["window"] = tuple(c["window"])
    case = ExtremizerCase(c["case"], c["lam"], c["N1"], c["N2"], m=c["m"], n=c["n"], **kw)
    r = lower_bound_check(case)
    t = case.time_window
    return [dict(case=c["case"], m=case.m, n=case.n, **{"lambda": case.lam},
                 L=case.box_length, N1=case.N1, N2=case.N2, T=t[1] - t[0], steps=r.steps,
                 lhs=r.lhs, norm_f=r.norm_f, norm_g=r.norm_g, k_pred=r.k_pred,
                 ratio=r.ratio, degenerate=r.degenerate, seconds=time.perf_counter() - t0)]


def _imethod_cell(c, rng):
    from .imethod import increment_experiment
    kw = {k: c[k] for k in ("band_factor", "dt_scale", "box_length", "horizon", "coupling")
          if k in c}
    seed = int(rng.integers(2 ** 63))
    r = increment_experiment(c["s"], c["alpha"], c["N"], k=c["k"], seed=seed, **kw)
    rows = []
    for j in range(len(r.N)):
        rows.append(dict(s=c["s"], alpha=c["alpha"], k=c["k"], N=r.N[j], **{"lambda": r.lam[j]},
                         increment=r.increment[j], corrected_increment=r.corrected_increment[j],
                         energy_drift=r.energy_drift[j], slope=r.slope, monotone=r.monotone))
    return rows


def _decay_cell(c, rng):
    from .extremizers import decay_profile, global_failure_demo, phi_field
    L = float(c.get("box_length", 2.0 ** 18))
    gt = global_failure_demo(c["lam"], c["N1"], c["N2"], c["T"], box_length=L,
                             steps_per_window=int(c.get("steps_per_window", 128)))
    M = int(c.get("grid_points", 4 * L))
    dp = decay_profile(phi_field(L, M), c["T"])
    return [dict(**{"lambda": c["lam"]}, N1=c["N1"], N2=c["N2"], L=L, T=t,
                 bilinear_norm=b, l4_fourth=q, decay_min=v, fit_intercept=gt.intercept,
                 fit_slope=gt.slope, fit_relative_residual=gt.relative_residual)
            for t, b, q, v in zip(gt.T, gt.bilinear_norm, gt.l4_fourth, dp.values)]


_RUNNERS = {"bilinear-sweep": _bilinear_cell, "measure-sweep": _measure_cell,
            "extremizer": _extremizer_cell, "imethod": _imethod_cell, "decay": _decay_cell}


def _run_cell(args):
    kind, index, cell, seed = args
    try:
        rows = _RUNNERS[kind](cell, _rng(seed, index))
        return [dict(r, status="ok") for r in rows], None
    except NumericalAbort as exc:
        return [dict(_echo(cell), status=f"abort: {exc}")], "abort"
    except (PreconditionError, UnsupportedRegimeError) as exc:
        return [dict(_echo(cell), status=f"error: {exc}")], "error"


def _echo(cell):
    out = {}
    for k, v in cell.items():
        key = "lambda" if k == "lam" else k
        out[key] = ";".join(_fmt(x) for x in v) if isinstance(v, (list, tuple)) else v
    return out


# -- output ------------------------------------------------------------------

@dataclass
class SweepResult:
    rows: list
    summary: dict
    aborted: bool


def run(cfg, workers=None, timings=False):
    """Evaluate every cell of ``cfg`` and return rows plus the summary."""
    cells = expand_cells(cfg)
    est = estimate_work(cfg, cells)
    if est > cfg.max_work:
        raise ResourceRefusal(est, cfg.max_work)
    workers = int(workers or cfg.workers)
    jobs = [(cfg.kind, i, c, cfg.seed) for i, c in enumerate(cells)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))   # map keeps grid order
    else:
        results = [_run_cell(j) for j in jobs]
    rows, aborted = [], False
    for cell_rows, flag in results:
        aborted |= flag == "abort"
        for r in cell_rows:
            r = {("lambda" if k == "lam" else k): v for k, v in r.items()}
            if not timings and "seconds" in r:
                r["seconds"] = ""
            rows.append(r)
    summary = summarize(cfg, rows)
    summary["work_estimate"] = est
    return SweepResult(rows, summary, aborted)


def _columns(kind, rows):
    if kind == "bilinear-sweep":
        lead = BILINEAR_COLUMNS
    else:
        lead = []
    cols = list(lead)
    for r in rows:
        for k in r:
            if k not in cols and k != "status":
                cols.append(k)
    return cols + ["status"]


def render_csv(kind, rows):
    buf = io.StringIO()
    cols = _columns(kind, rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) if c in r and r[c] != "" else "" for c in cols])
    return buf.getvalue()


def write_outputs(result, kind, out):
    """Write ``out`` (CSV) and ``out`` with suffix ``.summary.json``."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_csv(kind, result.rows))
    side = summary_path(out)
    side.write_text(json.dumps(result.summary, indent=2, sort_keys=True, default=_jsonable)
                    + "\n")
    return out, side


def summary_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".summary.json")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


# -- summaries ---------------------------------------------------------------

def _ok(rows):
    return [r for r in rows if r.get("status") == "ok"]


def summarize(cfg, rows):
    """The fit appropriate to the experiment kind."""
    from .fitting import fit_scaling
    ok = _ok(rows)
    s = dict(kind=cfg.kind, schema_version=SCHEMA_VERSION, seed=cfg.seed,
             rows=len(rows), failed_rows=len(rows) - len(ok))
    if not ok:
        return s
    if cfg.kind in ("bilinear-sweep", "measure-sweep"):
        r = np.array([x["ratio"] for x in ok], dtype=float)
        med = float(np.median(r))
        s.update(ratio_median=med, ratio_max=float(r.max()), ratio_min=float(r.min()),
                 spread_max_over_median=float(r.max() / med),
                 spread_min_over_median=float(r.min() / med))
    if cfg.kind == "bilinear-sweep":
        T = np.array([x["T"] for x in ok], dtype=float)
        uT = np.unique(T)
        if len(uT) > 1:
            r = np.array([x["ratio"] for x in ok], dtype=float)
            means = np.array([np.mean(np.log(r[T == t])) for t in uT])
            s["log_ratio_vs_log_T_slope"] = float(np.polyfit(np.log(uT), means, 1)[0])
            # ratio normalized by its per-cell median, against log T
            s["ratio_vs_log_T_slope"] = float(np.polyfit(
                np.log(uT), [np.mean(r[T == t]) / np.median(r) for t in uT], 1)[0])
        m, n = ok[0]["m"], ok[0]["n"]
        d = m + n
        lam = np.array([x["lambda"] for x in ok], dtype=float)
        N1 = np.array([x["N1"] for x in ok], dtype=float)
        N2 = np.array([x["N2"] for x in ok], dtype=float)
        y = np.array([(x["lhs"] / (x["norm_f"] * x["norm_g"])) ** 2 for x in ok])
        if d == 2:
            X = np.column_stack([1 / lam, N2 / N1])
        else:
            X = np.column_stack([N2 ** (d - 3) / lam, N2 ** (d - 1) / N1])
        try:
            fit = fit_scaling(X, y, "two-term")
            s["two_term_fit"] = dict(coefficients=fit.coefficients.tolist(),
                                     log_rms_residual=fit.residual)
        except PreconditionError as exc:
            s["two_term_fit"] = dict(error=str(exc))
    elif cfg.kind == "extremizer":
        r = np.array([x["ratio"] for x in ok if not x["degenerate"]], dtype=float)
        if len(r):
            s.update(ladder_min=float(r.min()), ladder_max=float(r.max()),
                     ladder_stability=float(r.min() / r.max()) if r.max() > 0 else 0.0,
                     anchor_ratio=float(r[0]))
    elif cfg.kind == "imethod":
        groups = {}
        for x in ok:
            groups.setdefault((x["s"], x["alpha"], x["k"]), []).append(x)
        fits = []
        for (sv, a, k), xs in groups.items():
            fits.append(dict(s=sv, alpha=a, k=k, slope=xs[0]["slope"],
                             monotone=xs[0]["monotone"]))
        s["fits"] = fits
    elif cfg.kind == "decay":
        x0 = ok[0]
        v = np.array([x["decay_min"] for x in ok], dtype=float)
        s.update(log_fit=dict(intercept=x0["fit_intercept"], slope=x0["fit_slope"],
                              relative_residual=x0["fit_relative_residual"]),
                 decay_anchor=float(v[0]),
                 decay_max_drift=float(np.max(np.maximum(v / v[0], v[0] / v))))
    return s
