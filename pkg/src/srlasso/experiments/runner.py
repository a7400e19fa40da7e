"""Experiment drivers.

Each experiment is split into independent *cells*, one per
``(family, dims, gamma, seed)``.  A cell generates its instance, solves the
parameter path(s) and returns CSV rows plus a small summary dictionary.
Cells run in a process pool when ``jobs > 1``; results are collected in the
cell order and the rows are sorted by their key before writing, so the
output does not depend on scheduling.

Output files in ``output_dir``:

``<name>.csv``
    one row per (cell, program, parameter value, sample kind) with the
    columns in :data:`COLUMNS`;
``<name>_summary.csv``
    per-facet aggregates (and, for the heatmap, ``<name>_cells.csv``);
``<name>.svg``
    the figure analog;
``<name>_report.json``
    the effective configuration, output paths and status counts.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import io
from ..errors import SrLassoError
from ..regularity import check_regularity, detect_sets
from ..sensitivity import FD_SETTINGS, lipschitz_bounds
from ..solvers import solve_srlasso
from . import svg
from .config import EXPERIMENTS, ExperimentConfig, default_config
from .data import (DataModel, build_lambda_grid, generate_instance, pick_best,
                   solve_path)

log = logging.getLogger(__name__)

COLUMNS = ("seed", "m", "n", "s", "gamma", "program", "lambda", "lambda_nmz",
           "err_to_sharp", "rel_err", "Zstar", "weak", "intermediate", "strong",
           "L_SR", "L_UC", "V", "status",
           # extras: facet label, sample kind (grid/best/local), the empirical
           # Lipschitz quantity ||x(lam) - x(lam_ref)|| and the bound L |lam - lam_ref|
           "facet", "sample", "sol_change", "bound_change")

#: Cell code used for heatmap cells without a single nonzero-residual trial.
INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class Cell:
    facet: str
    m: int
    n: int
    s: int
    gamma: float
    seed: int

    def model(self) -> DataModel:
        return DataModel(self.m, self.n, self.s, self.gamma, self.seed)


@dataclass
class CellResult:
    cell: Cell
    rows: list
    info: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    name: str
    config: ExperimentConfig
    rows: list
    summary: list
    files: dict
    status_counts: dict


def cells_of(cfg: ExperimentConfig) -> list[Cell]:
    return [Cell(f.facet, d.m, d.n, d.s, g, seed)
            for f in cfg.families for d in f.dims for g in f.gammas for seed in cfg.seeds]


def _grid(cfg: ExperimentConfig, program: str, n: int) -> tuple:
    if cfg.lambdas is not None:
        return tuple(cfg.lambdas)
    g = cfg.grid
    return build_lambda_grid(program, n, g.count, g.log_lo, g.log_hi, g.center).values


def _row(cell: Cell, program: str, **kw) -> dict:
    row = dict.fromkeys(COLUMNS)
    row.update(seed=cell.seed, m=cell.m, n=cell.n, s=cell.s, gamma=cell.gamma,
               program=program, facet=cell.facet, status="ok", sample="grid")
    row.update(kw)
    return row


def _support(x, tol=1e-6):
    x = np.asarray(x)
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    return tuple(int(i) for i in np.flatnonzero(np.abs(x) > tol * scale))


def _path_rows(cell, program, path, ref_lam, ref_x, **extra):
    rows = []
    nref = float(np.linalg.norm(ref_x)) if ref_x is not None else None
    for pt in path:
        row = _row(cell, program, **{"lambda": pt.lam}, status=pt.status)
        if pt.pair is not None:
            row["err_to_sharp"] = pt.error
            if ref_x is not None:
                change = float(np.linalg.norm(pt.pair.x - ref_x))
                row["sol_change"] = change
                row["rel_err"] = change / nref if nref > 0 else None
        if ref_lam is not None:
            row["lambda_nmz"] = pt.lam / ref_lam
        row.update(extra)
        rows.append(row)
    return rows


def _best(path):
    try:
        return pick_best(path)
    except SrLassoError:
        return None


def _reg_fields(rep) -> dict:
    z = rep.weak_optimum_Zstar
    return {"Zstar": z, "weak": rep.weak, "intermediate": rep.intermediate,
            "strong": rep.strong}


# --- cells -------------------------------------------------------------------


def _cell_noise(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    inst = generate_instance(cell.model())
    s = cfg.settings()
    rows, info = [], {}
    for program in ("SR", "UC"):
        path = solve_path(inst, program, _grid(cfg, program, cell.n), s)
        best = _best(path)
        if best is None:
            rows.append(_row(cell, program, status="error", sample="best"))
            continue
        err = float(np.linalg.norm(best.x_best - inst.x_sharp))
        rows.append(_row(cell, program, **{"lambda": best.lambda_best}, lambda_nmz=1.0,
                         err_to_sharp=err, rel_err=0.0, sol_change=0.0, sample="best"))
        info[program] = {"lambda_best": best.lambda_best, "excluded": len(best.excluded)}
    return CellResult(cell, rows, info)


def _cell_lipschitz(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    inst = generate_instance(cell.model())
    s = cfg.settings()
    rows, info = [], {}
    refs = {}
    for program in ("SR", "UC"):
        path = solve_path(inst, program, _grid(cfg, program, cell.n), s)
        best = _best(path)
        refs[program] = (path, best)
    (sr_path, sr_best), (uc_path, uc_best) = refs["SR"], refs["UC"]
    if sr_best is None or uc_best is None:
        for program, (path, best) in refs.items():
            rows += _path_rows(cell, program, path, None, None)
        return CellResult(cell, rows, {"status": "error"})
    p = inst.problem(sr_best.lambda_best)
    sr_pair = next(pt.pair for pt in sr_path if pt.lam == sr_best.lambda_best)
    uc_pair = next(pt.pair for pt in uc_path if pt.lam == uc_best.lambda_best)
    pair, sets, rep = check_regularity(p, sr_pair)
    bounds = lipschitz_bounds(p, pair, sets, uc_pair, uc_best.lambda_best)
    L_sr, L_uc, V = bounds.L_SR_lambda_bound, bounds.L_UC_lambda_bound, bounds.V
    sr_rows = _path_rows(cell, "SR", sr_path, sr_best.lambda_best, sr_best.x_best,
                         L_SR=L_sr, V=V)
    for row in sr_rows:
        if row["lambda"] == sr_best.lambda_best:
            row.update(_reg_fields(rep))
        if L_sr is not None and row["sol_change"] is not None:
            row["bound_change"] = L_sr * abs(row["lambda"] - sr_best.lambda_best)
    uc_rows = _path_rows(cell, "UC", uc_path, uc_best.lambda_best, uc_best.x_best, L_UC=L_uc)
    for row in uc_rows:
        if row["sol_change"] is not None:
            row["bound_change"] = L_uc * abs(row["lambda"] - uc_best.lambda_best)
    I_sr, I_uc = tuple(sets.support_I.indices), _support(uc_pair.x)
    info = {"lambda_best_SR": sr_best.lambda_best, "lambda_best_UC": uc_best.lambda_best,
            "support_SR": len(I_sr), "support_UC": len(I_uc), "same_support": I_sr == I_uc,
            "strong": rep.strong, "weak": rep.weak, "intermediate": rep.intermediate,
            "V": V, "L_SR": L_sr, "L_UC": L_uc}
    return CellResult(cell, sr_rows + uc_rows, info)


def matched_ratio(sr_curve, uc_curve) -> list:
    """Ratios ``e_SR / e_UC`` at matched distances ``|lam - lam_best|``.

    Each curve is ``(lambdas, changes, lam_best)``.  The two branches
    (below and above ``lam_best``) are matched separately; the UC curve is
    interpolated linearly in log-log coordinates at the SR distances that
    fall inside its sampled range.
    """
    (ls, es, bs), (lu, eu, bu) = sr_curve, uc_curve
    ls, es, lu, eu = (np.asarray(v, dtype=float) for v in (ls, es, lu, eu))
    out = []
    for side in (-1.0, 1.0):
        ms = np.sign(ls - bs) == side
        mu = (np.sign(lu - bu) == side) & (eu > 0)
        if mu.sum() < 2:
            continue
        du, euu = np.abs(lu[mu] - bu), eu[mu]
        order = np.argsort(du)
        du, euu = du[order], euu[order]
        ds, ess = np.abs(ls[ms] - bs), es[ms]
        keep = (ds >= du[0]) & (ds <= du[-1]) & (ess > 0)
        if not keep.any():
            continue
        ref = np.exp(np.interp(np.log(ds[keep]), np.log(du), np.log(euu)))
        out.extend((ess[keep] / ref).tolist())
    return out


def _cell_gamma_m(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    inst = generate_instance(cell.model())
    s = cfg.settings()
    rows, curves = [], {}
    for program in ("SR", "UC"):
        path = solve_path(inst, program, _grid(cfg, program, cell.n), s)
        best = _best(path)
        if best is None:
            rows += _path_rows(cell, program, path, None, None)
            continue
        prow = _path_rows(cell, program, path, best.lambda_best, best.x_best)
        rows += prow
        ok = [r for r in prow if r["status"] == "ok"]
        curves[program] = ([r["lambda"] for r in ok], [r["sol_change"] for r in ok],
                           best.lambda_best)
    ratios = matched_ratio(curves["SR"], curves["UC"]) if len(curves) == 2 else []
    return CellResult(cell, rows, {"ratios": ratios})


def _regularity_rows(cell, cfg, inst, path, best, full):
    rows = []
    memo = {}
    s = cfg.settings()
    for pt in path:
        row = _row(cell, "SR", **{"lambda": pt.lam}, status=pt.status)
        if best is not None:
            row["lambda_nmz"] = pt.lam / best.lambda_best
            if pt.pair is not None:
                change = float(np.linalg.norm(pt.pair.x - best.x_best))
                nref = float(np.linalg.norm(best.x_best))
                row["sol_change"] = change
                row["rel_err"] = change / nref if nref > 0 else None
        if pt.pair is None:
            rows.append(row)
            continue
        row["err_to_sharp"] = pt.error
        p = inst.problem(pt.lam)
        sets = detect_sets(p, pt.pair)
        key = None
        if sets.residual_nonzero:
            y = pt.pair.residual / pt.pair.residual_norm
            key = (sets.support_I.indices, y.tobytes(), pt.lam if not full else None)
        if key is not None and key in memo:
            rep = memo[key]
        else:
            _, _, rep = check_regularity(p, pt.pair, s, full_solve=full)
            if key is not None:
                memo[key] = rep
        row.update(_reg_fields(rep))
        if not sets.residual_nonzero:
            row["status"] = INAPPLICABLE
            row["Zstar"] = math.inf
        rows.append(row)
    return rows


def _cell_uniqueness(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    inst = generate_instance(cell.model())
    path = solve_path(inst, "SR", _grid(cfg, "SR", cell.n), cfg.settings())
    best = _best(path)
    full = bool(cfg.options.get("full_zstar", False))
    rows = _regularity_rows(cell, cfg, inst, path, best, full)
    return CellResult(cell, rows, {"lambda_best": None if best is None else best.lambda_best})


def _cell_bound(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    inst = generate_instance(cell.model())
    path = solve_path(inst, "SR", _grid(cfg, "SR", cell.n), cfg.settings())
    best = _best(path)
    if best is None:
        return CellResult(cell, _path_rows(cell, "SR", path, None, None), {"strong": None})
    lam0 = best.lambda_best
    p = inst.problem(lam0)
    pair = solve_srlasso(p, FD_SETTINGS, x0=best.x_best)
    pair, sets, rep = check_regularity(p, pair)
    L = lipschitz_bounds(p, pair, sets).L_SR_lambda_bound if rep.strong else None
    rows = _path_rows(cell, "SR", path, lam0, pair.x, L_SR=L)
    for row in rows:
        if row["lambda"] == lam0:
            row.update(_reg_fields(rep))
    factor = float(cfg.options.get("tolerance_factor", 1.05))
    within = samples = 0
    x_prev = pair.x
    for delta in sorted(float(d) for d in cfg.options.get("local_offsets", ())):
        lam = lam0 * (1.0 + delta)
        try:
            q = solve_srlasso(inst.problem(lam), FD_SETTINGS, x0=x_prev)
        except SrLassoError as exc:
            log.warning("local re-solve failed at lam=%r: %s", lam, exc)
            rows.append(_row(cell, "SR", **{"lambda": lam}, status="error", sample="local"))
            continue
        change = float(np.linalg.norm(q.x - pair.x))
        row = _row(cell, "SR", **{"lambda": lam}, lambda_nmz=lam / lam0, sample="local",
                   err_to_sharp=float(np.linalg.norm(q.x - inst.x_sharp)),
                   sol_change=change, L_SR=L,
                   rel_err=change / max(float(np.linalg.norm(pair.x)), 1e-300))
        if not q.converged:
            row["status"] = "not-converged"
        elif L is None:
            row["status"] = "not-strong"
        else:
            bound = L * abs(lam - lam0)
            row["bound_change"] = bound
            samples += 1
            within += change <= factor * bound
        rows.append(row)
    return CellResult(cell, rows, {"strong": rep.strong, "samples": samples,
                                   "within": within, "L_SR": L, "lambda_best": lam0})


_CELL_FUNCS = {
    "noise-robustness": _cell_noise,
    "lipschitz-comparison": _cell_lipschitz,
    "gamma-m-facets": _cell_gamma_m,
    "uniqueness-curve": _cell_uniqueness,
    "uniqueness-heatmap": _cell_uniqueness,
    "bound-tightness": _cell_bound,
}


def run_cell(name: str, cell: Cell, cfg: ExperimentConfig) -> CellResult:
    return _CELL_FUNCS[name](cell, cfg)


def _run_task(task):
    return run_cell(*task)


# --- aggregation ---------------------------------------------------------------


def _sort_key(row):
    return (row["facet"], row["m"], row["n"], row["s"], row["gamma"], row["seed"],
            row["program"], row["sample"], row["lambda"] if row["lambda"] is not None else -1.0)


def _summary_noise(results):
    by = defaultdict(list)
    for res in results:
        for prog, d in res.info.items():
            by[prog].append((res.cell.gamma, res.cell.seed, d["lambda_best"]))
    table = []
    for prog in sorted(by):
        logs = [math.log10(v) for _, _, v in by[prog]]
        per_gamma = defaultdict(list)
        for g, _, v in by[prog]:
            per_gamma[g].append(math.log10(v))
        medians = [float(np.median(v)) for _, v in sorted(per_gamma.items())]
        table.append({"program": prog, "cells": len(logs),
                      "log10_lambda_best_min": min(logs), "log10_lambda_best_max": max(logs),
                      "range_decades": max(logs) - min(logs),
                      "median_range_decades": max(medians) - min(medians)})
    return table


def _summary_lipschitz(results):
    table = []
    for res in results:
        d = res.info
        if d.get("status") == "error":
            table.append({"seed": res.cell.seed, "status": "error"})
            continue
        row = {"seed": res.cell.seed, "status": "ok", **d}
        L_sr, L_uc, V = d["L_SR"], d["L_UC"], d["V"]
        if L_sr is not None and L_uc:
            pred = L_sr * abs(1.0 - V)
            row["L_SR_times_1mV"] = pred
            row["rel_discrepancy_raw"] = abs(L_uc - pred) / L_uc
            n_sr, n_uc = pred * d["lambda_best_SR"], L_uc * d["lambda_best_UC"]
            row["L_SR_times_1mV_nmz"] = n_sr
            row["L_UC_nmz"] = n_uc
            row["rel_discrepancy_nmz"] = abs(n_uc - n_sr) / n_uc
        table.append(row)
    return table


def _summary_gamma_m(results):
    pooled = defaultdict(list)
    for res in results:
        pooled[(res.cell.gamma, res.cell.m)].extend(res.info["ratios"])
    table = []
    for (g, m), ratios in sorted(pooled.items()):
        mean = float(np.mean(ratios)) if ratios else None
        table.append({"gamma": g, "m": m, "matched_points": len(ratios), "mean_ratio": mean,
                      "sr_majorizes": None if mean is None else bool(mean >= 1.0)})
    for row in table:
        if row["sr_majorizes"] is False:
            log.warning("SR curve does not majorize UC at gamma=%r, m=%r (mean ratio %.3g)",
                        row["gamma"], row["m"], row["mean_ratio"])
    return table


def _summary_curve(results):
    table = []
    for res in results:
        rows = [r for r in res.rows if r["Zstar"] is not None]
        table.append({"seed": res.cell.seed, "gamma": res.cell.gamma,
                      "lambda_best": res.info["lambda_best"],
                      "weak_true": sum(1 for r in rows if r["weak"]),
                      "inapplicable": sum(1 for r in rows if r["status"] == INAPPLICABLE),
                      "points": len(res.rows)})
    return table


def heatmap_cells(rows) -> list[dict]:
    """Fraction of trials with a weak certificate per ``(gamma, lambda)``.

    Trials with a zero residual are not counted; a cell where every trial
    has a zero residual gets the code :data:`INAPPLICABLE` and no value.
    """
    acc = defaultdict(lambda: [0, 0, 0])  # trials, applicable, weak
    for r in rows:
        if r["status"] not in ("ok", INAPPLICABLE):
            acc[(r["gamma"], r["lambda"])][0] += 1
            continue
        a = acc[(r["gamma"], r["lambda"])]
        a[0] += 1
        if r["status"] == "ok" and r["weak"] is not None:
            a[1] += 1
            a[2] += bool(r["weak"])
    out = []
    for (g, lam), (trials, applicable, weak) in sorted(acc.items()):
        out.append({"gamma": g, "lambda": lam, "trials": trials, "applicable": applicable,
                    "weak_count": weak,
                    "fraction": weak / applicable if applicable else None,
                    "code": "ok" if applicable else INAPPLICABLE})
    return out


def heatmap_best(rows) -> list[dict]:
    """Per ``gamma``: the parameter minimizing the mean error over trials."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["err_to_sharp"] is not None:
            acc[r["gamma"]][r["lambda"]].append(r["err_to_sharp"])
    out = []
    for g in sorted(acc):
        means = sorted((lam, float(np.mean(v))) for lam, v in acc[g].items())
        lam_best, err = min(means, key=lambda t: (t[1], t[0]))
        out.append({"gamma": g, "lambda_best": lam_best, "mean_error": err})
    return out


def high_region(cells, gamma, lam_best, threshold):
    """Contiguous run of ``fraction >= threshold`` cells around ``lam_best``.

    Returns ``(lo, hi)`` parameter bounds of the run, or None when the cell
    at ``lam_best`` is itself below the threshold or inapplicable.
    """
    row = sorted((c for c in cells if c["gamma"] == gamma), key=lambda c: c["lambda"])
    lams = [c["lambda"] for c in row]
    if lam_best not in lams:
        return None
    k = lams.index(lam_best)
    good = [c["fraction"] is not None and c["fraction"] >= threshold for c in row]
    if not good[k]:
        return None
    lo = hi = k
    while lo > 0 and good[lo - 1]:
        lo -= 1
    while hi < len(row) - 1 and good[hi + 1]:
        hi += 1
    return lams[lo], lams[hi]


def _summary_bound(results, cfg):
    agg = defaultdict(lambda: {"seeds": 0, "strong": 0, "samples": 0, "within": 0})
    for res in results:
        c = res.cell
        a = agg[(c.facet, c.m, c.s, c.gamma)]
        a["seeds"] += 1
        a["strong"] += bool(res.info.get("strong"))
        a["samples"] += res.info.get("samples", 0)
        a["within"] += res.info.get("within", 0)
    need = float(cfg.options.get("min_fraction", 0.95))
    table = []
    for (facet, m, s, g), a in sorted(agg.items()):
        frac = a["within"] / a["samples"] if a["samples"] else None
        table.append({"facet": facet, "m": m, "s": s, "gamma": g, "seeds": a["seeds"],
                      "strong_instances": a["strong"], "samples": a["samples"],
                      "within": a["within"], "fraction": frac,
                      "holds": None if frac is None else bool(frac >= need)})
    return table


# --- figures -------------------------------------------------------------------


def _series_by(rows, key_fn, x="lambda", y="sol_change"):
    groups = defaultdict(list)
    for r in rows:
        if r[x] is not None and r[y] is not None:
            groups[key_fn(r)].append((r[x], r[y]))
    return {k: sorted(v) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}


def _figure(name, cfg, rows, summary, extra) -> str:
    if name == "noise-robustness":
        series = []
        for prog, color in (("SR", svg.PALETTE[0]), ("UC", svg.PALETTE[1])):
            for seed in cfg.seeds:
                pts = sorted((r["gamma"], r["lambda"]) for r in rows
                             if r["program"] == prog and r["seed"] == seed and r["lambda"])
                if pts:
                    series.append(svg.Series([p[0] for p in pts], [p[1] for p in pts],
                                             label=prog if seed == cfg.seeds[0] else "",
                                             color=color, markers=True))
        return svg.line_plot(svg.Panel(series, "best parameter vs noise scale",
                                       "gamma", "lambda_best", xlog=True, ylog=True))
    if name == "lipschitz-comparison":
        seed = cfg.seeds[0]
        sel = [r for r in rows if r["seed"] == seed and r["sample"] == "grid"]
        series = []
        for prog, color in (("SR", svg.PALETTE[0]), ("UC", svg.PALETTE[1])):
            pts = sorted((r["lambda_nmz"], r["sol_change"], r["bound_change"]) for r in sel
                         if r["program"] == prog and r["sol_change"] is not None)
            series.append(svg.Series([p[0] for p in pts], [p[1] for p in pts],
                                     label=f"{prog} empirical", color=color))
            series.append(svg.Series([p[0] for p in pts], [p[2] for p in pts],
                                     label=f"{prog} bound", color=color, dash=True))
        return svg.line_plot(svg.Panel(series, f"solution change about lambda_best (seed {seed})",
                                       "lambda_nmz", "||x(lam) - x(lam_best)||",
                                       xlog=True, ylog=True, vlines=[(1.0, "gray")]))
    if name == "gamma-m-facets":
        panels = []
        seed = cfg.seeds[0]
        for f in cfg.families:
            for g in f.gammas:
                for d in f.dims:
                    series = []
                    for prog, color in (("SR", svg.PALETTE[0]), ("UC", svg.PALETTE[1])):
                        best = next((r["lambda"] for r in rows if r["program"] == prog
                                     and r["gamma"] == g and r["m"] == d.m and r["seed"] == seed
                                     and r["lambda_nmz"] == 1.0), None)
                        pts = sorted((abs(r["lambda"] - best), r["sol_change"]) for r in rows
                                     if best is not None and r["program"] == prog
                                     and r["gamma"] == g and r["m"] == d.m and r["seed"] == seed
                                     and r["sol_change"] is not None and r["lambda"] > best)
                        series.append(svg.Series([p[0] for p in pts], [p[1] for p in pts],
                                                 label=prog, color=color))
                    panels.append(svg.Panel(series, f"gamma={g:g}, m={d.m}", xlog=True,
                                            ylog=True, legend=not panels))
        ncols = max(len(f.dims) for f in cfg.families)
        return svg.small_multiples(panels, ncols, "lam - lam_best vs solution change "
                                                  f"(seed {seed}, right branch)")
    if name == "uniqueness-curve":
        seed = cfg.seeds[0]
        sel = sorted((r for r in rows if r["seed"] == seed), key=lambda r: r["lambda"])
        lams = [r["lambda"] for r in sel]
        bands = []
        for k, r in enumerate(sel):
            if r["status"] == INAPPLICABLE:
                lo = math.sqrt(lams[k - 1] * lams[k]) if k else lams[k]
                hi = math.sqrt(lams[k] * lams[k + 1]) if k + 1 < len(lams) else lams[k]
                bands.append((lo, hi))
        best = summary[0]["lambda_best"] if summary else None
        series = [svg.Series(lams, [r["err_to_sharp"] for r in sel], "error to x_sharp"),
                  svg.Series(lams, [r["Zstar"] for r in sel], "Z*")]
        return svg.line_plot(svg.Panel(series, "uniqueness sufficiency", "lambda", "",
                                       xlog=True, ylog=True, diagonal=True, xbands=bands,
                                       vlines=[] if best is None else [(best, "black")]))
    if name == "uniqueness-heatmap":
        cells, bests = extra["cells"], extra["best"]
        gammas = sorted({c["gamma"] for c in cells})
        lams = sorted({c["lambda"] for c in cells})
        look = {(c["gamma"], c["lambda"]): c["fraction"] for c in cells}
        values = [[look.get((g, lam)) for lam in lams] for g in gammas]
        plotted = extra["plotted"]
        series, vlines = [], []
        for k, g in enumerate(plotted):
            pts = _series_by([r for r in rows if r["gamma"] == g], lambda r: 0,
                             y="err_to_sharp").get(0, [])
            acc = defaultdict(list)
            for lam, e in pts:
                acc[lam].append(e)
            xs = sorted(acc)
            color = svg.PALETTE[k + 1]
            series.append(svg.Series(xs, [float(np.mean(acc[x])) for x in xs],
                                     label=f"gamma={g:.3g}", color=color))
            b = next((b["lambda_best"] for b in bests if b["gamma"] == g), None)
            if b is not None:
                vlines.append((b, color))
        overlay = svg.Panel(series, ylog=True, vlines=vlines, ylabel="mean error")
        return svg.heatmap(values, lams, gammas, "fraction of trials with Z* < lambda",
                           "lambda", "gamma", overlay=overlay)
    # bound-tightness
    panels = []
    seed = cfg.seeds[0]
    for f in cfg.families:
        for d in f.dims:
            for g in f.gammas:
                sel = sorted((r for r in rows if r["facet"] == f.facet and r["m"] == d.m
                              and r["s"] == d.s and r["gamma"] == g and r["seed"] == seed
                              and r["sample"] == "local" and r["sol_change"] is not None),
                             key=lambda r: r["lambda"])
                xs = [abs(r["lambda_nmz"] - 1.0) for r in sel]
                series = [svg.Series(xs, [r["sol_change"] for r in sel], "empirical",
                                     markers=True),
                          svg.Series(xs, [r["bound_change"] for r in sel], "bound", dash=True)]
                label = f"m={d.m}, s={d.s}" if f.facet == "m-s" else f"m={d.m}, gamma={g:g}"
                panels.append(svg.Panel(series, label, xlog=True, ylog=True,
                                        legend=not panels))
    return svg.small_multiples(panels, 4, f"local Lipschitz bound vs empirical change (seed {seed})")


# --- driver --------------------------------------------------------------------


def run_experiment(name: str, cfg: Optional[ExperimentConfig] = None, jobs: int = 1,
                   progress: Optional[Callable[[int, int, Cell], None]] = None,
                   write: bool = True) -> ExperimentResult:
    """Run experiment ``name`` and (optionally) write its artifacts."""
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}")
    cfg = cfg or default_config(name)
    if cfg.experiment != name:
        raise ValueError(f"configuration is for {cfg.experiment!r}, not {name!r}")
    cells = cells_of(cfg)
    tasks = [(name, c, cfg) for c in cells]
    results = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            for k, res in enumerate(pool.map(_run_task, tasks), start=1):
                results.append(res)
                if progress:
                    progress(k, len(tasks), res.cell)
    else:
        for k, task in enumerate(tasks, start=1):
            results.append(_run_task(task))
            if progress:
                progress(k, len(tasks), task[1])
    rows = sorted((r for res in results for r in res.rows), key=_sort_key)
    extra = {}
    if name == "noise-robustness":
        summary = _summary_noise(results)
    elif name == "lipschitz-comparison":
        summary = _summary_lipschitz(results)
    elif name == "gamma-m-facets":
        summary = _summary_gamma_m(results)
    elif name == "uniqueness-curve":
        summary = _summary_curve(results)
    elif name == "uniqueness-heatmap":
        cells_table = heatmap_cells(rows)
        best = heatmap_best(rows)
        gammas = sorted({c.gamma for c in cells})
        plotted = []
        for g in cfg.options.get("plotted_gammas", ()):
            plotted.append(min(gammas, key=lambda v: abs(math.log10(v) - math.log10(g))))
        threshold = float(cfg.options.get("high_fraction", 0.9))
        summary = []
        for b in best:
            region = high_region(cells_table, b["gamma"], b["lambda_best"], threshold)
            summary.append({**b, "plotted": b["gamma"] in plotted,
                            "region_lo": None if region is None else region[0],
                            "region_hi": None if region is None else region[1],
                            "contains_best": region is not None})
        extra = {"cells": cells_table, "best": best, "plotted": plotted}
    else:
        summary = _summary_bound(results, cfg)
    files = {}
    if write:
        out = Path(cfg.output_dir)
        files["csv"] = str(out / f"{name}.csv")
        io.write_table_csv(files["csv"], COLUMNS, ([r[c] for c in COLUMNS] for r in rows))
        if summary:
            keys = list(dict.fromkeys(k for row in summary for k in row))
            files["summary"] = str(out / f"{name}_summary.csv")
            io.write_table_csv(files["summary"], keys, ([row.get(k) for k in keys] for row in summary))
        if "cells" in extra:
            keys = ["gamma", "lambda", "trials", "applicable", "weak_count", "fraction", "code"]
            files["cells"] = str(out / f"{name}_cells.csv")
            io.write_table_csv(files["cells"], keys, ([c[k] for k in keys] for c in extra["cells"]))
        files["svg"] = str(out / f"{name}.svg")
        io.atomic_write_text(files["svg"], _figure(name, cfg, rows, summary, extra))
    counts = dict(sorted(Counter(r["status"] for r in rows).items()))
    result = ExperimentResult(name, cfg, rows, summary, files, counts)
    if write:
        files["report"] = str(Path(cfg.output_dir) / f"{name}_report.json")
        io.write_json(files["report"], report_dict(result))
    return result


def report_dict(result: ExperimentResult) -> dict:
    return {"experiment": result.name, "status": "ok", "config": result.config.to_dict(),
            "files": dict(result.files), "rows": len(result.rows),
            "status_counts": result.status_counts, "summary": result.summary}
