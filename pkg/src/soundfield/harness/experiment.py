"""Frequency sweeps over several estimators on one simulated scene.

Frequencies run as independent jobs on a thread pool. BLAS is pinned to a
single thread inside the run so results do not depend on ``threads``; rows
are written in frequency order whatever the completion order. Wall-clock fit
times are the only nondeterministic output and go to a separate, optional
``timing.csv``.
"""
import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..errors import DomainError, NumericalError
from .estimators import FitContext, fit_estimator
from .export import plane_points, write_heatmap_csv
from .metrics import helmholtz_residual, nmse, residual_grid

log = logging.getLogger(__name__)

# failures that turn a result row into NaN instead of aborting the sweep
ESTIMATOR_FAILURES = (DomainError, NumericalError, ArithmeticError, np.linalg.LinAlgError, ValueError)


@dataclass
class FrequencyResult:
    freq_hz: float
    nmse: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    residual: dict = field(default_factory=dict)
    pde_per_point: dict = field(default_factory=dict)
    slices: dict = field(default_factory=dict)
    truth_slice: np.ndarray = None


@dataclass
class ResultsBundle:
    results: list
    out_dir: Path
    files: list = field(default_factory=list)

    @property
    def rows(self):
        """(frequency_hz, label, nmse_db) tuples in frequency then config order."""
        return [(r.freq_hz, lab, v) for r in self.results for lab, v in r.nmse.items()]


def noise_seed(seed, freq_hz):
    return int(np.random.SeedSequence([seed, int(round(freq_hz * 1000))]).generate_state(1)[0])


def run_frequency(config, freq_hz, eval_points, slice_points=None):
    """Simulate, observe, fit every estimator and score it at one frequency."""
    scene = config.scene.scene
    k = scene.wavenumber(freq_hz)
    truth = scene.field(eval_points, k)
    obs = scene.observe(k, seed=noise_seed(config.seed, freq_hz))
    res = FrequencyResult(freq_hz)
    if slice_points is not None:
        res.truth_slice = scene.field(slice_points, k)
    ctx = FitContext(scene=scene, k=k, freq_hz=freq_hz, seed=config.seed, eval_points=eval_points)
    fd_grid = residual_grid(scene.region.center, k)
    for entry in config.estimators:
        t0 = time.perf_counter()
        try:
            fitted = fit_estimator(entry.name, obs, ctx, entry.params)
            est = fitted.predict(eval_points)
            res.seconds[entry.label] = time.perf_counter() - t0
            res.nmse[entry.label] = nmse(est, truth)
        except ESTIMATOR_FAILURES as exc:
            log.warning("%s failed at %g Hz: %s", entry.label, freq_hz, exc)
            res.seconds[entry.label] = time.perf_counter() - t0
            res.nmse[entry.label] = float("nan")
            res.residual[entry.label] = float("nan")
            res.pde_per_point[entry.label] = float("nan")
            continue
        try:
            res.residual[entry.label] = helmholtz_residual(fitted.predict, k, fd_grid)
        except DomainError:
            res.residual[entry.label] = float("nan")
        pde = fitted.diagnostics.get("pde_residual_per_point", float("nan"))
        res.pde_per_point[entry.label] = pde
        if np.isfinite(pde):
            log.info("%s at %g Hz: J_PDE/N = %.4g", entry.label, freq_hz, pde)
        if slice_points is not None:
            try:
                res.slices[entry.label] = fitted.predict(slice_points)
            except DomainError:
                pass
    return res


def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _freq_tag(freq_hz):
    return f"{freq_hz:g}".replace(".", "p")


def write_results(config, results, out_dir, slice_uv=None, timing=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [e.label for e in config.estimators]
    files = [
        _write_rows(out_dir / "nmse.csv", ["frequency_hz", "estimator", "nmse_db"],
                    [[_fmt(r.freq_hz), lab, _fmt(r.nmse[lab])] for r in results for lab in labels]),
        _write_rows(out_dir / "diagnostics.csv",
                    ["frequency_hz", "estimator", "helmholtz_residual", "pde_residual_per_point"],
                    [[_fmt(r.freq_hz), lab, _fmt(r.residual[lab]), _fmt(r.pde_per_point[lab])]
                     for r in results for lab in labels]),
    ]
    if timing:
        files.append(_write_rows(out_dir / "timing.csv", ["frequency_hz", "estimator", "fit_seconds"],
                                 [[_fmt(r.freq_hz), lab, f"{r.seconds[lab]:.4f}"]
                                  for r in results for lab in labels]))
    if slice_uv is not None:
        hdir = out_dir / "heatmaps"
        hdir.mkdir(exist_ok=True)
        for r in results:
            tag = _freq_tag(r.freq_hz)
            files.append(hdir / f"{tag}_truth.csv")
            write_heatmap_csv(files[-1], slice_uv, r.truth_slice)
            for lab in labels:
                if lab in r.slices:
                    files.append(hdir / f"{tag}_{lab}.csv")
                    write_heatmap_csv(files[-1], slice_uv, r.slices[lab])
    return files


def render_figures(config, results, out_dir, slice_uv=None):
    from .plots import plot_heatmaps, plot_nmse

    fdir = Path(out_dir) / "figures"
    fdir.mkdir(parents=True, exist_ok=True)
    rows = [(r.freq_hz, lab, v) for r in results for lab, v in r.nmse.items()]
    files = [fdir / "nmse.png"]
    plot_nmse(rows, files[0])
    if slice_uv is not None:
        for r in results:
            panels = {"truth": r.truth_slice, **r.slices}
            files.append(fdir / f"heatmap_{_freq_tag(r.freq_hz)}.png")
            plot_heatmaps(slice_uv, panels, files[-1], title=f"{r.freq_hz:g} Hz")
    return files


def run_experiment(config, threads=1, out_dir=None, figures=None, timing=None):
    """Run the sweep described by ``config`` and write CSV (and PNG) output.

    Returns
    -------
    ResultsBundle
    """
    out_dir = Path(out_dir or config.output)
    scene = config.scene.scene
    eval_points = scene.region.grid(config.grid.points_per_axis, config.grid.shrink)
    if len(eval_points) == 0:
        raise DomainError("the evaluation grid is empty")
    slice_points = slice_uv = None
    if config.heatmap is not None:
        slice_points, slice_uv = plane_points(scene.region, config.heatmap)
    with threadpool_limits(limits=1):
        if threads > 1 and len(config.frequencies) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda f: run_frequency(config, f, eval_points, slice_points),
                                        config.frequencies))
        else:
            results = [run_frequency(config, f, eval_points, slice_points) for f in config.frequencies]
    files = write_results(config, results, out_dir, slice_uv, config.timing if timing is None else timing)
    if config.figures if figures is None else figures:
        files += render_figures(config, results, out_dir, slice_uv)
    return ResultsBundle(results=results, out_dir=out_dir, files=files)
