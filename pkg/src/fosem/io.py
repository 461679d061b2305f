"""On-disk formats: CSV tables, JSONL draws, JSON summaries, archives, SVG.

All floating-point numbers are serialised with 17 significant digits so
that every file round-trips bit-exactly; fitted-model archives record
SHA-256 fingerprints of the files they reference and prediction refuses
archives whose fingerprints no longer match.
"""

import csv
import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

from . import __version__
from .data import FoSSeries
from .emulator import IC_NAMES, StandardizationStats
from .errors import DataValidationError
from .experiment import Design, SyntheticTruth
from .inference import PosteriorDraws

DESIGN_COLUMNS = ("run_id", "height_m", "angle_deg", "cohesion_kpa",
                  "friction_deg", "permeability_m_per_s")
SERIES_COLUMNS = ("run_id", "year", "fos")
BAND_COLUMNS = ("year", "mean", "lo95", "hi95")


def fmt(x):
    """17-significant-digit decimal form (exact float round-trip)."""
    return format(float(x), ".17g")


def sha256_of(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


# -- design -----------------------------------------------------------------


def write_design_csv(design: Design, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DESIGN_COLUMNS)
        for rid, row in zip(design.run_ids, design.ics):
            w.writerow([int(rid)] + [fmt(v) for v in row])


def read_design_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != DESIGN_COLUMNS:
            raise DataValidationError(
                f"{path}: expected design columns {', '.join(DESIGN_COLUMNS)}")
        ids, rows = [], []
        for line in r:
            ids.append(int(line[0]))
            rows.append([float(v) for v in line[1:6]])
    if not ids:
        raise DataValidationError(f"{path}: design file is empty")
    return Design(ics=np.array(rows), run_ids=np.array(ids), seed=None, ranges=None)


# -- series -----------------------------------------------------------------


def write_series_csv(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for s in series:
            for year, fos in zip(s.years, s.fos):
                w.writerow([int(s.run_id), fmt(year), fmt(fos)])


def read_series_csv(path, horizon=None):
    """Load per-run series; a run ending at the horizon (default: the
    latest year in the file) is marked censored."""
    by_run = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != SERIES_COLUMNS:
            raise DataValidationError(
                f"{path}: expected series columns {', '.join(SERIES_COLUMNS)}")
        for line in r:
            by_run.setdefault(int(line[0]), []).append((float(line[1]), float(line[2])))
    if not by_run:
        raise DataValidationError(f"{path}: series file is empty")
    latest = max(t for rows in by_run.values() for t, _ in rows)
    cutoff = horizon if horizon is not None else latest
    series = []
    for rid in sorted(by_run):
        rows = sorted(by_run[rid])
        years = np.array([t for t, _ in rows])
        fos = np.array([v for _, v in rows])
        series.append(FoSSeries(rid, years, fos, censored=bool(years[-1] >= cutoff)))
    return series


# -- synthetic truth ---------------------------------------------------------


def write_truth_json(truth: SyntheticTruth, path):
    payload = {
        "model": truth.model,
        "seed": truth.seed,
        "horizon": truth.horizon,
        "generator": truth.generator,
        "dropped_run_ids": truth.dropped_run_ids,
        "runs": {
            str(rid): {
                "params": {name: getattr(p, name)
                           for name in ("A0", "A1", "A2", "Omega", "Sigma")
                           if hasattr(p, name)},
                "rho_true": truth.rho_true[rid],
                "censored": truth.censored[rid],
            }
            for rid, p in truth.params.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_truth_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- posterior draws ---------------------------------------------------------


def write_draws_jsonl(draws: PosteriorDraws, path):
    with open(path, "w") as fh:
        for c in range(draws.n_chains):
            for i in range(draws.n_draws):
                row = {"chain": c, "iteration": i}
                row.update({name: float(fmt(v)) for name, v in
                            zip(draws.names, draws.values[c, i])})
                fh.write(json.dumps(row) + "\n")


def read_draws_jsonl(path, meta=None, chain_stats=None):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise DataValidationError(f"{path}: no draws found")
    names = [k for k in rows[0] if k not in ("chain", "iteration")]
    chains = sorted({r["chain"] for r in rows})
    per_chain = {c: [] for c in chains}
    for r in rows:
        per_chain[r["chain"]].append((r["iteration"], [r[n] for n in names]))
    counts = {len(v) for v in per_chain.values()}
    if len(counts) != 1:
        raise DataValidationError(f"{path}: chains have unequal draw counts")
    values = np.array([[vals for _, vals in sorted(per_chain[c])] for c in chains])
    model = "bspline" if any(n.startswith("beta_A2") for n in names) else "quadratic"
    run_ids = []
    for n in names:
        m = re.fullmatch(r"A0\[(\d+)\]", n)
        if m:
            run_ids.append(int(m.group(1)))
    return PosteriorDraws(names=names, values=values, model=model, run_ids=run_ids,
                          chain_stats=list(chain_stats or []), meta=dict(meta or {}))


def write_summary_json(draws: PosteriorDraws, report, path):
    params = {}
    for name in draws.names:
        x = draws.flat(name)
        q = np.quantile(x, [0.025, 0.25, 0.5, 0.75, 0.975])
        params[name] = {
            "mean": float(x.mean()),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "q2.5": float(q[0]), "q25": float(q[1]), "q50": float(q[2]),
            "q75": float(q[3]), "q97.5": float(q[4]),
            "rhat": report.rhat.get(name) if report else None,
            "ess": report.ess.get(name) if report else None,
        }
    payload = {
        "meta": draws.meta,
        "chain_stats": draws.chain_stats,
        "parameters": params,
    }
    if report:
        payload["flagged"] = report.flagged
        payload["multimodal"] = report.multimodal
        payload["notes"] = report.notes
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


# -- fitted-model archive -----------------------------------------------------


@dataclass
class FittedModelArchive:
    """Self-describing pointer to a fit: stats, design, draws fingerprint."""

    model: str
    version: str
    nugget: float
    stats_mean: list
    stats_sd: list
    run_ids: list
    design: list
    draws_path: str
    draws_sha256: str
    data_sha256: dict
    meta: dict

    def stats(self):
        return StandardizationStats(np.array(self.stats_mean), np.array(self.stats_sd))


def write_archive_json(path, train, draws, draws_path, data_files=None):
    archive = {
        "model": draws.model,
        "version": __version__,
        "nugget": draws.meta.get("nugget"),
        "stats_mean": [float(fmt(v)) for v in train.stats.mean],
        "stats_sd": [float(fmt(v)) for v in train.stats.sd],
        "run_ids": [int(r) for r in train.run_ids],
        "design": [[float(fmt(v)) for v in row] for row in train.design],
        "draws_path": str(draws_path),
        "draws_sha256": sha256_of(draws_path),
        "data_sha256": {name: sha256_of(p) for name, p in (data_files or {}).items()},
        "meta": draws.meta,
    }
    with open(path, "w") as fh:
        json.dump(archive, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_archive_json(path):
    with open(path) as fh:
        raw = json.load(fh)
    try:
        return FittedModelArchive(**raw)
    except TypeError as exc:
        raise DataValidationError(f"{path}: not a fitted-model archive ({exc})") from exc


def verify_archive(archive: FittedModelArchive, draws_path):
    actual = sha256_of(draws_path)
    if actual != archive.draws_sha256:
        raise DataValidationError(
            f"draws file {draws_path} does not match the archive fingerprint "
            f"({actual[:12]} != {archive.draws_sha256[:12]}); refusing to predict")


# -- band / ttf / scores ------------------------------------------------------


def write_band_csv(band, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BAND_COLUMNS)
        for row in zip(band.grid, band.mean, band.lower, band.upper):
            w.writerow([fmt(v) for v in row])


def read_band_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != BAND_COLUMNS:
            raise DataValidationError(
                f"{path}: expected band columns {', '.join(BAND_COLUMNS)}")
        rows = np.array([[float(v) for v in line] for line in r])
    if rows.size == 0:
        raise DataValidationError(f"{path}: band file is empty")
    from .prediction import PredictionBand
    return PredictionBand(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])


def write_curves_csv(band, path):
    if band.curves is None:
        raise DataValidationError("band was built without per-draw curves")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw"] + [fmt(t) for t in band.grid])
        for i, row in enumerate(band.curves):
            w.writerow([i] + [fmt(v) for v in row])


def write_ttf_csv(ttf, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("sample", "rho_years", "omega_years"))
        for i, (r, o) in enumerate(zip(ttf.rho, ttf.omega)):
            w.writerow([i, fmt(r), fmt(o)])


def write_ttf_summary_json(ttf, path):
    payload = {
        "step": ttf.step,
        "n_samples": int(ttf.rho.size),
        "rho_quantiles": {str(k): v for k, v in ttf.quantiles.items()},
        "omega_quantiles": {str(q): float(np.quantile(ttf.omega, q / 100.0))
                            for q in (2.5, 25.0, 50.0, 75.0, 97.5)},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_scores_csv(scores, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("model", "run_id", "year", "mse", "crps"))
        for rid in sorted(scores.runs):
            rs = scores.runs[rid]
            for year, m, c in zip(rs.years, rs.mse, rs.crps):
                w.writerow([scores.model, rid, fmt(year), fmt(m), fmt(c)])


def write_comparison_json(table, path):
    payload = {
        "model_a": table.model_a,
        "model_b": table.model_b,
        "runs": {
            str(rid): {
                "crps_diff_median": float(np.median(table.crps_diff[rid])),
                "mse_diff_median": float(np.median(table.mse_diff[rid])),
                "boxplot": table.boxplots[rid],
            }
            for rid in table.run_ids
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- svg ----------------------------------------------------------------------


def write_band_svg(band, path, observations=None, title=""):
    """Minimal deterministic SVG: dashed posterior mean, solid 95% bounds.

    ``observations`` is an optional (years, fos) pair drawn as circles.
    """
    width, height, pad = 640, 420, 50
    xs = band.grid
    ys = np.concatenate([band.lower, band.upper, band.mean])
    if observations is not None:
        ys = np.concatenate([ys, observations[1]])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    y_margin = 0.05 * (y1 - y0)
    y0, y1 = y0 - y_margin, y1 + y_margin

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    def polyline(ts, vs, colour, dashed=False):
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, vs))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        return (f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"'
                f'{dash} points="{pts}"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">years</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height // 2})">FoS</text>',
    ]
    if title:
        parts.append(f'<text x="{width // 2}" y="20" text-anchor="middle" '
                     f'font-size="13">{title}</text>')
    parts.append(polyline(xs, band.lower, "#1f77b4"))
    parts.append(polyline(xs, band.upper, "#1f77b4"))
    parts.append(polyline(xs, band.mean, "#1f77b4", dashed=True))
    if observations is not None:
        for t, v in zip(*observations):
            parts.append(f'<circle cx="{sx(t):.2f}" cy="{sy(v):.2f}" r="2" '
                         f'fill="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
