"""Summary parsing, confidence intervals, plots, and tables."""

import base64
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from scipy import stats

METRIC_COLUMNS = [
    "http_delay_s",
    "http_page_throughput_bps",
    "http_transfer_rate_bps",
    "ftp_delay_s",
    "ftp_page_throughput_bps",
    "ftp_transfer_rate_bps",
    "video_dfr",
]

GROUP_KEYS = ["config_id", "tgr_bps", "tbs_bytes", "scheduler",
              "subscribers", "users_per_subscriber"]

SWEEP_CANDIDATES = ["users_per_subscriber", "subscribers", "tbs_bytes",
                    "tgr_bps"]


class ReportError(Exception):
    pass


def load_summary(path_or_dir):
    """Read summary.csv and check every config group has >= 2 replications."""
    path = path_or_dir
    if os.path.isdir(path):
        path = os.path.join(path, "summary.csv")
    if not os.path.exists(path):
        raise ReportError(f"no summary.csv at {path}")
    df = pd.read_csv(path)
    missing = [c for c in ("config_id", "replication") if c not in df.columns]
    if missing:
        raise ReportError(f"summary.csv lacks required columns {missing}")
    counts = df.groupby("config_id")["replication"].count()
    thin = counts[counts < 2]
    if len(thin):
        raise ReportError(
            f"groups with fewer than 2 replications: {list(thin.index)}")
    return df


def ci_halfwidth(values, level=0.95):
    """t-based confidence half-width of the mean."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise ReportError("confidence interval needs >= 2 replications")
    t = stats.t.ppf(0.5 + level / 2.0, len(v) - 1)
    return float(t * v.std(ddof=1) / np.sqrt(len(v)))


def ci_table(df, metrics=None, level=0.95):
    """Per-(config, metric) mean and CI half-width rows."""
    metrics = metrics or [m for m in METRIC_COLUMNS if m in df.columns]
    rows = []
    keys = [k for k in GROUP_KEYS if k in df.columns]
    for config, grp in df.groupby("config_id", sort=True):
        for metric in metrics:
            if metric not in df.columns:
                raise ReportError(f"metric column {metric!r} not in summary")
            vals = grp[metric].astype(float)
            if vals.isna().all():
                continue
            row = {k: grp.iloc[0][k] for k in keys}
            row.update({
                "metric": metric,
                "replications": int(vals.count()),
                "mean": float(vals.mean()),
                "ci_halfwidth": ci_halfwidth(vals.dropna(), level),
            })
            rows.append(row)
    return pd.DataFrame(rows)


def _pick_sweep(df, requested=None):
    if requested:
        if requested not in df.columns:
            raise ReportError(f"sweep column {requested!r} not in summary")
        return requested
    for cand in SWEEP_CANDIDATES:
        if cand in df.columns and df[cand].nunique() > 1:
            return cand
    return "config_id"


def plot_metric(df, metric, sweep_var, out_path, series_var=None, level=0.95):
    """CI-bar plot of one metric against a sweep variable.

    One series per distinct value of series_var (auto-picked when several
    configurations share a sweep position); every plotted point carries a
    t-based confidence bar across its replications.
    """
    if metric not in df.columns:
        raise ReportError(f"metric column {metric!r} not in summary")
    sweep_var = _pick_sweep(df, sweep_var)
    if series_var is None:
        for cand in SWEEP_CANDIDATES:
            if cand != sweep_var and cand in df.columns and df[cand].nunique() > 1:
                series_var = cand
                break
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    groups = df.groupby(series_var) if series_var else [(None, df)]
    for label, chunk in groups:
        xs, means, halves = [], [], []
        for x, grp in chunk.groupby(sweep_var):
            vals = grp[metric].astype(float).dropna()
            if len(vals) < 2:
                raise ReportError(
                    f"{metric}: group {x!r} has fewer than 2 replications")
            xs.append(x)
            means.append(vals.mean())
            halves.append(ci_halfwidth(vals, level))
        name = f"{series_var}={label:g}" if isinstance(label, float) else (
            f"{series_var}={label}" if series_var else metric)
        ax.errorbar(range(len(xs)), means, yerr=halves, marker="o",
                    capsize=4, label=name)
        ax.set_xticks(range(len(xs)))
        ax.set_xticklabels([f"{x:g}" if isinstance(x, float) else str(x)
                            for x in xs])
    ax.set_xlabel(sweep_var)
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} with {int(level * 100)}% confidence intervals")
    if series_var:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def table_max_eqv(verdicts):
    """Equivalence-search table with the users-supported product column.

    verdicts: iterable of {config_id, n, max_N_eqv} mappings (extra keys
    ignored).  Returns the formatted text table; empty input yields just
    the header.
    """
    header = f"{'Config.':<10} {'n':>4} {'max(N_eqv)':>12} {'n*max(N_eqv)':>14}"
    lines = [header, "-" * len(header)]
    for row in verdicts:
        n = int(row["n"])
        max_n = int(row["max_N_eqv"])
        lines.append(f"{row['config_id']:<10} {n:>4} {max_n:>12} "
                     f"{n * max_n:>14}")
    return "\n".join(lines)


def _embed(fig_path):
    with open(fig_path, "rb") as fh:
        return base64.b64encode(fh.read()).decode()


def render_report(in_dir, out_dir, metrics=None, sweep=None):
    """Produce images, ci.csv, the equivalence table, and report.html."""
    df = load_summary(in_dir)
    metrics = metrics or [m for m in METRIC_COLUMNS
                          if m in df.columns and not df[m].isna().all()]
    os.makedirs(out_dir, exist_ok=True)
    images = []
    for metric in metrics:
        out_path = os.path.join(out_dir, f"{metric}.png")
        plot_metric(df, metric, sweep, out_path)
        images.append(out_path)

    table = ci_table(df, metrics)
    ci_path = os.path.join(out_dir, "ci.csv")
    table.to_csv(ci_path, index=False)

    eqv_text = None
    eqv_path = os.path.join(in_dir, "max_eqv.csv")
    if os.path.exists(eqv_path):
        eqv = pd.read_csv(eqv_path)
        eqv_text = table_max_eqv(eqv.to_dict("records"))
        with open(os.path.join(out_dir, "max_eqv_table.txt"), "w") as fh:
            fh.write(eqv_text + "\n")

    parts = ["<html><head><title>accessim report</title>",
             "<style>body{font-family:sans-serif;margin:2em}"
             "img{max-width:720px;display:block;margin:1em 0}"
             "pre{background:#f5f5f5;padding:1em}</style></head><body>",
             "<h1>Simulation report</h1>",
             f"<p>{df['config_id'].nunique()} configurations, "
             f"{len(df)} replication rows.</p>"]
    if eqv_text:
        parts.append("<h2>Equivalence search</h2>")
        parts.append(f"<pre>{eqv_text}</pre>")
    parts.append("<h2>Metrics</h2>")
    for img in images:
        parts.append(f'<img src="data:image/png;base64,{_embed(img)}" '
                     f'alt="{os.path.basename(img)}">')
    parts.append("</body></html>")
    html_path = os.path.join(out_dir, "report.html")
    with open(html_path, "w") as fh:
        fh.write("\n".join(parts))
    return {"images": images, "ci": ci_path, "html": html_path,
            "table": eqv_text}
