"""Figures for the CLI report path (files only, non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

RC = {
    "axes.labelsize": 9,
    "font.size": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

LABELS = {
    "err_E": r"$\|\omega^{E,\nu}-\omega^E\|_{L^4\cap L^{4/3}}$",
    "l1_oseen_over_t": r"$t^{-1}\|\omega^{B,\nu}-G_{z(t)}\|_{L^1}$",
    "dz_over_nut": r"$|\tilde z-z|/(\nu t)$",
    "w2bar_L2p": r"$\|\bar w_2\|_{L^2_p}$",
    "gee": r"$\mathcal{G}(t)$",
    "w1bar_L4cap": r"$\|\bar w_1\|_{L^4\cap L^{4/3}}$",
}


def figsize(scale: float = 1.0, ratio: float = GOLDEN) -> tuple[float, float]:
    w = 6.0 * scale
    return w, w * ratio


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_rates(report, path) -> Path:
    """Sup-in-time errors against nu with the fitted power laws."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(0.8))
        for key, name, marker in (("regular_rate", "err_E", "o"), ("irregular_rate", "l1_oseen_over_t", "s")):
            m = report.metrics.get(key)
            if m is None:
                continue
            nus = np.asarray(m.nus, dtype=float)
            vals = np.asarray(m.values, dtype=float)
            ok = np.isfinite(vals) & (vals > 0)
            if not ok.any():
                continue
            line = ax.loglog(nus[ok], vals[ok], marker, label=LABELS[name])[0]
            if m.slope is not None:
                nn = np.geomspace(nus[ok].min(), nus[ok].max(), 20)
                ax.loglog(nn, np.exp(m.intercept) * nn**m.slope, "-", color=line.get_color(), lw=0.8,
                          label=f"slope {m.slope:.2f}")
        ax.set_xlabel(r"$\nu$")
        ax.set_ylabel("sup over snapshots")
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_series(series_by_nu: dict, path, keys=("err_E", "l1_oseen_over_t", "dz_over_nut", "w2bar_L2p")) -> Path:
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, 2, figsize=figsize(1.2, 0.75))
        for ax, key in zip(axes.ravel(), keys):
            for nu in sorted(series_by_nu):
                s = series_by_nu[nu]
                ax.plot(s["t"], s[key], lw=0.9, label=rf"$\nu$={nu:g}")
            ax.set_xlabel("$t$")
            ax.set_ylabel(LABELS.get(key, key))
        axes[0, 0].legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_columns(records: list, path, x: str = "t", keys=None, logy: bool = False) -> Path:
    """Generic time-series figure for the simulate-* commands."""
    if not records:
        raise ValueError("nothing to plot")
    keys = [k for k in (keys or records[0].keys()) if k != x]
    n = len(keys)
    ncols = 2 if n > 1 else 1
    nrows = int(np.ceil(n / ncols))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=figsize(1.0, 0.35 * nrows), squeeze=False)
        xs = [r[x] for r in records]
        for ax, k in zip(axes.ravel(), keys):
            ys = np.asarray([r[k] for r in records], dtype=float)
            (ax.semilogy if logy and np.all(ys > 0) else ax.plot)(xs, ys, lw=0.9)
            ax.set_xlabel(x)
            ax.set_ylabel(k)
        for ax in axes.ravel()[n:]:
            ax.set_visible(False)
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_field(values: np.ndarray, extent, path, title: str = "") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(0.6, 1.0))
        im = ax.imshow(values.T, origin="lower", extent=extent, cmap="RdBu_r",
                       vmin=-np.abs(values).max(), vmax=np.abs(values).max())
        fig.colorbar(im, ax=ax, shrink=0.8)
        if title:
            ax.set_title(title)
        return _save(fig, Path(path))


def render_study(report, series_by_nu: dict, fig_dir) -> list:
    fig_dir = Path(fig_dir)
    out = []
    if report.metrics:
        out.append(plot_rates(report, fig_dir / "rates.png"))
    if series_by_nu:
        out.append(plot_series(series_by_nu, fig_dir / "series.png"))
    return out
