"""Optional PNG figures for sweep output (requires matplotlib)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _ok(rows):
    return [r for r in rows if r.get("status") == "ok"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_figures(kind, rows, csv_path):
    """Write one or two figures next to ``csv_path``; returns their paths."""
    rows = _ok(rows)
    if not rows:
        return []
    stem = Path(csv_path).with_suffix("")
    out = []
    if kind in ("bilinear-sweep", "extremizer"):
        k = np.array([r["k_pred"] for r in rows], dtype=float)
        y = np.array([r["lhs"] / (r["norm_f"] * r["norm_g"]) for r in rows], dtype=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(k, y, "o", ms=3, alpha=0.6, label="measured")
        kk = np.geomspace(k.min(), k.max(), 50)
        ax.loglog(kk, np.median(y / np.sqrt(k)) * np.sqrt(kk), "k--", label=r"$\propto K^{1/2}$")
        ax.set_xlabel("K(lambda, N1, N2)")
        ax.set_ylabel("lhs / (|f| |g|)")
        ax.legend()
        out.append(_save(fig, f"{stem}_envelope.png"))
    if kind == "bilinear-sweep" and len({r["T"] for r in rows}) > 1:
        T = np.array([r["T"] for r in rows], dtype=float)
        r_ = np.array([r["ratio"] for r in rows], dtype=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.semilogx(T, r_ / np.median(r_), "o", ms=3, alpha=0.5)
        ax.set_xlabel("T")
        ax.set_ylabel("ratio / median")
        out.append(_save(fig, f"{stem}_T.png"))
    if kind == "measure-sweep":
        env = np.array([r["envelope"] for r in rows], dtype=float)
        sup = np.array([r["sup_measure"] for r in rows], dtype=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(env, sup, "o", ms=3)
        ax.set_xlabel("1/lambda + N2/N1")
        ax.set_ylabel("sup |C|")
        out.append(_save(fig, f"{stem}_measure.png"))
    if kind == "imethod":
        fig, ax = plt.subplots(figsize=(5, 4))
        for s in sorted({r["s"] for r in rows}):
            sel = [r for r in rows if r["s"] == s]
            ax.loglog([r["N"] for r in sel], [r["increment"] for r in sel], "o-",
                      label=f"s = {s}")
        ax.set_xlabel("N")
        ax.set_ylabel("modified-energy increment")
        ax.legend()
        out.append(_save(fig, f"{stem}_increment.png"))
    if kind == "decay":
        T = np.array([r["T"] for r in rows], dtype=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.semilogx(T, [r["l4_fourth"] for r in rows], "o-", label="L4 norm^4 on [0, T]")
        ax.semilogx(T, [r["decay_min"] for r in rows], "s-", label="sqrt(t) min |u|")
        ax.set_xlabel("T")
        ax.legend()
        out.append(_save(fig, f"{stem}_decay.png"))
    return [str(p) for p in out]
