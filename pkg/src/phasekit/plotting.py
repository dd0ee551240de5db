"""Figure rendering for traces and benchmark reports (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def convergence_figure(traces: dict[str, dict[str, np.ndarray]], out_path) -> None:
    """Residual (and SSIM when present) vs iteration for one or more traces.

    ``traces`` maps a label to the column dict produced by
    fileio.read_trace_csv.
    """
    any_ssim = any(np.any(np.isfinite(cols["ssim"])) for cols in traces.values())
    ncols = 2 if any_ssim else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6.0 * ncols, 4.2))
    axes = np.atleast_1d(axes)

    ax = axes[0]
    for label, cols in traces.items():
        ax.plot(cols["iter"], cols["residual"], label=label)
        # mark prior-phase transitions
        phases = cols["phase"]
        (jumps,) = np.nonzero(np.diff(phases) > 0)
        for pos in jumps:
            ax.axvline(cols["iter"][pos + 1], color="grey", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("sensor-plane amplitude residual (RMS)")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)

    if any_ssim:
        ax = axes[1]
        for label, cols in traces.items():
            finite = np.isfinite(cols["ssim"])
            if finite.any():
                ax.plot(cols["iter"][finite], cols["ssim"][finite], label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel("SSIM vs ground truth")
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def benchmark_figure(rows: list[dict], out_path) -> None:
    """Grouped bar chart of SSIM/PSNR per method, one group per case."""
    ok_rows = [r for r in rows if r.get("status") == "ok" and r.get("ssim") is not None]
    if not ok_rows:
        return
    cases = sorted({r["case"] for r in ok_rows})
    methods = sorted({r["method"] for r in ok_rows})
    fig, (ax_ssim, ax_psnr) = plt.subplots(1, 2, figsize=(12, 4.2))
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(cases), dtype=float)
    for i, method in enumerate(methods):
        ssims = [
            next((r["ssim"] for r in ok_rows if r["case"] == c and r["method"] == method), np.nan)
            for c in cases
        ]
        psnrs = [
            next((r["psnr"] for r in ok_rows if r["case"] == c and r["method"] == method), np.nan)
            for c in cases
        ]
        ax_ssim.bar(x + i * width, ssims, width, label=method)
        ax_psnr.bar(x + i * width, psnrs, width, label=method)
    for ax, ylabel in ((ax_ssim, "SSIM (phase)"), (ax_psnr, "PSNR (phase, dB)")):
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(cases, rotation=20, ha="right", fontsize=8)
        ax.set_ylabel(ylabel)
        ax.grid(True, axis="y", alpha=0.3)
    ax_ssim.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
