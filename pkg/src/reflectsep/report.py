"""Figure rendering for iteration traces."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_trace_figure(trace, path, title=None) -> None:
    """Plot the objective, its term breakdown, and PSNR curves to a file.

    Args:
        trace: IterationTrace from a solve run.
        path: output image path; format follows the extension.
        title: optional figure title.
    """
    rows = trace.rows
    if not rows:
        raise ValueError("trace has no rows to plot")
    xs = list(range(1, len(rows) + 1))
    have_psnr = any(r.psnr_t is not None for r in rows)
    npanels = 3 if have_psnr else 2
    fig, axes = plt.subplots(npanels, 1, figsize=(7, 2.6 * npanels), sharex=True)

    axes[0].plot(xs, [r.objective for r in rows], "o-", color="black", label="objective")
    axes[0].set_ylabel("objective")
    axes[0].grid(alpha=0.3)

    for key, color in (
        ("fidelity", "tab:blue"),
        ("couple_t", "tab:orange"),
        ("couple_r", "tab:red"),
        ("sparsity", "tab:green"),
        ("exclusion", "tab:purple"),
    ):
        axes[1].plot(xs, [getattr(r, key) for r in rows], "o-", label=key, color=color)
    axes[1].set_ylabel("terms")
    axes[1].legend(fontsize=7, ncol=3)
    axes[1].grid(alpha=0.3)

    if have_psnr:
        axes[2].plot(xs, [r.psnr_t for r in rows], "o-", label="psnr_t")
        axes[2].plot(xs, [r.psnr_r for r in rows], "s--", label="psnr_r")
        axes[2].set_ylabel("PSNR [dB]")
        axes[2].legend(fontsize=8)
        axes[2].grid(alpha=0.3)

    # Vertical separators where the scale changes.
    for i in range(1, len(rows)):
        if rows[i].scale != rows[i - 1].scale:
            for ax in axes:
                ax.axvline(i + 0.5, color="gray", linestyle=":", alpha=0.7)

    axes[-1].set_xlabel("layer (execution order)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
