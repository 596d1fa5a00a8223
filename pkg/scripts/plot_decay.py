"""
Decay Curves
============

Log-log plots of the bound series of a finished run, drawn from its CSVs:
raw norm with the predicted power law through the window, and the
normalized series whose boundedness the checks assert.
"""

import sys
from pathlib import Path

import click
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.core.errors import MissingArtifactsError
from src.core.logger import logger
from src.modules.run_store import RunStore


def plot_series(store: RunStore, name: str, target: Path) -> Path:
    frame = store.load_series(name)
    t = frame["t"].to_numpy()
    raw = frame["raw_norm"].to_numpy()
    normalized = frame["normalized"].to_numpy()
    predicted = float(frame["predicted_exponent"].iloc[0])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    positive = raw > 0
    ax1.loglog(t[positive], raw[positive], "o-", ms=2, lw=1, label="measured")
    if np.isfinite(predicted) and np.any(positive):
        anchor = np.argmax(positive)
        reference = raw[anchor] * (t / t[anchor]) ** predicted
        ax1.loglog(t, reference, "--", color="gray", label=f"t^{predicted:.3g}")
    ax1.set_xlabel("t")
    ax1.set_ylabel("norm")
    ax1.set_title(name)
    ax1.legend()
    ax1.grid(True, which="both", alpha=0.3)

    finite = np.isfinite(normalized) & (normalized > 0)
    if np.any(finite):
        ax2.loglog(t[finite], normalized[finite], "o-", ms=2, lw=1, color="#ff7f0e")
    ax2.set_xlabel("t")
    ax2.set_ylabel("t^(-mu) x norm")
    ax2.set_title("normalized")
    ax2.grid(True, which="both", alpha=0.3)

    fig.tight_layout()
    output = target / f"{name}.png"
    fig.savefig(output, dpi=120)
    plt.close(fig)
    return output


@click.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--only", multiple=True, help="Plot only these quantities")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory (default <run>/plots)")
def main(run_dir: str, only, out):
    """Plot every CSV series of RUN_DIR"""
    store = RunStore(run_dir)
    names = [Path(p).stem for p in store.list_csvs()]
    if only:
        names = [n for n in names if n in set(only)]
    if not names:
        raise click.ClickException("no CSV series found")

    target = Path(out) if out else store.run_dir / "plots"
    target.mkdir(parents=True, exist_ok=True)
    for name in names:
        try:
            path = plot_series(store, name, target)
            logger.debug(f"Plotted {path}")
        except (MissingArtifactsError, KeyError) as e:
            logger.warning(f"Skipping {name}: {e}")
    logger.info(f"Plots written to {target}")


if __name__ == "__main__":
    main()
