"""Optional SVG figure of a frame's disparity pairs and fitted curve.

Needs matplotlib (``pip install metricdepth[plot]``); it is imported lazily so
the rest of the package does not depend on it.
"""

from __future__ import annotations

import numpy as np


def write_fit_svg(path, pairs, model=None, title: str = ''):
    """Scatter ``(d_rel, d_met)`` and overlay ``model`` over its domain."""
    try:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError('plotting needs matplotlib: pip install matplotlib') from exc

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.scatter(pairs.d_rel, pairs.d_met, s=8, color='0.3', label='features')
    if model is not None:
        grid = np.linspace(model.domain[0], model.domain[1], 400)
        ax.plot(grid, model.predict(grid), color='C3', lw=1.5, label=model.strategy)
    ax.set_xlabel('relative disparity')
    ax.set_ylabel('metric disparity (1/m)')
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    # fixed hash salt and no date keep the SVG byte-stable across runs
    with matplotlib.rc_context({'svg.hashsalt': 'metricdepth'}):
        fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
