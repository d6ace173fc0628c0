#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import matplotlib.pyplot as plt
import numpy as np


def fig_ax_getter(fig=None, ax=None):
    if fig is None and ax is None:
        fig, ax = plt.subplots()
    elif fig is None:
        fig = ax.get_figure()
    elif ax is None:
        ax = fig.gca()
    return fig, ax


def plot_sweep(table, title=None, fig=None, ax=None, **kwargs):
    """Plot precision, recall and F1 of a one dimensional sweep.

    The best F1 grid point is marked with a dashed vertical line. Distance
    sweeps (thresholds > 1) get a logarithmic x axis.

    Parameters
    ----------
    table : SweepResult
        Sweep over a single threshold or forest parameter
    """
    if len(table.columns) != 4:
        raise ValueError('Only sweeps over a single parameter can be plotted. '
                         f'Columns are {table.columns}')
    x = table.rows[:, 0]
    fig, ax = fig_ax_getter(fig, ax)
    for col, style in zip(('precision', 'recall', 'f1'), ('-', '--', '-.')):
        i = table.columns.index(col)
        ax.plot(x, table.rows[:, i], style, label=col, **kwargs)
    best = table.rows[table.best_index]
    ax.axvline(best[0], color='k', linestyle=':', linewidth=1,
               label=f'best f1 = {best[-1]:.3f}')
    if np.all(x > 0) and x.max() / x.min() > 100:
        ax.set_xscale('log')
    ax.set_xlabel(table.columns[0])
    ax.set_ylabel('score')
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc='best')
    return fig, ax


def save_sweep_plot(table, path, title=None):
    """Plot `table` and save it. The format follows the file extension."""
    fig, _ = plot_sweep(table, title=title)
    fig.savefig(path, bbox_inches='tight')
    plt.close(fig)
