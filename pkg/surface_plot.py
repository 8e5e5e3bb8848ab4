"""Objective landscape over the weight simplex, as a table and a plotly figure."""

from typing import Optional, Sequence

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from exceptions import TooManyViews
from integrate import QuadraticSurrogate, evaluate_surrogate
from objective import ObjectiveParams, brute_force_objective_grid


def objective_surface(laplacians: Sequence, params: ObjectiveParams, step: float,
                      surrogate: Optional[QuadraticSurrogate] = None) -> pd.DataFrame:
    """h (and h_theta when a surrogate is given) on every simplex grid point."""
    r = len(laplacians)
    if r not in (2, 3):
        raise TooManyViews(f"landscape plots need 2 or 3 views, got {r}")
    rows = []
    for w, h in brute_force_objective_grid(laplacians, params, step):
        row = {f"w{i + 1}": float(value) for i, value in enumerate(w)}
        row["h"] = h
        if surrogate is not None:
            row["h_theta"] = evaluate_surrogate(surrogate, w)
        rows.append(row)
    return pd.DataFrame(rows)


def _argmin_marker(frame: pd.DataFrame, column: str, label: str, r: int, color: str):
    best = frame.loc[frame[column].idxmin()]
    if r == 2:
        return go.Scatter(x=[best["w1"]], y=[best[column]], mode="markers", name=label,
                          marker=dict(symbol="x", size=12, color=color))
    return go.Scatter3d(x=[best["w1"]], y=[best["w2"]], z=[best[column]], mode="markers", name=label,
                        marker=dict(symbol="x", size=6, color=color))


def surface_figure(frame: pd.DataFrame, title: str = "Objective landscape") -> go.Figure:
    r = sum(1 for column in frame.columns if column.startswith("w"))
    columns = [("h", "h(w)", "#1f77b4"), ("h_theta", "surrogate", "#ff7f0e")]
    fig = go.Figure()
    for column, label, color in columns:
        if column not in frame:
            continue
        if r == 2:
            ordered = frame.sort_values("w1")
            fig.add_trace(go.Scatter(x=ordered["w1"], y=ordered[column], mode="lines", name=label,
                                     line=dict(color=color)))
        else:
            fig.add_trace(go.Mesh3d(x=frame["w1"], y=frame["w2"], z=frame[column], name=label,
                                    color=color, opacity=0.6, showlegend=True))
        fig.add_trace(_argmin_marker(frame, column, f"argmin {label}", r, color))
    if r == 2:
        fig.update_layout(xaxis_title="w1", yaxis_title="objective")
    else:
        fig.update_layout(scene=dict(xaxis_title="w1", yaxis_title="w2", zaxis_title="objective"))
    fig.update_layout(title=title, template="plotly_white")
    return fig


def grid_argmin(frame: pd.DataFrame, column: str = "h") -> np.ndarray:
    weights = [c for c in frame.columns if c.startswith("w")]
    return frame.loc[frame[column].idxmin(), weights].to_numpy(dtype=float)
