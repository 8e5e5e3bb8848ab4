import numpy as np
import plotly.graph_objects as go
import pytest

from conftest import as_view
from exceptions import TooManyViews
from integrate import QuadraticSurrogate
from objective import ObjectiveParams
from surface_plot import grid_argmin, objective_surface, surface_figure


class TestObjectiveSurface:
    def test_two_views(self, triangles):
        views = [as_view(triangles), as_view(triangles, 1)]
        frame = objective_surface(views, ObjectiveParams(k=2), 0.25)
        assert list(frame.columns) == ["w1", "w2", "h"]
        assert len(frame) == 5
        np.testing.assert_allclose(frame["w1"] + frame["w2"], 1.0)

    def test_three_views_with_surrogate(self, triangles):
        views = [as_view(triangles, i) for i in range(3)]
        surrogate = QuadraticSurrogate(np.triu(np.ones((3, 3))))
        frame = objective_surface(views, ObjectiveParams(k=2), 0.5, surrogate)
        assert len(frame) == 6
        assert "h_theta" in frame
        corner = frame[(frame["w1"] == 0.0) & (frame["w2"] == 0.0)]
        assert corner["h_theta"].iloc[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("r", [1, 4])
    def test_needs_two_or_three_views(self, triangles, r):
        with pytest.raises(TooManyViews):
            objective_surface([as_view(triangles, i) for i in range(r)], ObjectiveParams(k=2), 0.5)

    def test_argmin_of_identical_views_is_balanced(self, triangles):
        views = [as_view(triangles), as_view(triangles, 1)]
        frame = objective_surface(views, ObjectiveParams(k=2, gamma=0.5), 0.25)
        np.testing.assert_allclose(grid_argmin(frame), [0.5, 0.5])


class TestSurfaceFigure:
    def test_line_plot_for_two_views(self, triangles):
        views = [as_view(triangles), as_view(triangles, 1)]
        fig = surface_figure(objective_surface(views, ObjectiveParams(k=2), 0.25))
        assert isinstance(fig, go.Figure)
        assert [trace.type for trace in fig.data] == ["scatter", "scatter"]

    def test_mesh_for_three_views(self, triangles):
        views = [as_view(triangles, i) for i in range(3)]
        surrogate = QuadraticSurrogate(np.eye(3))
        fig = surface_figure(objective_surface(views, ObjectiveParams(k=2), 0.5, surrogate), "demo")
        assert [trace.type for trace in fig.data] == ["mesh3d", "scatter3d", "mesh3d", "scatter3d"]
        assert fig.layout.title.text == "demo"
