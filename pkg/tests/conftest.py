from __future__ import annotations

import numpy as np
import pytest

import msglon.landscape as ls
from msglon.landscape import MsgInstance, random_instance


@pytest.fixture
def tiny_instance() -> MsgInstance:
    """Three components in d=2 with a known structure, built by hand.

    Component 0 is the strongest peak. Component 1 sits close enough to 0,
    with a small weight, that 0 dominates it. Component 2 is far away and
    narrow, so it is a second local optimum.
    """
    return MsgInstance(
        dim=2,
        centers=np.array([[0.2, 0.2], [0.3, 0.2], [0.8, 0.8]]),
        weights=np.array([0.9, 0.2, 0.5]),
        sigmas=np.array([0.2, 0.05, 0.05]),
    )


@pytest.fixture
def small_random() -> MsgInstance:
    return random_instance(dim=2, m=20, seed=7)


class KernelCounter:
    """Counts rows pushed through the two scoring kernels.

    Installed by monkeypatching the module-level functions in
    ``msglon.landscape``; callers inside the package resolve them through the
    module attribute at call time, so the patch is visible everywhere.
    """

    def __init__(self):
        self.rows = 0

    def install(self, monkeypatch):
        orig_values = ls.component_values
        orig_scores = ls.component_scores

        def counted_values(instance, points):
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            self.rows += pts.shape[0]
            return orig_values(instance, points)

        def counted_scores(instance, points):
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            self.rows += pts.shape[0]
            return orig_scores(instance, points)

        monkeypatch.setattr(ls, "component_values", counted_values)
        monkeypatch.setattr(ls, "component_scores", counted_scores)
        return self


@pytest.fixture
def kernel_counter(monkeypatch) -> KernelCounter:
    return KernelCounter().install(monkeypatch)
