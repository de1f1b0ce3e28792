import numpy as np
import pytest

from panelcd.panel import PanelDataset


def build_panel(y, x, has_intercept=True):
    n, t = y.shape
    return PanelDataset(
        y=y,
        x=x,
        unit_ids=tuple(str(i + 1) for i in range(n)),
        time_ids=tuple(str(s + 1) for s in range(t)),
        has_intercept=has_intercept,
    )


def random_panel(rng, n=5, t=20, k=2, noise=1.0):
    """Well-conditioned panel with an intercept and k-1 iid normal regressors."""
    x = np.empty((n, t, k))
    x[:, :, 0] = 1.0
    if k > 1:
        x[:, :, 1:] = rng.standard_normal((n, t, k - 1))
    beta = rng.normal(1.0, 0.5, (n, k))
    y = np.einsum("ntk,nk->nt", x, beta) + noise * rng.standard_normal((n, t))
    return build_panel(y, x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
