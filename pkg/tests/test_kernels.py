import os
import subprocess
import sys

import numpy as np
import pytest

from swarmlearn import kernels


def epoch_inputs(d, h, n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (rng.random(n) < 0.5).astype(np.float64)
    w = rng.normal(scale=0.3, size=kernels.param_count(d, h))
    return X, y, rng.permutation(n), w


@pytest.mark.skipif(not kernels.NUMBA_AVAILABLE, reason="numba not installed")
@pytest.mark.parametrize("h", [0, 5])
def test_numba_and_numpy_epochs_agree(h):
    X, y, perm, w = epoch_inputs(6, h)
    outs = []
    for fn in (kernels.epoch_np, kernels.epoch_nb):
        ww, m, v = w.copy(), np.zeros_like(w), np.zeros_like(w)
        step, loss = fn(X, y, perm, ww, m, v, 0, 1e-2, 1e-4, 0.9, 0.999, 1e-8, 32, 6, h)
        outs.append((ww, m, v, step, loss))
    (a, ma, va, sa, la), (b, mb, vb, sb, lb) = outs
    assert sa == sb == 10
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)
    np.testing.assert_allclose(ma, mb, rtol=0, atol=1e-9)
    np.testing.assert_allclose(va, vb, rtol=0, atol=1e-9)
    assert abs(la - lb) < 1e-9


def test_env_flag_selects_numpy_path():
    env = dict(os.environ, SWARMLEARN_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from swarmlearn import kernels; print(kernels.NUMBA_ENABLED)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
