"""Independent fine-step oracles shared by the unit and acceptance tests."""
import numpy as np

from kirchlab.energies import lemma_lin_bound, lemma_sqrt_bound


def _piecewise_linear(rng, n_inst, T, n_knots=8, hi=3.0):
    knots = np.linspace(0.0, T, n_knots)
    vals = rng.uniform(0.0, hi, size=(n_inst, n_knots))

    def at(t):
        j = min(int(np.searchsorted(knots, t, side="right")) - 1, n_knots - 2)
        a = (t - knots[j]) / (knots[j + 1] - knots[j])
        return (1 - a) * vals[:, j] + a * vals[:, j + 1]
    return at


def _rk4(f, y0, T, n_steps):
    y, h = y0.copy(), T / n_steps
    out = [y.copy()]
    for i in range(n_steps):
        t = i * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y.copy())
    return np.array(out)


def sqrt_lemma_suite(n=200, seed=0, T=5.0, n_steps=4000, slack=1 + 1e-6):
    """Violations of the square-root comparison bound over ``n`` random instances."""
    rng = np.random.default_rng(seed)
    y0 = rng.uniform(0.0, 10.0, n) * rng.integers(0, 2, n)
    c1 = rng.uniform(0.2, 4.0, n)
    c2 = rng.uniform(0.2, 4.0, n)
    psi = _piecewise_linear(rng, n, T)
    f = lambda t, y: psi(t) * (-c1 * y + c2 * np.sqrt(np.maximum(y, 0.0)))
    ys = _rk4(f, y0, T, n_steps)
    bound = np.array([lemma_sqrt_bound(a, b, c) for a, b, c in zip(y0, c1, c2)])
    return int(np.count_nonzero(np.any(ys > bound * slack, axis=0)))


def lin_lemma_suite(n=200, seed=1, T=3.0, n_steps=3000, slack=1 + 1e-6):
    """Violations of the linear comparison bound for ``y' = -g1 + g2 y + g3``."""
    rng = np.random.default_rng(seed)
    g1, g2, g3 = (_piecewise_linear(rng, n, T, hi=h) for h in (2.0, 1.0, 2.0))

    def f(t, z):
        y = z[:n]
        return np.concatenate([-g1(t) + g2(t) * y + g3(t), g1(t), g2(t), g3(t)])

    zs = _rk4(f, np.zeros(4 * n), T, n_steps)
    y, G1, G2, G3 = (zs[:, i * n:(i + 1) * n] for i in range(4))
    bound = np.vectorize(lemma_lin_bound)(G1, G2, G3)
    lhs_bound = bound + G1  # e^{G2} G3
    return int(np.count_nonzero(np.any(y + G1 > lhs_bound * slack + 1e-300, axis=0)))
