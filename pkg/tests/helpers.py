"""Shared test utilities: random graph builders and finite-difference checks."""

import numpy as np

from dirlink.graph import DirectedGraph


def random_graph(rng, n, p=0.2, ensure_edge=True):
    """Erdos-Renyi style directed graph without self-loops."""
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    edges = np.argwhere(mask)
    if ensure_edge and len(edges) == 0:
        edges = np.array([[0, (1 % n) or 0]])
        if n == 1:
            raise ValueError("need n >= 2")
        edges = np.array([[0, 1]])
    return DirectedGraph(n, edges)


def weakly_connected_random_graph(rng, n, p=0.2):
    """Random graph made weakly connected by a directed path over a permutation."""
    g = random_graph(rng, n, p, ensure_edge=False)
    perm = rng.permutation(n)
    path = np.stack([perm[:-1], perm[1:]], axis=1)
    edges = np.vstack([g.edges, path]) if len(g.edges) else path
    return DirectedGraph(n, edges)


def rel_err(a, b, floor=1e-3):
    return abs(a - b) / max(abs(a), abs(b), floor)


def central_diff(loss_fn, tensor, idx, h=1e-5):
    """Two-point estimate of d loss / d tensor[idx]."""
    orig = tensor.data[idx]
    tensor.data[idx] = orig + h
    up = loss_fn()
    tensor.data[idx] = orig - h
    down = loss_fn()
    tensor.data[idx] = orig
    return (up - down) / (2.0 * h)


def check_gradients(loss_builder, params, rng, coords_per_tensor=3, h=1e-5, tol=1e-4):
    """Compare analytic gradients against central differences.

    loss_builder() must rebuild the graph from the current parameter data and
    return the scalar loss Tensor.  Samples a few coordinates per parameter.
    Returns the worst relative error seen.
    """
    import dirlink.autodiff as ad

    loss = loss_builder()
    ad.backward(loss, params)
    grads = [p.grad.copy() for p in params]

    def loss_value():
        return float(loss_builder().data[0, 0])

    worst = 0.0
    for p, g in zip(params, grads):
        nrow, ncol = p.data.shape
        count = min(coords_per_tensor, nrow * ncol)
        flat = rng.choice(nrow * ncol, size=count, replace=False)
        for f in flat:
            idx = (int(f) // ncol, int(f) % ncol)
            numeric = central_diff(loss_value, p, idx, h=h)
            err = rel_err(g[idx], numeric)
            worst = max(worst, err)
            assert err <= tol, (
                f"gradient mismatch at {idx}: analytic {g[idx]:.8g} vs numeric {numeric:.8g}"
            )
    return worst
