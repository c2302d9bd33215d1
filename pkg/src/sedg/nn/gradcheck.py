"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def gradient_check(loss_and_grads, loss_only, params, n_per_param: int = 5,
                   h: float = 1e-5, seed: int = 0) -> float:
    """Compare analytic gradients to central finite differences.

    `loss_and_grads` computes the loss and fills every param's .grad;
    `loss_only` recomputes the loss from current values without touching
    grads. Both must be deterministic (dropout off, batch norm on running
    statistics, any noise draws frozen). Checks a random subset of weight
    positions per tensor and returns the maximum relative error.
    """
    loss_and_grads()
    analytic = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.value.ravel()
        gflat = grads.ravel()
        positions = rng.choice(flat.size, size=min(n_per_param, flat.size), replace=False)
        for pos in positions:
            orig = flat[pos]
            flat[pos] = orig + h
            plus = loss_only()
            flat[pos] = orig - h
            minus = loss_only()
            flat[pos] = orig
            numeric = (plus - minus) / (2.0 * h)
            scale = max(abs(gflat[pos]) + abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[pos] - numeric) / scale)
    return worst
