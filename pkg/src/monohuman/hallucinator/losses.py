"""Adversarial and distribution-alignment losses."""

from __future__ import annotations

import torch

from ..errors import DimensionMismatch, EmptyInput

DEFAULT_BANDWIDTHS = (0.5, 1.0, 2.0, 4.0)


def hinge_d_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    return torch.relu(1.0 - real_scores).mean() + torch.relu(1.0 + fake_scores).mean()


def hinge_g_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    return -fake_scores.mean()


def _as_2d(x, name: str) -> torch.Tensor:
    t = torch.as_tensor(x, dtype=torch.float64) if not torch.is_tensor(x) else x
    if t.ndim != 2:
        raise DimensionMismatch(f"{name} must be (n, d), got shape {tuple(t.shape)}")
    if t.shape[0] == 0:
        raise EmptyInput(f"{name} has no rows")
    return t


def mmd_loss(a, b, bandwidths: tuple[float, ...] = DEFAULT_BANDWIDTHS) -> torch.Tensor:
    """Biased squared MMD under a sum of RBF kernels.

    For each bandwidth s the kernel is exp(-||x - y||^2 / (2 s^2)); the
    estimate is mean(K_aa) + mean(K_bb) - 2 mean(K_ab), summed over
    bandwidths. Identical inputs give exactly zero.
    """
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    d_aa = torch.cdist(a, a) ** 2
    d_bb = torch.cdist(b, b) ** 2
    d_ab = torch.cdist(a, b) ** 2
    total = a.new_zeros(())
    for s in bandwidths:
        denom = 2.0 * s * s
        total = total + (
            torch.exp(-d_aa / denom).mean()
            + torch.exp(-d_bb / denom).mean()
            - 2.0 * torch.exp(-d_ab / denom).mean()
        )
    return total


def coral_loss(a, b) -> torch.Tensor:
    """Squared Frobenius distance of feature covariances, scaled by 1/(4 d^2)."""
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise EmptyInput("covariance alignment needs at least two rows per set")
    d = a.shape[1]
    ca = _cov(a)
    cb = _cov(b)
    return ((ca - cb) ** 2).sum() / (4.0 * d * d)


def _cov(x: torch.Tensor) -> torch.Tensor:
    centered = x - x.mean(dim=0, keepdim=True)
    return centered.T @ centered / (x.shape[0] - 1)
