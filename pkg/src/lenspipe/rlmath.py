"""Reward-weighted velocity losses, reward normalization, and distillation math.

Desk-scale reference implementations in float64.  Losses over logit vectors
are means, so values are batch-size invariant; the squared norm inside the
velocity loss is the plain sum over components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GROUPS_PER_EPOCH = 48
GROUP_SIZE = 24
CFG_SCALE = 5.0


class RLMathError(ValueError):
    pass


@dataclass
class VelocityPair:
    v_old: np.ndarray
    v_theta: np.ndarray
    v_target: np.ndarray

    def __post_init__(self):
        self.v_old = np.asarray(self.v_old, dtype=np.float64)
        self.v_theta = np.asarray(self.v_theta, dtype=np.float64)
        self.v_target = np.asarray(self.v_target, dtype=np.float64)
        if not (self.v_old.shape == self.v_theta.shape == self.v_target.shape):
            raise RLMathError("velocity vectors must have equal shapes")
        for v in (self.v_old, self.v_theta, self.v_target):
            if not np.all(np.isfinite(v)):
                raise RLMathError("velocity entries must be finite")


@dataclass(frozen=True)
class NFTConfig:
    beta: float = 1.0
    z_c: float = 1.0
    kl_coeff: float = 1e-4
    stabilizer: float = 0.001

    def __post_init__(self):
        if self.beta <= 0:
            raise RLMathError("beta must be > 0")
        if self.z_c <= 0:
            raise RLMathError("z_c must be > 0")
        if self.kl_coeff < 0:
            raise RLMathError("kl_coeff must be >= 0")


@dataclass
class RewardGroup:
    raw: np.ndarray

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.size == 0:
            raise RLMathError("reward group must be nonempty")

    @property
    def mean(self) -> float:
        return float(self.raw.mean())


@dataclass(frozen=True)
class DMDConfig:
    gamma: float = 1.0
    alpha: float = 0.1
    lambda_d: float = 0.1
    lambda_g: float = 0.001
    mu_ida: float = 0.03
    ttur_ratio: int = 4

    def __post_init__(self):
        for name in ("gamma", "alpha", "lambda_d", "lambda_g", "mu_ida"):
            if getattr(self, name) < 0:
                raise RLMathError(f"{name} must be >= 0")
        if self.ttur_ratio < 1:
            raise RLMathError("ttur_ratio must be >= 1")


def normalize_reward(raw, group_mean, z_c):
    """Map a raw reward to a bounded optimality probability in [0, 1]."""
    if np.any(np.asarray(z_c) <= 0):
        raise RLMathError("z_c must be > 0")
    return 0.5 + 0.5 * np.clip((np.asarray(raw, dtype=np.float64) - group_mean) / z_c, -1.0, 1.0)


def pooled_z_c(groups: list[RewardGroup]) -> float:
    """Default normalizer: standard deviation of the pooled reward set."""
    pool = np.concatenate([g.raw for g in groups])
    return float(pool.std())


def normalize_groups(groups: list[RewardGroup], z_c: float | None = None,
                     per_group_std: bool = False) -> list[np.ndarray]:
    """Center each group at its mean and scale by z_c (pooled std by default)."""
    out = []
    for g in groups:
        scale = g.raw.std() if per_group_std else (z_c if z_c is not None else pooled_z_c(groups))
        if scale <= 0:
            raise RLMathError("reward scale must be > 0; pass an explicit z_c")
        out.append(np.asarray(normalize_reward(g.raw, g.mean, scale)))
    return out


def nft_velocities(p: VelocityPair, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Positive/negative velocities as linear blends of old and current policy."""
    v_plus = (1.0 - beta) * p.v_old + beta * p.v_theta
    v_minus = (1.0 + beta) * p.v_old - beta * p.v_theta
    return v_plus, v_minus


def nft_loss(p: VelocityPair, r: float, beta: float) -> float:
    """r ||v+ - v||^2 + (1 - r) ||v- - v||^2."""
    if not 0.0 <= r <= 1.0:
        raise RLMathError("r must be in [0, 1]")
    v_plus, v_minus = nft_velocities(p, beta)
    pos = float(((v_plus - p.v_target) ** 2).sum())
    neg = float(((v_minus - p.v_target) ** 2).sum())
    return r * pos + (1.0 - r) * neg


def nft_loss_grad(p: VelocityPair, r: float, beta: float) -> np.ndarray:
    """Analytic gradient of nft_loss with respect to v_theta."""
    v_plus, v_minus = nft_velocities(p, beta)
    return 2.0 * beta * r * (v_plus - p.v_target) - 2.0 * beta * (1.0 - r) * (v_minus - p.v_target)


def kl_penalty(p: VelocityPair, coeff: float) -> float:
    """Pluggable drift penalty: mean squared deviation from the old policy."""
    return coeff * float(((p.v_theta - p.v_old) ** 2).mean())


def logistic_loss(x):
    """log(1 + exp(-x)), overflow-safe."""
    return np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def forward_noise(x: np.ndarray, alpha_t: float, sigma_t: float, eps: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x.shape != eps.shape:
        raise RLMathError("x and eps must have equal shapes")
    return alpha_t * x + sigma_t * eps


def discriminator_loss(d_real, d_fake, d_perturbed, gamma: float) -> float:
    """Logistic real/fake terms plus the perturbation-difference penalty."""
    d_real = np.asarray(d_real, dtype=np.float64)
    d_perturbed = np.asarray(d_perturbed, dtype=np.float64)
    if d_real.shape != d_perturbed.shape:
        raise RLMathError("d_real and d_perturbed must have equal shapes")
    loss = float(logistic_loss(d_real).mean()) + float(logistic_loss(-np.asarray(d_fake, dtype=np.float64)).mean())
    loss += 0.5 * gamma * float(((d_real - d_perturbed) ** 2).mean())
    return loss


def generator_loss(d_fake) -> float:
    return float(logistic_loss(d_fake).mean())


def student_total_loss(l_dm: float, l_ca: float, l_g: float, cfg: DMDConfig = DMDConfig()) -> float:
    return cfg.lambda_d * (l_dm + l_ca) + cfg.lambda_g * l_g


def dmd_gradient_direction(s_fake: np.ndarray, s_teacher: np.ndarray) -> np.ndarray:
    s_fake = np.asarray(s_fake, dtype=np.float64)
    s_teacher = np.asarray(s_teacher, dtype=np.float64)
    if s_fake.shape != s_teacher.shape:
        raise RLMathError("score vectors must have equal shapes")
    return s_fake - s_teacher


def ida_update(phi: np.ndarray, theta: np.ndarray, mu_ida: float) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if phi.shape != theta.shape:
        raise RLMathError("parameter vectors must have equal shapes")
    if not 0.0 <= mu_ida <= 1.0:
        raise RLMathError("mu_ida must be in [0, 1]")
    return (1.0 - mu_ida) * phi + mu_ida * theta


def ttur_schedule(global_steps: int, ratio: int) -> list[str]:
    """Update tape: ratio critic updates, one student update, one ida event."""
    if global_steps < 1:
        raise RLMathError("global_steps must be >= 1")
    if ratio < 1:
        raise RLMathError("ratio must be >= 1")
    tape: list[str] = []
    for _ in range(global_steps):
        tape.extend(["critic"] * ratio)
        tape.append("student")
        tape.append("ida")
    return tape
