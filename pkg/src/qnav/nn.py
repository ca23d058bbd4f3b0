"""Small classical network stack with manual forward/backward passes.

Everything operates on plain numpy arrays; parameters live in flat dicts of
named arrays so the optimizer and checkpoints can treat models uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN_EPS = 1e-5


class ShapeError(ValueError):
    """Inconsistent tensor shapes."""


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# dense


def dense_init(rng: np.random.Generator, in_dim: int, out_dim: int) -> dict:
    return {
        "W": glorot_uniform(rng, in_dim, out_dim, (out_dim, in_dim)),
        "b": np.zeros(out_dim),
    }


def dense_forward(params: dict, x: np.ndarray):
    W, b = params["W"], params["b"]
    if x.shape != (W.shape[1],):
        raise ShapeError(f"dense expects input of length {W.shape[1]}, got {x.shape}")
    return W @ x + b, x


def dense_backward(params: dict, dy: np.ndarray, cache):
    x = cache
    grads = {"W": np.outer(dy, x), "b": dy.copy()}
    return params["W"].T @ dy, grads


# ---------------------------------------------------------------------------
# layer normalization


def layer_norm_init(dim: int) -> dict:
    return {"gain": np.ones(dim), "bias": np.zeros(dim)}


def layer_norm_forward(params: dict, x: np.ndarray):
    mu = x.mean()
    var = x.var()
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    y = params["gain"] * xhat + params["bias"]
    return y, (xhat, inv)


def layer_norm_backward(params: dict, dy: np.ndarray, cache):
    xhat, inv = cache
    n = xhat.shape[0]
    grads = {"gain": dy * xhat, "bias": dy.copy()}
    dxhat = dy * params["gain"]
    dx = inv * (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean())
    return dx, grads


# ---------------------------------------------------------------------------
# activations


def tanh_forward(x: np.ndarray):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy: np.ndarray, cache):
    y = cache
    return dy * (1.0 - y * y)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def softmax_entropy(logits: np.ndarray) -> tuple[np.ndarray, float]:
    """Softmax probabilities and the natural-log entropy -sum p log p."""
    probs = softmax(logits)
    # p log p -> 0 as p -> 0
    logp = np.log(np.clip(probs, 1e-300, None))
    return probs, float(-(probs * logp).sum())


def entropy_backward(probs: np.ndarray, dH: float) -> np.ndarray:
    """Gradient of entropy w.r.t. the logits, scaled by upstream dH."""
    logp = np.log(np.clip(probs, 1e-300, None))
    ent = -(probs * logp).sum()
    return dH * (-probs * (logp + ent))


# ---------------------------------------------------------------------------
# LSTM cell (single step; callers unroll and accumulate grads over time)


def lstm_init(rng: np.random.Generator, in_dim: int, hidden: int) -> dict:
    return {
        "Wx": glorot_uniform(rng, in_dim, hidden, (4 * hidden, in_dim)),
        "Wh": glorot_uniform(rng, hidden, hidden, (4 * hidden, hidden)),
        "b": np.zeros(4 * hidden),
    }


def lstm_step(params: dict, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """Standard LSTM update; gate order in the stacked weights is i, f, o, g."""
    hidden = h_prev.shape[0]
    if params["Wx"].shape[1] != x.shape[0]:
        raise ShapeError(f"lstm expects input of length {params['Wx'].shape[1]}, got {x.shape}")
    pre = params["Wx"] @ x + params["Wh"] @ h_prev + params["b"]
    i = _sigmoid(pre[:hidden])
    f = _sigmoid(pre[hidden : 2 * hidden])
    o = _sigmoid(pre[2 * hidden : 3 * hidden])
    g = np.tanh(pre[3 * hidden :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (x, h_prev, c_prev, i, f, o, g, c, tc)
    return h, c, cache


def lstm_step_backward(params: dict, dh: np.ndarray, dc: np.ndarray, cache):
    """Backward through one step. Returns (dx, dh_prev, dc_prev, grads)."""
    x, h_prev, c_prev, i, f, o, g, c, tc = cache
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f
    dpre = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ]
    )
    grads = {
        "Wx": np.outer(dpre, x),
        "Wh": np.outer(dpre, h_prev),
        "b": dpre,
    }
    dx = params["Wx"].T @ dpre
    dh_prev = params["Wh"].T @ dpre
    return dx, dh_prev, dc_prev, grads


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class Adam:
    """Bias-corrected Adam over a dict of named parameter arrays."""

    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, params: dict, grads: dict) -> None:
        self.t += 1
        for name, g in grads.items():
            p = params[name]
            if g.shape != p.shape:
                raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name!r}")
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            mhat = m / (1.0 - self.beta1**self.t)
            vhat = v / (1.0 - self.beta2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_check(params: dict, loss_fn, grads: dict, h: float = 1e-5) -> float:
    """Max relative error between analytic grads and central differences.

    ``loss_fn`` is re-evaluated with each entry of ``params`` perturbed in
    place; it must be a pure function of the current parameter values.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must be in [1e-7, 1e-3]")
    worst = 0.0
    for name, p in params.items():
        g = grads[name]
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_fn()
            flat[idx] = orig - h
            lm = loss_fn()
            flat[idx] = orig
            num = (lp - lm) / (2.0 * h)
            denom = max(abs(num), abs(gflat[idx]), 1.0)
            worst = max(worst, abs(num - gflat[idx]) / denom)
    return worst


def accumulate(total: dict, grads: dict) -> None:
    """Sum a step's grads into a running total dict (in place)."""
    for name, g in grads.items():
        if name in total:
            total[name] += g
        else:
            total[name] = g.copy()


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def clip_by_global_norm(grads: dict, max_norm: float) -> dict:
    norm = global_norm(grads)
    if norm > max_norm > 0:
        scale = max_norm / norm
        return {name: g * scale for name, g in grads.items()}
    return grads
