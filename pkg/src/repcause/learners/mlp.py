"""Fully-connected networks trained by Adam with mini-batches and early
stopping, plus the bottleneck autoencoder built from the same core.

Backpropagation is implemented directly so tests can compare analytic
gradients against finite differences parameter by parameter.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidSpecError, NumericsError
from .base import Diagnostics, FittedLearner, as_xy
from .specs import AutoencoderSpec, MlpSpec

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _act(name, h):
    if name == "relu":
        return np.maximum(h, 0.0)
    if name == "tanh":
        return np.tanh(h)
    return h


def _act_grad(name, h, a):
    # derivative wrt pre-activation h, given activation value a
    if name == "relu":
        return (h > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(h)


class MlpNetwork:
    """Weights, forward pass and exact gradients for a layered network.

    ``loss``: "squared" uses mean((pred - target)^2) over all output
    entries; "logistic" treats the single linear output as a logit and
    uses the mean logistic loss.
    """

    def __init__(self, dims, activations, seed: int, loss: str = "squared"):
        if len(activations) != len(dims) - 1:
            raise InvalidSpecError("need one activation per layer")
        self.dims = list(dims)
        self.activations = list(activations)
        self.loss = loss
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            # He initialization
            self.weights.append(rng.standard_normal((fan_in, fan_out))
                                * np.sqrt(2.0 / fan_in))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x):
        """Returns (pre-activations, activations) per layer; the last
        activation is the network output (linear for the final layer of
        both loss modes)."""
        pres, acts = [], [x]
        h = x
        for w, b, name in zip(self.weights, self.biases, self.activations):
            pre = h @ w + b
            h = _act(name, pre)
            pres.append(pre)
            acts.append(h)
        return pres, acts

    def output(self, x):
        return self.forward(x)[1][-1]

    def predict(self, x):
        out = self.output(x)
        if self.loss == "logistic":
            return _sigmoid(out[:, 0])
        return out[:, 0] if out.shape[1] == 1 else out

    def loss_value(self, x, target):
        out = self.output(x)
        if self.loss == "logistic":
            eta = out[:, 0]
            return float(np.mean(np.logaddexp(0.0, eta) - target * eta))
        t = target if out.ndim == target.ndim else target[:, None]
        return float(np.mean((out - t) ** 2))

    def loss_and_grads(self, x, target):
        pres, acts = self.forward(x)
        out = acts[-1]
        if self.loss == "logistic":
            eta = out[:, 0]
            loss = float(np.mean(np.logaddexp(0.0, eta) - target * eta))
            delta = ((_sigmoid(eta) - target) / len(eta))[:, None]
        else:
            t = target if out.ndim == target.ndim else target[:, None]
            diff = out - t
            loss = float(np.mean(diff**2))
            delta = 2.0 * diff / diff.size
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            delta = delta * _act_grad(self.activations[layer], pres[layer],
                                      acts[layer + 1])
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer:
                delta = delta @ self.weights[layer].T
        return loss, grads_w, grads_b

    def parameters(self):
        return self.weights + self.biases

    def copy_parameters(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def set_parameters(self, weights, biases):
        self.weights = [w.copy() for w in weights]
        self.biases = [b.copy() for b in biases]


class _Adam:
    def __init__(self, shapes, lr):
        self.lr = lr
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correction = np.sqrt(1.0 - ADAM_BETA2**self.t) / (1.0 - ADAM_BETA1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * correction * m / (np.sqrt(v) + ADAM_EPS)


def _train(net: MlpNetwork, x, target, *, epochs, lr, batch_size, val_fraction,
           patience, rng) -> Diagnostics:
    n = x.shape[0]
    perm = rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n))) if n > 2 else 1
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        train_idx = perm
    xv, tv = x[val_idx], target[val_idx]
    xt, tt = x[train_idx], target[train_idx]

    opt = _Adam([w.shape for w in net.weights] + [b.shape for b in net.biases], lr)
    best = net.copy_parameters()
    best_val = net.loss_value(xv, tv)
    stale = 0
    epoch = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            loss, gw, gb = net.loss_and_grads(xt[batch], tt[batch])
            if not np.isfinite(loss):
                raise NumericsError(f"non-finite training loss at epoch {epoch}")
            opt.step(net.weights + net.biases, gw + gb)
        val = net.loss_value(xv, tv)
        if not np.isfinite(val):
            raise NumericsError(f"non-finite validation loss at epoch {epoch}")
        if val < best_val - 1e-12:
            best_val = val
            best = net.copy_parameters()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    net.set_parameters(*best)
    return Diagnostics(final_loss=float(best_val), n_iter=epoch, converged=True)


class MlpModel(FittedLearner):
    def __init__(self, spec, net, diagnostics):
        super().__init__(spec, net.dims[0], diagnostics)
        self.net = net

    def _predict(self, x):
        return self.net.predict(x)


def fit_mlp(x, target, spec: MlpSpec) -> MlpModel:
    x, target = as_xy(x, target)
    if spec.task == "classification":
        uniq = np.unique(target)
        if not np.all(np.isin(uniq, (0.0, 1.0))):
            raise InvalidSpecError("classification targets must be 0/1")
    dims = [x.shape[1]] + [spec.width] * spec.depth + [1]
    activations = [spec.activation] * spec.depth + ["linear"]
    loss = "logistic" if spec.task == "classification" else "squared"
    net = MlpNetwork(dims, activations, seed=spec.seed, loss=loss)
    rng = np.random.default_rng(spec.seed + 1)
    diagnostics = _train(
        net, x, target, epochs=spec.epochs, lr=spec.lr,
        batch_size=spec.batch_size, val_fraction=spec.val_fraction,
        patience=spec.patience, rng=rng,
    )
    return MlpModel(spec, net, diagnostics)


class AutoencoderModel(FittedLearner):
    """Encoder/decoder pair; ``predict`` reconstructs, ``encode`` maps to
    the bottleneck coordinates."""

    def __init__(self, spec, net, latent_dim, n_encoder_layers, diagnostics):
        super().__init__(spec, net.dims[0], diagnostics)
        self.net = net
        self.latent_dim = latent_dim
        self._n_enc = n_encoder_layers

    def _predict(self, x):
        return self.net.output(x)

    def encode(self, x):
        x = np.asarray(x, dtype=np.float64)
        h = x
        for w, b, name in zip(self.net.weights[: self._n_enc],
                              self.net.biases[: self._n_enc],
                              self.net.activations[: self._n_enc]):
            h = _act(name, h @ w + b)
        return h


def fit_autoencoder(x, latent_dim: int, spec: AutoencoderSpec | None = None
                    ) -> AutoencoderModel:
    spec = spec or AutoencoderSpec()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidSpecError("autoencoder input must be a matrix")
    d = x.shape[1]
    if not 1 <= latent_dim <= d:
        raise InvalidSpecError(f"latent_dim must be in [1, {d}], got {latent_dim}")
    hidden = list(spec.hidden)
    dims = [d] + hidden + [latent_dim] + hidden[::-1] + [d]
    # hidden layers use the configured activation; bottleneck and output stay linear
    activations = ([spec.activation] * len(hidden) + ["linear"]
                   + [spec.activation] * len(hidden) + ["linear"])
    net = MlpNetwork(dims, activations, seed=spec.seed, loss="squared")
    rng = np.random.default_rng(spec.seed + 1)
    diagnostics = _train(
        net, x, x, epochs=spec.epochs, lr=spec.lr, batch_size=spec.batch_size,
        val_fraction=spec.val_fraction, patience=spec.patience, rng=rng,
    )
    return AutoencoderModel(spec, net, latent_dim, len(hidden) + 1, diagnostics)
