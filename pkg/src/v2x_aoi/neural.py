"""Small numpy MLPs with exact reverse-mode gradients, Adam, and soft updates."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("need positive input and output sizes")
        if self.hidden_activation not in ("relu", "none"):
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("tanh", "none"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def to_dict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "hidden_activation": self.hidden_activation,
                "output_activation": self.output_activation}


def actor_spec(state_size: int, action_size: int, hidden=(500, 300)) -> MlpSpec:
    return MlpSpec((state_size, *hidden, action_size), "relu", "tanh")


def critic_spec(state_size: int, action_size: int, hidden=(500, 300)) -> MlpSpec:
    return MlpSpec((state_size + action_size, *hidden, 1), "relu", "none")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class MLP:
    """Fully connected network; weights are (fan_in, fan_out), inputs are row batches."""

    def __init__(self, spec: MlpSpec, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        self.spec = spec
        sizes = spec.layer_sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("layer count does not match spec")
        shapes = []
        for idx in range(len(sizes) - 1):
            shapes += [(sizes[idx], sizes[idx + 1]), (sizes[idx + 1],)]
        # one contiguous buffer; layer arrays are views so optimizers can work on it whole
        self.flat = np.empty(sum(int(np.prod(sh)) for sh in shapes))
        self._views = []
        offset = 0
        for sh in shapes:
            size = int(np.prod(sh))
            self._views.append(self.flat[offset:offset + size].reshape(sh))
            offset += size
        for idx, (w, b) in enumerate(zip(weights, biases)):
            w, b = np.asarray(w, dtype=float), np.asarray(b, dtype=float)
            if w.shape != shapes[2 * idx] or b.shape != shapes[2 * idx + 1]:
                raise ValueError(f"layer {idx} has shapes {w.shape}, {b.shape}")
            self._views[2 * idx][...] = w
            self._views[2 * idx + 1][...] = b
        self.weights = self._views[0::2]
        self.biases = self._views[1::2]

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator, final_scale: float = 1.0) -> "MLP":
        """Uniform(+-1/sqrt(fan_in)) weights and biases; last layer scaled by ``final_scale``."""
        weights, biases = [], []
        sizes = spec.layer_sizes
        for idx in range(len(sizes) - 1):
            bound = 1.0 / np.sqrt(sizes[idx])
            w = rng.uniform(-bound, bound, size=(sizes[idx], sizes[idx + 1]))
            b = rng.uniform(-bound, bound, size=sizes[idx + 1])
            if idx == len(sizes) - 2:
                w, b = w * final_scale, b * final_scale
            weights.append(w)
            biases.append(b)
        return cls(spec, weights, biases)

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "MLP":
        sizes = spec.layer_sizes
        return cls(spec, [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """List [W0, b0, W1, b1, ...] of live views into ``flat``."""
        return list(self._views)

    def flatten_grads(self, grads: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grads])

    def copy(self) -> "MLP":
        return MLP(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.spec.input_size:
            raise ValueError(f"expected input size {self.spec.input_size}, got {x.shape[-1]}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        a = x
        last = self.n_layers - 1
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            kind = self.spec.output_activation if idx == last else self.spec.hidden_activation
            a = _activate(a @ w + b, kind)
        return a

    __call__ = forward

    def forward_cache(self, x: np.ndarray):
        x = self._check_input(x)
        single = x.ndim == 1
        a = x[None, :] if single else x
        cache = [(None, a)]
        last = self.n_layers - 1
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            kind = self.spec.output_activation if idx == last else self.spec.hidden_activation
            z = a @ w + b
            a = _activate(z, kind)
            cache.append((z, a))
        out = a[0] if single else a
        return out, (single, cache)

    def backward(self, cache, upstream: np.ndarray,
                 param_grads: bool = True) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of sum(upstream * output) w.r.t. parameters and input.

        Returns ``(grads, input_grad)`` with ``grads`` ordered like ``parameters()``.
        With ``param_grads=False`` only the input gradient is computed and
        ``grads`` holds ``None`` entries.
        """
        single, layers = cache
        delta = np.asarray(upstream, dtype=float)
        if single:
            delta = delta[None, :]
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)
        last = self.n_layers - 1
        for idx in range(last, -1, -1):
            z, a = layers[idx + 1]
            kind = self.spec.output_activation if idx == last else self.spec.hidden_activation
            delta = delta * _activation_grad(z, a, kind)
            if param_grads:
                grads[2 * idx] = layers[idx][1].T @ delta
                grads[2 * idx + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[idx].T
        input_grad = delta[0] if single else delta
        return grads, input_grad


def forward(net: MLP, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def gradients(net: MLP, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    _, cache = net.forward_cache(x)
    return net.backward(cache, upstream)


class Adam:
    """Adam with bias correction over a list of parameter arrays."""

    def __init__(self, params: Sequence[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = float(lr), beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
        """In-place descent step on ``params``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        step = self.lr / c1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            tmp = np.empty_like(g)
            m *= b1
            np.multiply(g, 1.0 - b1, out=tmp)
            m += tmp
            v *= b2
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - b2
            v += tmp
            np.multiply(v, 1.0 / c2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= step
            p -= tmp


def adam_step(net: MLP, grads: Sequence[np.ndarray], state: Adam) -> tuple[MLP, Adam]:
    state.step([net.flat], [net.flatten_grads(grads)])
    return net, state


def soft_update(target: MLP, source: MLP, tau: float = 1e-3) -> MLP:
    """target <- tau * source + (1 - tau) * target, in place."""
    target.flat *= 1.0 - tau
    target.flat += np.multiply(source.flat, tau)
    return target


def save_checkpoint(path: Union[str, Path], nets: dict[str, MLP],
                    optimizers: Optional[dict[str, Adam]] = None, meta: Optional[dict] = None):
    """Write networks (and optional Adam states) to a single ``.npz`` file."""
    optimizers = optimizers or {}
    arrays: dict[str, np.ndarray] = {}
    header = {"version": CHECKPOINT_VERSION, "nets": {}, "optimizers": {}, "meta": meta or {}}
    for name, net in nets.items():
        header["nets"][name] = net.spec.to_dict()
        for idx, p in enumerate(net.parameters()):
            arrays[f"net/{name}/{idx}"] = p
    for name, opt in optimizers.items():
        header["optimizers"][name] = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                                      "eps": opt.eps, "t": opt.t, "n": len(opt.m)}
        for idx, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"opt/{name}/m/{idx}"] = m
            arrays[f"opt/{name}/v/{idx}"] = v
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    path = Path(path)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.write_bytes(buf.getvalue())


def load_checkpoint(path: Union[str, Path]) -> tuple[dict[str, MLP], dict[str, Adam], dict]:
    with np.load(Path(path)) as data:
        header = json.loads(data["header"].tobytes().decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        nets = {}
        for name, spec_d in header["nets"].items():
            spec = MlpSpec(tuple(spec_d["layer_sizes"]), spec_d["hidden_activation"],
                           spec_d["output_activation"])
            n_arrays = 2 * (len(spec.layer_sizes) - 1)
            params = [data[f"net/{name}/{idx}"].copy() for idx in range(n_arrays)]
            nets[name] = MLP(spec, params[0::2], params[1::2])
        optimizers = {}
        for name, o in header["optimizers"].items():
            opt = Adam([], o["lr"], o["beta1"], o["beta2"], o["eps"])
            opt.t = o["t"]
            opt.m = [data[f"opt/{name}/m/{idx}"].copy() for idx in range(o["n"])]
            opt.v = [data[f"opt/{name}/v/{idx}"].copy() for idx in range(o["n"])]
            optimizers[name] = opt
    return nets, optimizers, header["meta"]
