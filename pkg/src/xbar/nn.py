"""Network definitions and training loops routed through a product backend.

Two architectures from the experiments: a 3-layer sigmoid MLP for Iris
classification (both weight matrices fit a 4x4 crossbar; the 3x4 output
layer is zero-padded), and a small CNN for handwritten digits whose nine
3x3 kernels form a 9x9 matrix so one crossbar pass convolves one image
patch. Matrix products go through the chosen backend; activations, pooling,
loss derivatives and weight-gradient outer products stay electronic. Error
signals propagate backward through the same programmed weights
(handle.backward), which is the crossbar's native W^T sigma product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import XbarError

# -- activations and losses ----------------------------------------------------


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def dsigmoid_from_output(a):
    return a * (1.0 - a)


def relu(z):
    return np.maximum(z, 0.0)


def softmax(z, axis=0):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((classes, labels.size))
    out[labels, np.arange(labels.size)] = 1.0
    return out


def mse_cost(outputs, targets):
    """0.5 * sum of squared errors, averaged over the batch."""
    d = outputs - targets
    return 0.5 * float((d * d).sum()) / outputs.shape[1]


def cross_entropy_cost(probs, targets):
    eps = 1e-12
    return -float((targets * np.log(probs + eps)).sum()) / probs.shape[1]


# -- optimizers ------------------------------------------------------------------


class Sgd:
    def __init__(self, learning_rate: float):
        self.lr = learning_rate

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class TrainingConfig:
    optimizer: str = "sgd"  # sgd | adam
    learning_rate: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 1
    loss: str = "mse"  # mse | cross_entropy
    backend: str = "ideal"  # ideal | photonic | lut
    seed: int = 0
    hidden: int = 4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return Sgd(self.learning_rate)
        return Adam(self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps)


def glorot_uniform(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    fan_out, fan_in = shape
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


# -- MLP -------------------------------------------------------------------------


@dataclass
class MlpModel:
    """Sigmoid MLP; weights[l] maps layer l activations to layer l+1 inputs.

    Matrix products run on the crossbar backend; biases ride with the
    electronic activation stage (zero-initialized).
    """

    weights: list
    biases: list

    @classmethod
    def init(cls, sizes=(4, 4, 3), seed: int = 0) -> "MlpModel":
        rng = np.random.default_rng(seed)
        ws = [
            glorot_uniform(rng, (sizes[l + 1], sizes[l]))
            for l in range(len(sizes) - 1)
        ]
        bs = [np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)]
        return cls(weights=ws, biases=bs)

    @property
    def sizes(self) -> tuple:
        return tuple([self.weights[0].shape[1]] + [w.shape[0] for w in self.weights])

    @property
    def params(self) -> list:
        return self.weights + self.biases


@dataclass
class BackpropTrace:
    activations: list  # per layer, including the input
    deltas: list  # per weight layer, at the pre-activation
    gradients: list  # per weight layer
    bias_gradients: list

    @property
    def all_gradients(self) -> list:
        return self.gradients + self.bias_gradients


class MlpRunner:
    """Holds the programmed handles for the current weights."""

    def __init__(self, model: MlpModel, backend):
        self.model = model
        self.backend = backend
        self.refresh()

    def refresh(self) -> None:
        self.handles = [self.backend.program(w) for w in self.model.weights]

    def forward(self, x):
        a = np.asarray(x, dtype=float)
        squeeze = a.ndim == 1
        if squeeze:
            a = a[:, None]
        for h, b in zip(self.handles, self.model.biases):
            a = sigmoid(h.forward(a) + b[:, None])
        return a[:, 0] if squeeze else a

    def forward_trace(self, x):
        a = np.asarray(x, dtype=float)
        acts = [a]
        for h, b in zip(self.handles, self.model.biases):
            a = sigmoid(h.forward(a) + b[:, None])
            acts.append(a)
        return acts

    def backprop(self, x, target) -> BackpropTrace:
        """MSE loss gradients; error signals travel through handle.backward."""
        xb = x if np.ndim(x) == 2 else np.asarray(x, dtype=float)[:, None]
        tb = target if np.ndim(target) == 2 else np.asarray(target, dtype=float)[:, None]
        acts = self.forward_trace(xb)
        batch = xb.shape[1]
        out = acts[-1]
        delta = (out - tb) * dsigmoid_from_output(out)
        deltas = [delta]
        for layer in range(len(self.handles) - 1, 0, -1):
            back = self.handles[layer].backward(delta)
            delta = back * dsigmoid_from_output(acts[layer])
            deltas.insert(0, delta)
        grads = [deltas[l] @ acts[l].T / batch for l in range(len(self.handles))]
        bias_grads = [deltas[l].sum(axis=1) / batch for l in range(len(self.handles))]
        return BackpropTrace(
            activations=acts, deltas=deltas, gradients=grads, bias_gradients=bias_grads
        )


def mlp_forward(model: MlpModel, x, backend):
    """One inference pass; programs the backend for the current weights."""
    return MlpRunner(model, backend).forward(x)


def onchip_backprop_step(model: MlpModel, sample, target, backend, config: TrainingConfig):
    """One optimizer step on one sample; returns the trace.

    The weight update is applied in place and the crossbar would be
    re-programmed on the next step (the runner refresh).
    """
    runner = MlpRunner(model, backend)
    trace = runner.backprop(sample, target)
    cost = mse_cost(trace.activations[-1], np.asarray(target, dtype=float).reshape(-1, 1))
    if not np.isfinite(cost):
        raise XbarError("training aborted: non-finite loss")
    config.make_optimizer().update(model.params, trace.all_gradients)
    return trace


@dataclass
class IrisTrainResult:
    cost_history: np.ndarray
    final_accuracy: float
    model: MlpModel


def mlp_accuracy(model: MlpModel, backend, features, labels) -> float:
    runner = MlpRunner(model, backend)
    out = runner.forward(features.T)
    return float((out.argmax(axis=0) == labels).mean())


def train_iris(config: TrainingConfig, train_x, train_y, test_x, test_y, backend) -> IrisTrainResult:
    """SGD training with on-chip-style backprop; MSE cost per the experiments."""
    sizes = (4, config.hidden, 3)
    model = MlpModel.init(sizes, seed=config.seed)
    runner = MlpRunner(model, backend)
    optimizer = config.make_optimizer()
    rng = np.random.default_rng(config.seed)
    targets = one_hot(train_y, 3)
    costs = np.zeros(config.epochs)
    n_train = train_x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        epoch_cost = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = train_x[idx].T
            tb = targets[:, idx]
            trace = runner.backprop(xb, tb)
            epoch_cost += mse_cost(trace.activations[-1], tb) * len(idx)
            if not np.isfinite(epoch_cost):
                raise XbarError("training aborted: non-finite loss")
            optimizer.update(model.params, trace.all_gradients)
            runner.refresh()
        costs[epoch] = epoch_cost / n_train
    acc = mlp_accuracy(model, backend, test_x, test_y)
    return IrisTrainResult(cost_history=costs, final_accuracy=acc, model=model)


# -- CNN -------------------------------------------------------------------------

KERNEL_COUNT = 9
KERNEL_SIZE = 3
CONV_OUT = 26  # 28 - 3 + 1, valid padding, stride 1
POOL_OUT = 13
FLAT_DIM = KERNEL_COUNT * POOL_OUT * POOL_OUT  # 1521
HIDDEN_DIM = 100
CLASSES = 10


@dataclass
class CnnModel:
    """Nine 3x3 kernels as a 9x9 matrix, then FC(100, relu) and FC(10, softmax).

    The kernel matrix is the photonic layer (pure matrix product); the
    fully-connected layers are electronic and carry bias terms.
    """

    kernel_matrix: np.ndarray  # (9, 9); row k is kernel k flattened
    w_hidden: np.ndarray  # (100, 1521)
    w_out: np.ndarray  # (10, 100)
    b_hidden: np.ndarray  # (100,)
    b_out: np.ndarray  # (10,)

    @classmethod
    def init(cls, seed: int = 0) -> "CnnModel":
        rng = np.random.default_rng(seed)
        return cls(
            kernel_matrix=glorot_uniform(rng, (KERNEL_COUNT, KERNEL_SIZE * KERNEL_SIZE)),
            w_hidden=glorot_uniform(rng, (HIDDEN_DIM, FLAT_DIM)),
            w_out=glorot_uniform(rng, (CLASSES, HIDDEN_DIM)),
            b_hidden=np.zeros(HIDDEN_DIM),
            b_out=np.zeros(CLASSES),
        )

    @property
    def params(self) -> list:
        return [self.kernel_matrix, self.w_hidden, self.w_out, self.b_hidden, self.b_out]


def im2col(images: np.ndarray) -> np.ndarray:
    """(B, 28, 28) -> (B, 676, 9): every 3x3 patch flattened row-wise."""
    from numpy.lib.stride_tricks import sliding_window_view

    if images.ndim == 2:
        images = images[None]
    windows = sliding_window_view(images, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))
    b = images.shape[0]
    return windows.reshape(b, CONV_OUT * CONV_OUT, KERNEL_SIZE * KERNEL_SIZE)


def im2col_convolve(image: np.ndarray, kernel_matrix: np.ndarray, backend) -> np.ndarray:
    """Convolve one 28x28 image with all nine kernels via one programmed matrix.

    Returns (9, 26, 26): channel k is the valid correlation of the image with
    kernel k (patch-dot products, as the crossbar computes them).
    """
    patches = im2col(image)[0]  # (676, 9)
    handle = backend.program(kernel_matrix)
    maps = handle.forward(patches.T)  # (9, 676)
    return maps.reshape(KERNEL_COUNT, CONV_OUT, CONV_OUT)


class CnnRunner:
    """Forward/backward passes with the convolution routed through a backend."""

    def __init__(self, model: CnnModel, backend):
        self.model = model
        self.backend = backend
        self.refresh()

    def refresh(self) -> None:
        self.conv_handle = self.backend.program(self.model.kernel_matrix)

    def forward(self, images: np.ndarray, trace: bool = False):
        b = images.shape[0]
        patches = im2col(images)  # (B, 676, 9)
        cols = patches.reshape(b * CONV_OUT * CONV_OUT, 9).T  # (9, 676B)
        conv = self.conv_handle.forward(cols)  # (9, 676B)
        conv = conv.reshape(KERNEL_COUNT, b, CONV_OUT * CONV_OUT).transpose(1, 0, 2)
        conv = conv.reshape(b, KERNEL_COUNT, CONV_OUT, CONV_OUT)
        act = relu(conv)
        # 2x2 max pooling with argmax bookkeeping for the backward pass.
        tiles = act.reshape(b, KERNEL_COUNT, POOL_OUT, 2, POOL_OUT, 2)
        tiles = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(
            b, KERNEL_COUNT, POOL_OUT, POOL_OUT, 4
        )
        pooled = tiles.max(axis=-1)
        flat = pooled.reshape(b, FLAT_DIM).T  # (1521, B)
        hidden = relu(self.model.w_hidden @ flat + self.model.b_hidden[:, None])
        logits = self.model.w_out @ hidden + self.model.b_out[:, None]
        probs = softmax(logits, axis=0)
        if not trace:
            return probs
        return probs, {
            "patches": patches,
            "conv": conv,
            "tiles_argmax": tiles.argmax(axis=-1),
            "flat": flat,
            "hidden": hidden,
        }

    def backprop(self, images: np.ndarray, labels: np.ndarray):
        """Cross-entropy gradients; conv error signals go through the crossbar."""
        b = images.shape[0]
        probs, cache = self.forward(images, trace=True)
        targets = one_hot(labels, CLASSES)
        cost = cross_entropy_cost(probs, targets)
        d_logits = (probs - targets) / b  # (10, B)
        g_out = d_logits @ cache["hidden"].T
        g_b_out = d_logits.sum(axis=1)
        d_hidden = (self.model.w_out.T @ d_logits) * (cache["hidden"] > 0)
        g_hidden = d_hidden @ cache["flat"].T
        g_b_hidden = d_hidden.sum(axis=1)
        d_flat = self.model.w_hidden.T @ d_hidden  # (1521, B)
        # Unpool: route each pooled gradient to its argmax position.
        d_pool = d_flat.T.reshape(b, KERNEL_COUNT, POOL_OUT, POOL_OUT)
        d_tiles = np.zeros((b, KERNEL_COUNT, POOL_OUT, POOL_OUT, 4))
        np.put_along_axis(
            d_tiles, cache["tiles_argmax"][..., None], d_pool[..., None], axis=-1
        )
        d_act = d_tiles.reshape(b, KERNEL_COUNT, POOL_OUT, POOL_OUT, 2, 2)
        d_act = d_act.transpose(0, 1, 2, 4, 3, 5).reshape(
            b, KERNEL_COUNT, CONV_OUT, CONV_OUT
        )
        d_conv = d_act * (cache["conv"] > 0)  # (B, 9, 26, 26)
        d_cols = d_conv.reshape(b, KERNEL_COUNT, CONV_OUT * CONV_OUT)
        d_cols = d_cols.transpose(1, 0, 2).reshape(KERNEL_COUNT, b * CONV_OUT * CONV_OUT)
        # Kernel gradient is the electronic outer product; the patch error
        # signal is the crossbar's backward (transpose) product.
        patches_mat = cache["patches"].reshape(b * CONV_OUT * CONV_OUT, 9)
        g_kernel = d_cols @ patches_mat
        d_patches = self.conv_handle.backward(d_cols)
        return cost, [g_kernel, g_hidden, g_out, g_b_hidden, g_b_out], d_patches

    def accuracy(self, images: np.ndarray, labels: np.ndarray, batch: int = 200) -> float:
        correct = 0
        for start in range(0, images.shape[0], batch):
            probs = self.forward(images[start : start + batch])
            correct += int((probs.argmax(axis=0) == labels[start : start + batch]).sum())
        return correct / images.shape[0]


@dataclass
class MnistTrainResult:
    accuracy_history: np.ndarray
    confusion: np.ndarray
    cost_history: np.ndarray
    model: CnnModel


def confusion_matrix(predicted, actual, classes: int = CLASSES) -> np.ndarray:
    m = np.zeros((classes, classes), dtype=int)
    for p, a in zip(predicted, actual):
        m[int(a), int(p)] += 1
    return m


def train_mnist(
    config: TrainingConfig,
    train_images,
    train_labels,
    test_images,
    test_labels,
    backend,
) -> MnistTrainResult:
    """ADAM training of the CNN with crossbar-routed convolutions."""
    model = CnnModel.init(seed=config.seed)
    runner = CnnRunner(model, backend)
    optimizer = config.make_optimizer()
    rng = np.random.default_rng(config.seed)
    n_train = train_images.shape[0]
    acc_history = np.zeros(config.epochs)
    cost_history = np.zeros(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        epoch_cost = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            cost, grads, _ = runner.backprop(train_images[idx], train_labels[idx])
            if not np.isfinite(cost):
                raise XbarError("training aborted: non-finite loss")
            epoch_cost += cost * len(idx)
            optimizer.update(model.params, grads)
            runner.refresh()
        cost_history[epoch] = epoch_cost / n_train
        acc_history[epoch] = runner.accuracy(test_images, test_labels)
    probs = []
    for start in range(0, test_images.shape[0], 200):
        probs.append(runner.forward(test_images[start : start + 200]).argmax(axis=0))
    predictions = np.concatenate(probs)
    confusion = confusion_matrix(predictions, test_labels)
    return MnistTrainResult(
        accuracy_history=acc_history,
        confusion=confusion,
        cost_history=cost_history,
        model=model,
    )
