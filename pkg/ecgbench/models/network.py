"""Sequential networks and the four beat-classifier families"""
import enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from ecgbench.core.config import settings
from ecgbench.core.exceptions import ShapeError
from ecgbench.core.tensor import RngStream
from ecgbench.models.layers import (
    ActivationLayer,
    Conv1DLayer,
    Conv2DLayer,
    DenseLayer,
    DropoutLayer,
    FlattenLayer,
    Layer,
    MaxPool1DLayer,
    MaxPool2DLayer,
    ReshapeLayer,
)
from ecgbench.models.rbm import Dbn, RbmLayer
from ecgbench.models.recurrent import BiLstm, BiLstmLayer, LstmCell, LstmLayer, RnnCell, SimpleRnnLayer


class ModelKind(str, enum.Enum):
    """Classifier families"""
    LSTM = "lstm"
    CNN = "cnn"
    RNN = "rnn"
    DBN = "dbn"


class MinMaxLayer(Layer):
    """Per-feature min-max scaling to [0, 1], fitted on training features and clipped"""

    name = "minmax"
    trainable = False

    def __init__(self, num_features: int):
        super().__init__()
        self.num_features = num_features
        self.scaler = MinMaxScaler(clip=True)
        self.scaler.fit(np.vstack([np.zeros(num_features), np.ones(num_features)]))

    def fit(self, features: np.ndarray) -> "MinMaxLayer":
        self.scaler = MinMaxScaler(clip=True).fit(features)
        return self

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.num_features:
            raise ShapeError(f"minmax expects [N, {self.num_features}], got {x.shape}")
        y = self.scaler.transform(x)
        self._cache = (x, y)
        return y

    def backward(self, grad):
        x, y = self._cache
        inside = (y > 0.0) & (y < 1.0)
        return grad * self.scaler.scale_ * inside


class Sequential:
    """Ordered stack of layers mapping [N, ...] inputs to [N, num_classes] probabilities"""

    def __init__(self, layers: List[Layer], name: str = "model", rng: Optional[RngStream] = None):
        self.layers = layers
        self.name = name
        self.dbn: Optional[Dbn] = None
        self.reseed(rng.seed if rng is not None else 0)

    def __repr__(self):
        return f"<Sequential {self.name}: {', '.join(layer.name for layer in self.layers)}>"

    def reseed(self, seed: int) -> None:
        """Give every dropout layer its own stream derived from ``seed``"""
        for index, layer in enumerate(self.layers):
            if isinstance(layer, DropoutLayer):
                layer.rng = RngStream(seed + index)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def predict_proba(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        chunks = [self.forward(x[k:k + batch_size]) for k in range(0, x.shape[0], batch_size)]
        return np.concatenate(chunks, axis=0)

    def parameters(self, trainable_only: bool = True) -> Dict[str, np.ndarray]:
        params = {}
        for index, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            for key, value in layer.parameters().items():
                params[f"{index}.{layer.name}.{key}"] = value
        return params

    def gradients(self) -> Dict[str, np.ndarray]:
        grads = {}
        for index, layer in enumerate(self.layers):
            if not layer.trainable:
                continue
            for key, value in layer.grads.items():
                grads[f"{index}.{layer.name}.{key}"] = value
        return grads

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {key: value.copy() for key, value in self.parameters(trainable_only=False).items()}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        params = self.parameters(trainable_only=False)
        for key, value in snapshot.items():
            np.copyto(params[key], value)

    def trace_shapes(self, input_shape: Sequence[int]) -> List[Tuple[Layer, Tuple[int, ...], Tuple[int, ...]]]:
        """(layer, per-sample input shape, per-sample output shape) for every layer"""
        x = np.zeros((1,) + tuple(input_shape))
        trace = []
        for layer in self.layers:
            y = layer.forward(x)
            trace.append((layer, x.shape[1:], y.shape[1:]))
            x = y
        return trace


def build_lstm(rng: RngStream, num_features: int = None, num_classes: int = None) -> Sequential:
    """Two stacked LSTMs (64 then 32 cells), dropout and a softmax dense layer"""
    num_features = num_features or settings.NUM_FEATURES
    num_classes = num_classes or settings.NUM_CLASSES
    return Sequential([
        ReshapeLayer((num_features, 1)),
        LstmLayer(LstmCell.initialize(64, 1, rng), return_sequences=True),
        LstmLayer(LstmCell.initialize(32, 64, rng)),
        DropoutLayer(0.2),
        DenseLayer.initialize(32, num_classes, rng, activation="softmax"),
    ], name=ModelKind.LSTM.value, rng=rng)


def build_cnn(rng: RngStream, num_features: int = None, num_classes: int = None) -> Sequential:
    """Conv1D -> ReLU -> MaxPool1D -> Dropout -> Flatten -> softmax Dense"""
    num_features = num_features or settings.NUM_FEATURES
    num_classes = num_classes or settings.NUM_CLASSES
    filters, kernel, pool = 16, 5, 2
    flat = filters * ((num_features - kernel + 1) // pool)
    return Sequential([
        ReshapeLayer((1, num_features)),
        Conv1DLayer.initialize(filters, 1, kernel, rng),
        ActivationLayer("relu"),
        MaxPool1DLayer(pool),
        DropoutLayer(0.2),
        FlattenLayer(),
        DenseLayer.initialize(flat, num_classes, rng, activation="softmax"),
    ], name=ModelKind.CNN.value, rng=rng)


def build_rnn(rng: RngStream, num_features: int = None, num_classes: int = None) -> Sequential:
    """Bidirectional LSTM feeding a vanilla RNN whose output head gives class scores"""
    num_features = num_features or settings.NUM_FEATURES
    num_classes = num_classes or settings.NUM_CLASSES
    bi = BiLstm(LstmCell.initialize(16, 1, rng), LstmCell.initialize(16, 1, rng))
    return Sequential([
        ReshapeLayer((num_features, 1)),
        BiLstmLayer(bi, return_sequences=True),
        SimpleRnnLayer(RnnCell.initialize(32, bi.output_size, num_classes, rng)),
        ActivationLayer("softmax"),
    ], name=ModelKind.RNN.value, rng=rng)


def build_dbn(rng: RngStream, num_features: int = None, num_classes: int = None,
              hidden_sizes: Sequence[int] = (64, 32)) -> Sequential:
    """
    Min-max input scaling, stacked RBM up-passes and a softmax head.

    Only the top RBM and the head are trainable by backprop; lower RBMs are
    fixed after layer-wise pretraining.
    """
    num_features = num_features or settings.NUM_FEATURES
    num_classes = num_classes or settings.NUM_CLASSES
    dbn = Dbn.initialize([num_features, *hidden_sizes], num_classes, rng)
    rbm_layers = [
        RbmLayer(rbm, trainable=index == len(dbn.layers) - 1)
        for index, rbm in enumerate(dbn.layers)
    ]
    model = Sequential(
        [MinMaxLayer(num_features), *rbm_layers, dbn.head],
        name=ModelKind.DBN.value,
        rng=rng,
    )
    model.dbn = dbn
    return model


def build_toy_cnn(rng: RngStream) -> Sequential:
    """2-D demo network on a 1x8x8 input used by the MAC analysis"""
    return Sequential([
        Conv2DLayer.initialize(2, 1, 3, rng),
        ActivationLayer("relu"),
        MaxPool2DLayer(2),
        FlattenLayer(),
        DenseLayer.initialize(2 * 3 * 3, 5, rng, activation="softmax"),
    ], name="toy-cnn", rng=rng)


BUILDERS = {
    ModelKind.LSTM: build_lstm,
    ModelKind.CNN: build_cnn,
    ModelKind.RNN: build_rnn,
    ModelKind.DBN: build_dbn,
}

# per-sample input shape seen by each network's first layer
INPUT_SHAPES = {
    "toy-cnn": (1, 8, 8),
}


def build_model(kind: str, seed: int) -> Sequential:
    """
    Build a freshly initialized network.

    Args:
        kind: "lstm", "cnn", "rnn", "dbn" or "toy-cnn"
        seed: initialization seed

    Returns:
        The network
    """
    rng = RngStream(seed)
    if kind == "toy-cnn":
        return build_toy_cnn(rng)
    try:
        builder = BUILDERS[ModelKind(kind)]
    except ValueError:
        raise ValueError(f"Unknown model spec: {kind}") from None
    return builder(rng)


def input_shape_for(kind: str) -> Tuple[int, ...]:
    return INPUT_SHAPES.get(kind, (settings.NUM_FEATURES,))
