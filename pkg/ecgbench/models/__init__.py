"""Domain models: beat datasets, layers and networks"""
from ecgbench.models.beats import BeatRecord, Dataset
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
from ecgbench.models.recurrent import BiLstm, BiLstmLayer, LstmCell, LstmLayer, LstmState, RnnCell, SimpleRnnLayer
from ecgbench.models.rbm import Dbn, Rbm, RbmLayer
from ecgbench.models.network import ModelKind, Sequential, build_model

__all__ = [
    "BeatRecord",
    "Dataset",
    "ActivationLayer",
    "Conv1DLayer",
    "Conv2DLayer",
    "DenseLayer",
    "DropoutLayer",
    "FlattenLayer",
    "Layer",
    "MaxPool1DLayer",
    "MaxPool2DLayer",
    "ReshapeLayer",
    "BiLstm",
    "BiLstmLayer",
    "LstmCell",
    "LstmLayer",
    "LstmState",
    "RnnCell",
    "SimpleRnnLayer",
    "Dbn",
    "Rbm",
    "RbmLayer",
    "ModelKind",
    "Sequential",
    "build_model",
]
