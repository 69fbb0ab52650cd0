"""Scikit-learn style estimators wrapping the training core.

Both estimators follow the usual contract: constructor arguments are
stored verbatim, all work happens in fit, fitted state lives in
attributes with a trailing underscore, and transform returns the smooth
hidden features.  That makes them usable inside pipelines and grid
searches, and gives the linear-probe evaluation below something frozen
to stand on.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.linear_model import LogisticRegression
from sklearn.utils.validation import check_array, check_is_fitted

from dataclasses import replace

from .activations import ActivationSpec
from .params import init_params, visible_bias_from_means
from .sampling import hidden_mean
from .stack import (
    TrainConfig,
    build_dbn,
    forward_means,
    train,
    train_layer,
    warm_start_visible,
)
from .validation import check_value_range


def _train_config(self) -> TrainConfig:
    return TrainConfig(
        learning_rate=self.learning_rate,
        batch_size=self.batch_size,
        n_epochs=self.n_iter,
    )


class MultinaryRBM(BaseEstimator, TransformerMixin):
    """A single RBM layer with multinary units as a transformer.

    Parameters
    ----------
    n_components : int
        Number of hidden units.
    n_levels : int
        Levels per hidden unit; 1 gives plain binary units.
    visible_levels : int
        Levels the input data takes; features must lie in
        [0, visible_levels].
    k : float
        Activation steepness shared by all units.
    learning_rate, batch_size, n_iter : float, int, int
        Adam step size, minibatch size, and training epochs.
    random_state : int
        Seed for weight init, shuffling, and reconstruction noise.
    """

    def __init__(
        self,
        n_components: int = 64,
        n_levels: int = 1,
        visible_levels: int = 1,
        k: float = 1.0,
        learning_rate: float = 0.03,
        batch_size: int = 128,
        n_iter: int = 20,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.n_levels = n_levels
        self.visible_levels = visible_levels
        self.k = k
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        check_value_range(X, self.visible_levels, "X")
        self.n_features_in_ = X.shape[1]
        layer = init_params(
            X.shape[1],
            self.n_components,
            visible_spec=ActivationSpec(self.visible_levels, self.k),
            hidden_spec=ActivationSpec(self.n_levels, self.k),
            seed=self.random_state,
        )
        layer = replace(
            layer,
            visible_bias=visible_bias_from_means(
                layer.visible_spec, X.mean(axis=0)
            ),
        )
        layer, reports = train_layer(
            layer, X, _train_config(self), seed=self.random_state
        )
        self.rbm_ = layer
        self.training_reports_ = reports
        self.components_ = layer.weights.T
        self.intercept_visible_ = layer.visible_bias
        self.intercept_hidden_ = layer.hidden_bias
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "rbm_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, fit saw {self.n_features_in_}"
            )
        return hidden_mean(self.rbm_, X)


class DeepBeliefNetwork(BaseEstimator, TransformerMixin):
    """A greedily trained stack of RBM layers as a transformer.

    architecture uses the "dense:H" / "conv:CxKsS" grammar; input_shape
    must be (channels, height, width) when the first layer is
    convolutional and defaults to flat features otherwise.  transform
    returns the top layer's smooth activity flattened to rows.
    """

    def __init__(
        self,
        architecture: str = "dense:64",
        n_levels: int = 1,
        visible_levels: int = 1,
        k: float = 1.0,
        learning_rate: float = 0.03,
        batch_size: int = 128,
        n_iter: int = 20,
        random_state: int = 0,
        input_shape: tuple | None = None,
    ):
        self.architecture = architecture
        self.n_levels = n_levels
        self.visible_levels = visible_levels
        self.k = k
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_iter = n_iter
        self.random_state = random_state
        self.input_shape = input_shape

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        check_value_range(X, self.visible_levels, "X")
        self.n_features_in_ = X.shape[1]
        shape = self.input_shape if self.input_shape else (X.shape[1],)
        if int(np.prod(shape)) != X.shape[1]:
            raise ValueError(
                f"input_shape {shape} does not hold {X.shape[1]} features"
            )
        model = build_dbn(
            self.architecture,
            shape,
            data_spec=ActivationSpec(self.visible_levels, self.k),
            unit_spec=ActivationSpec(self.n_levels, self.k),
            seed=self.random_state,
        )
        data = X.reshape(X.shape[0], *shape) if len(shape) == 3 else X
        model = warm_start_visible(model, data)
        self.model_, self.training_reports_ = train(
            model, data, _train_config(self), seed=self.random_state
        )
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, fit saw {self.n_features_in_}"
            )
        shape = self.input_shape if self.input_shape else (X.shape[1],)
        data = X.reshape(X.shape[0], *shape) if len(shape) == 3 else X
        out = forward_means(self.model_, data)
        return out.reshape(out.shape[0], -1)


def linear_probe_accuracy(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    max_iter: int = 1000,
) -> float:
    """Accuracy of a logistic regression trained on frozen features.

    The standard probe for representation quality: the features are not
    fine-tuned, only the linear readout is fit.
    """
    clf = LogisticRegression(max_iter=max_iter)
    clf.fit(train_features, train_labels)
    return float(clf.score(test_features, test_labels))
