"""Evaluation metrics and model complexity"""
import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from ecgbench.models.beats import NUM_CLASSES, Dataset
from ecgbench.models.network import Sequential
from ecgbench.schemas.metrics import MetricsReport


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int = NUM_CLASSES,
                             training_time_s: float = 0.0, param_count: int = 0) -> MetricsReport:
    """
    Confusion matrix plus per-class and macro precision/recall/F1

    Classes with no support and no predictions score 0 and still count in the
    unweighted macro mean.
    """
    labels = list(range(num_classes))
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    return MetricsReport(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        per_class_precision=[float(p) for p in precision],
        per_class_recall=[float(r) for r in recall],
        per_class_f1=[float(f) for f in f1],
        confusion=confusion.astype(int).tolist(),
        training_time_s=training_time_s,
        param_count=param_count,
    )


def evaluate(model: Sequential, ds: Dataset, training_time_s: float = 0.0) -> MetricsReport:
    """Argmax predictions of ``model`` on ``ds`` scored against the labels"""
    probs = model.predict_proba(ds.features)
    predictions = np.argmax(probs, axis=1)
    return metrics_from_predictions(
        ds.labels,
        predictions,
        num_classes=probs.shape[1],
        training_time_s=training_time_s,
        param_count=param_count(model),
    )


def param_count(model: Sequential) -> int:
    """Scalar count over every trainable tensor"""
    return int(sum(p.size for p in model.parameters(trainable_only=True).values()))
