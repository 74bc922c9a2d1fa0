"""Out-of-sample prediction on top of a finished transduction.

The labeled and transductively labeled points become fixed anchors; a new
point is labeled by a kernel-weighted vote over them, with the same Gibbs
kernel scale the last transport round used.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .propagation import PropagationTrace

_MAGIC = "# otprop induction model"


@dataclass(frozen=True)
class InductionModel:
    """Anchor points with labels and a kernel scale in squared-distance units.

    ``center``/``scale`` describe how raw inputs map into anchor space
    (``(x - center) / scale``); both ``None`` means anchors are raw.
    """

    anchors: np.ndarray
    labels: np.ndarray
    kernel_scale: float
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=np.float64))
        labels = np.asarray(self.labels)
        if anchors.shape[0] == 0:
            raise ValueError("model has no anchors")
        if labels.shape != (anchors.shape[0],):
            raise ValueError("every anchor needs exactly one label")
        if not self.kernel_scale > 0:
            raise ValueError("kernel_scale must be positive")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "labels", labels)

    @property
    def class_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def n_features(self) -> int:
        return self.anchors.shape[1]

    def transform(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.n_features:
            raise ValueError(f"points have d={points.shape[1]}, model expects d={self.n_features}")
        if self.center is not None:
            points = points - self.center
        if self.scale is not None:
            points = points / self.scale
        return points

    def predict(self, points) -> np.ndarray:
        """Labels for raw (untransformed) points, one per row."""
        return np.array([induce_label(x, self) for x in self.transform(points)])

    @classmethod
    def from_transduction(cls, X_L, Y_L, X_U, Y_U, trace: PropagationTrace, **kwargs) -> "InductionModel":
        scale = trace.final_cost_max if trace.final_cost_max > 0 else 1.0
        return cls(
            anchors=np.vstack([np.asarray(X_L, dtype=np.float64), np.asarray(X_U, dtype=np.float64)]),
            labels=np.concatenate([np.asarray(Y_L), np.asarray(Y_U)]),
            kernel_scale=trace.epsilon * scale,
            **kwargs,
        )


def _sq_dists(x_new, model: InductionModel) -> np.ndarray:
    x_new = np.asarray(x_new, dtype=np.float64).ravel()
    if x_new.size != model.n_features:
        raise ValueError(f"point has d={x_new.size}, model expects d={model.n_features}")
    diff = model.anchors - x_new
    return np.einsum("ij,ij->i", diff, diff)


def induction_weights(x_new, model: InductionModel) -> np.ndarray:
    """Gibbs kernel weight ``exp(-|x_i - x_new|^2 / kernel_scale)`` of every anchor."""
    return np.exp(-_sq_dists(x_new, model) / model.kernel_scale)


def _shifted_weights(x_new, model: InductionModel) -> np.ndarray:
    # Votes are invariant to a common factor; shifting keeps the nearest
    # anchor at weight 1 so far-away points never underflow to all zeros.
    d = _sq_dists(x_new, model)
    return np.exp(-(d - d.min()) / model.kernel_scale)


def _is_signed_binary(classes) -> bool:
    try:
        return set(np.asarray(classes).tolist()) == {-1, 1}
    except TypeError:
        return False


def class_votes(x_new, model: InductionModel, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-class sums of anchor weights, returned as ``(class_ids, sums)``."""
    w = _shifted_weights(x_new, model) if weights is None else np.asarray(weights, dtype=np.float64)
    classes, idx = np.unique(model.labels, return_inverse=True)
    return classes, np.bincount(idx, weights=w, minlength=classes.size)


def induce_label(x_new, model: InductionModel, weights=None):
    """Weighted majority vote of the anchors.

    Ties go to the lowest class, except for {-1, +1} labels where they go to
    +1 so the vote always agrees with the sign of ``induce_value``.
    """
    classes, votes = class_votes(x_new, model, weights)
    best = np.flatnonzero(votes == votes.max())
    if best.size > 1 and _is_signed_binary(classes):
        return classes[best[-1]].item()
    return classes[best[0]].item()


def induce_value(x_new, model: InductionModel, weights=None) -> tuple[float, int]:
    """Weighted average of +/-1 anchor labels and its sign (0 counts as +1)."""
    if not set(np.unique(model.labels).tolist()) <= {-1, 1}:
        raise ValueError("induce_value needs labels in {-1, +1}")
    w = _shifted_weights(x_new, model) if weights is None else np.asarray(weights, dtype=np.float64)
    pos = float(w[model.labels == 1].sum())
    neg = float(w[model.labels == -1].sum())
    # Same class sums the vote uses, so sign and vote cannot disagree by rounding.
    value = (pos - neg) / (pos + neg)
    return value, (1 if value >= 0 else -1)


def _label_from_text(values: list[str]) -> np.ndarray:
    try:
        return np.array([int(v) for v in values])
    except ValueError:
        return np.array(values)


def save_model(model: InductionModel, path) -> None:
    """Write the anchor table as CSV with the kernel scale (and input transform) in header comments."""
    with open(path, "w", newline="") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"# kernel_scale={model.kernel_scale!r}\n")
        if model.center is not None:
            fh.write("# center=" + ",".join(repr(float(v)) for v in model.center) + "\n")
        if model.scale is not None:
            fh.write("# scale=" + ",".join(repr(float(v)) for v in model.scale) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"x{k}" for k in range(model.n_features)])
        for lab, row in zip(model.labels.tolist(), model.anchors):
            writer.writerow([lab] + [repr(float(v)) for v in row])


def load_model(path) -> InductionModel:
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    with open(Path(path), newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != _MAGIC:
            raise ValueError(f"{path}: not an induction model file")
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            else:
                lines.append(line)
        reader = csv.reader(lines)
        next(reader)
        rows = [r for r in reader if r]
    if "kernel_scale" not in meta:
        raise ValueError(f"{path}: missing kernel_scale")
    vec = lambda key: np.array([float(v) for v in meta[key].split(",")]) if key in meta else None  # noqa: E731
    return InductionModel(
        anchors=np.array([[float(v) for v in r[1:]] for r in rows]),
        labels=_label_from_text([r[0] for r in rows]),
        kernel_scale=float(meta["kernel_scale"]),
        center=vec("center"),
        scale=vec("scale"),
    )
