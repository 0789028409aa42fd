"""Scikit-learn style facade over the discovery pipeline.

DadoDiscovery is an unsupervised detector: ``fit`` only validates
parameters (there is nothing to learn), ``predict`` maps image records to
detection sets. Parameters mirror Config one-to-one so ``get_params`` /
``set_params`` / ``clone`` compose with sklearn tooling.
"""

from __future__ import annotations

from dataclasses import fields
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator

from .boxes import DetectionSet
from .config import Config
from .map_store import ImageRecord
from .pipeline import discover_record


class DadoDiscovery(BaseEstimator):
    """Depth-attention object discovery as an estimator.

    Parameters mirror :class:`dado.config.Config`; see that class for
    domains and defaults.
    """

    def __init__(
        self,
        bins: int = 64,
        overlap_frac: float = 0.2,
        min_prominence_frac: float = 0.05,
        n_discard: int = 1,
        cc_threshold: float = 0.5,
        combine_mode: str = "product",
        kernel: int = 3,
        min_area_frac: float = 0.001,
        nms_sigma: float = 0.5,
        score_floor: float = 0.001,
        lambda_consistency: float = 10.0,
        tau_on_support: bool = False,
        iou_thresh: float = 0.5,
    ):
        self.bins = bins
        self.overlap_frac = overlap_frac
        self.min_prominence_frac = min_prominence_frac
        self.n_discard = n_discard
        self.cc_threshold = cc_threshold
        self.combine_mode = combine_mode
        self.kernel = kernel
        self.min_area_frac = min_area_frac
        self.nms_sigma = nms_sigma
        self.score_floor = score_floor
        self.lambda_consistency = lambda_consistency
        self.tau_on_support = tau_on_support
        self.iou_thresh = iou_thresh

    @classmethod
    def from_config(cls, config: Config) -> "DadoDiscovery":
        return cls(**{f.name: getattr(config, f.name) for f in fields(Config)})

    def config(self) -> Config:
        """Validated Config snapshot of the current parameters."""
        return Config(**{f.name: getattr(self, f.name) for f in fields(Config)})

    def fit(self, X: Iterable[ImageRecord] | None = None, y=None) -> "DadoDiscovery":
        """Stateless; validates the parameter set and returns self."""
        self.config()
        return self

    def predict(self, X: Sequence[ImageRecord]) -> list[DetectionSet]:
        cfg = self.config()
        return [discover_record(record, cfg) for record in X]

    def fit_predict(self, X: Sequence[ImageRecord], y=None) -> list[DetectionSet]:
        return self.fit(X).predict(X)
