"""Depth-map evaluation: mean relative error, bad pixel ratio, mean absolute error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DenseDepth
from .exceptions import InvalidInputError, NoOverlapError


@dataclass(frozen=True)
class EvalReport:
    mre: float          # mean relative error, fraction
    bpr: float          # bad pixel ratio at d_th, fraction
    mae: float          # mean absolute error, meters
    n_evaluated: int
    d_th: float

    def csv_line(self):
        return f"{self.mre:.6f},{self.bpr:.6f},{self.mae:.6f},{self.n_evaluated},{self.d_th}"

    def __str__(self):
        return (f"MRE {100 * self.mre:.2f}%  BPR({self.d_th:g} m) {100 * self.bpr:.2f}%  "
                f"MAE {self.mae:.3f} m  (N={self.n_evaluated})")

    CSV_HEADER = "mre,bpr,mae,n_evaluated,d_th"


def evaluate(pred: DenseDepth, gt: DenseDepth, d_th: float = 3.0) -> EvalReport:
    """Compare a predicted depth map against ground truth.

    Only pixels valid in both maps count; a bad pixel has absolute error
    strictly greater than ``d_th``.
    """
    if pred.grid.shape != gt.grid.shape:
        raise InvalidInputError("prediction and ground truth dimensions differ")
    valid = pred.valid_mask & gt.valid_mask & (gt.grid > 0)
    n = int(valid.sum())
    if n == 0:
        raise NoOverlapError("no pixels valid in both maps")
    err = np.abs(pred.grid[valid] - gt.grid[valid])
    return EvalReport(
        mre=float(np.mean(err / gt.grid[valid])),
        bpr=float(np.mean(err > d_th)),
        mae=float(np.mean(err)),
        n_evaluated=n,
        d_th=float(d_th),
    )
