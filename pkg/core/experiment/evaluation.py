import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from core.errors import EvaluationError
from core.fusion.measurement import MeasurementBatch

logger = logging.getLogger(__name__)

MAPE_FLOOR = 1e-4


@dataclass(frozen=True)
class MapeResult:
    """Mean absolute percentage errors in percent; NaN when a subset has no evaluable cell."""

    overall: float
    congested: float
    freeflow: float
    evaluated_cells: int
    congested_cells: int
    freeflow_cells: int
    excluded_cells: int

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.overall, self.congested, self.freeflow


def _mean_percent(errors: np.ndarray) -> float:
    return float(100.0 * errors.mean()) if errors.size else float("nan")


def compute_mape(estimate, reference, rho_c, floor: float = MAPE_FLOOR) -> MapeResult:
    """
    MAPE of estimate against reference over every (time, link) cell, split by congestion.

    Grids are (timesteps, links); rho_c holds one critical density per link column. A cell is
    congested when its reference exceeds that link's rho_c. Cells whose reference is below floor
    are excluded and counted.

    Raises:
        EvaluationError: no cell has a reference at or above the floor
    """
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimate.shape != reference.shape:
        raise ValueError(f"estimate grid {estimate.shape} and reference grid {reference.shape} differ")
    rho_c = np.broadcast_to(np.asarray(rho_c, dtype=float), reference.shape)

    evaluable = np.isfinite(reference) & (reference >= floor)
    if not evaluable.any():
        raise EvaluationError(f"no reference cell reaches the MAPE floor {floor:g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        errors = np.abs(estimate - reference) / reference
    congested = evaluable & (reference > rho_c)
    freeflow = evaluable & ~congested

    result = MapeResult(
        overall=_mean_percent(errors[evaluable]),
        congested=_mean_percent(errors[congested]),
        freeflow=_mean_percent(errors[freeflow]),
        evaluated_cells=int(evaluable.sum()),
        congested_cells=int(congested.sum()),
        freeflow_cells=int(freeflow.sum()),
        excluded_cells=int(reference.size - evaluable.sum()),
    )
    logger.debug(f"MAPE over {result.evaluated_cells} cells ({result.excluded_cells} below floor): {result.overall:.3f}%")
    return result


def detector_mape(estimate_series, reference_series, floor: float = MAPE_FLOOR) -> float:
    """MAPE (percent) of one detector's time series; NaN when no sample reaches the floor."""
    estimate_series = np.asarray(estimate_series, dtype=float)
    reference_series = np.asarray(reference_series, dtype=float)
    keep = np.isfinite(reference_series) & (reference_series >= floor)
    if not keep.any():
        return float("nan")
    return _mean_percent(np.abs(estimate_series[keep] - reference_series[keep]) / reference_series[keep])


def held_out_mape_from_truth(estimate: np.ndarray, truth: np.ndarray, held_out: Iterable[int], floor: float = MAPE_FLOOR) -> Dict[int, float]:
    """Per held-out detector MAPE against the truth density of its link, over steps 1..T."""
    return {int(link): detector_mape(estimate[1:, link], truth[1:, link], floor) for link in held_out}


def held_out_mape_from_batches(
    estimate: np.ndarray,
    batches: Mapping[int, MeasurementBatch],
    held_out: Iterable[int],
    floor: float = MAPE_FLOOR,
) -> Dict[int, float]:
    """
    Per held-out detector MAPE against the detector's own reports.

    batches are keyed by the filter step they refer to; the estimate at that step is compared.
    """
    held_out = [int(link) for link in held_out]
    series: Dict[int, Tuple[list, list]] = {link: ([], []) for link in held_out}
    for step, batch in sorted(batches.items()):
        if step >= estimate.shape[0]:
            continue
        for m in batch:
            if m.link in series:
                series[m.link][0].append(estimate[step, m.link])
                series[m.link][1].append(m.value)
    return {link: detector_mape(est, ref, floor) for link, (est, ref) in series.items()}


def summarize_detectors(per_detector: Mapping[int, float]) -> Tuple[float, float]:
    """Mean and population standard deviation over detectors with a finite MAPE."""
    values = np.asarray([v for v in per_detector.values() if np.isfinite(v)], dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    return float(values.mean()), float(values.std())
