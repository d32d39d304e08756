import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.experiment.runner import RunReport
from core.experiment.scenario_config import Mode
from core.network.network_class import Network
from core.tool.tool_class import Tool

logger = logging.getLogger(__name__)

GRID_FLOAT_FORMAT = "%.10g"
# full precision so exported MAPE values read back exactly
REPORT_FLOAT_FORMAT = "%.17g"


def report_label(report: RunReport) -> str:
    if report.mode in (Mode.PROBES_ONLY, Mode.FUSED):
        return f"{report.mode.value}_pr{int(round(report.penetration_rate * 100)):02d}"
    return report.mode.value


def grid_frame(grid: np.ndarray, net: Network) -> pd.DataFrame:
    """Mainline links as rows (upstream to downstream), timesteps as columns labelled in seconds."""
    main = net.mainline_ids
    columns = [f"{k * net.dt:g}" for k in range(grid.shape[0])]
    frame = pd.DataFrame(grid[:, main].T, columns=columns)
    frame.insert(0, "link_id", main)
    return frame


def report_rows(reports: Sequence[RunReport]) -> List[Dict[str, Any]]:
    rows = []
    for report in reports:
        mean, std = report.held_out_summary
        mape = report.mape
        rows.append({
            "label": report_label(report),
            "mode": report.mode.value,
            "penetration_rate": report.penetration_rate,
            "overall_mape": mape.overall if mape else np.nan,
            "congested_mape": mape.congested if mape else np.nan,
            "freeflow_mape": mape.freeflow if mape else np.nan,
            "evaluated_cells": mape.evaluated_cells if mape else 0,
            "excluded_cells": mape.excluded_cells if mape else 0,
            "held_out_mean": mean,
            "held_out_std": std,
            "outliers_dropped": report.diagnostics.get("dropped_measurements", 0),
            "min_ess": report.diagnostics.get("min_ess", np.nan),
        })
    return rows


def write_pgm(path: str, grid: np.ndarray, net: Network) -> None:
    """Binary graymap, one row per mainline link and one column per timestep; black is jam density."""
    main = net.mainline_ids
    scaled = np.clip(grid[:, main] / net.rho_j[main], 0.0, 1.0).T
    pixels = np.round(255.0 * (1.0 - scaled)).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def write_meta(path: str, reports: Sequence[RunReport], metadata: Dict[str, Any]) -> None:
    lines = [f"{key}: {metadata[key]}" for key in sorted(metadata)]
    for report in reports:
        label = report_label(report)
        if report.mape is not None:
            overall, congested, freeflow = report.mape.as_tuple()
            lines.append(f"mape[{label}]: overall={overall!r} congested={congested!r} freeflow={freeflow!r}")
        for key in sorted(report.diagnostics):
            lines.append(f"diagnostics[{label}].{key}: {report.diagnostics[key]!r}")
        for link in sorted(report.held_out):
            lines.append(f"held_out[{label}].link_{link}: {report.held_out[link]!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_xlsx(path: str, frame: pd.DataFrame) -> None:
    from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

    with pd.ExcelWriter(path, engine='openpyxl') as writer:
        frame.to_excel(writer, sheet_name='MAPE', index=False)
        worksheet = writer.sheets['MAPE']
        header_font = Font(bold=True, color="FFFFFF", size=12)
        header_fill = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
        thin_border = Border(left=Side(style='thin'), right=Side(style='thin'), top=Side(style='thin'), bottom=Side(style='thin'))
        for cell in worksheet[1]:
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal="center", vertical="center", wrap_text=True)
            cell.border = thin_border
        for column in worksheet.columns:
            width = max(len(str(cell.value)) for cell in column if cell.value is not None)
            worksheet.column_dimensions[column[0].column_letter].width = max(10, min(width + 3, 40))


class ExportGridsTool(Tool):
    """
    Writes a run's grids and MAPE table into an output directory.

    Layout: truth.csv, estimate_<label>.csv per report, report.csv, meta.txt, and optionally
    <name>.pgm renderings and report.xlsx. Everything but the xlsx is byte-identical for
    identical reports.
    """

    def __init__(self):
        super().__init__(name="export_grids", description="Export density grids and the MAPE table")

    def _validate_custom_schema(self, input_data: Any):
        if not isinstance(input_data, dict):
            return "Input data must be a dictionary"
        for key in ("out_dir", "net"):
            if key not in input_data:
                return f"Input data is missing required field: {key}"
        reports = input_data.get("reports") or []
        truth = input_data.get("truth")
        if not reports and truth is None:
            return "Input data needs a truth grid or at least one report"
        shapes = {r.estimate.shape for r in reports}
        if truth is not None:
            shapes.add(truth.shape)
        if len(shapes) != 1:
            return f"Grids do not share dimensions: {sorted(shapes)}"
        return True

    def run(self, input_data: Any) -> Dict[str, Any]:
        """
        Args:
            input_data: {"out_dir", "net", "reports", optional "truth", "metadata", "pgm", "xlsx"}
        """
        validation_result = self.validate_input_schema(input_data)
        if validation_result != True:
            return {"success": False, "server_error": False, "error": f"Input validation failed: {validation_result}"}
        try:
            return {"success": True, "server_error": False, "response": self.export(**input_data)}
        except OSError as e:
            logger.error(f"Export to {input_data['out_dir']} failed: {e}", exc_info=True)
            return {"success": False, "server_error": True, "error": f"Failed to export grids: {str(e)}"}

    def export(
        self,
        out_dir: str,
        net: Network,
        reports: Sequence[RunReport] = (),
        truth: Optional[np.ndarray] = None,
        metadata: Optional[Dict[str, Any]] = None,
        pgm: bool = False,
        xlsx: bool = False,
    ) -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        written: List[str] = []

        def target(name: str) -> str:
            path = os.path.join(out_dir, name)
            written.append(path)
            return path

        if truth is not None:
            grid_frame(truth, net).to_csv(target("truth.csv"), index=False, float_format=GRID_FLOAT_FORMAT, lineterminator="\n")
            if pgm:
                write_pgm(target("truth.pgm"), truth, net)
        for report in reports:
            label = report_label(report)
            grid_frame(report.estimate, net).to_csv(
                target(f"estimate_{label}.csv"), index=False, float_format=GRID_FLOAT_FORMAT, lineterminator="\n",
            )
            if pgm:
                write_pgm(target(f"estimate_{label}.pgm"), report.estimate, net)

        base_metadata = reports[0].metadata if reports else {}
        write_meta(target("meta.txt"), reports, {**base_metadata, **(metadata or {})})
        if reports:
            table = pd.DataFrame(report_rows(reports))
            table.to_csv(target("report.csv"), index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")
            if xlsx:
                write_xlsx(target("report.xlsx"), table)
        logger.info(f"Exported {len(written)} files to {out_dir}")
        return written
