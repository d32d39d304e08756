import logging
import os
from typing import Any, Dict, List, Sequence

import pandas as pd
from pydantic import BaseModel

from core.tool.tool_class import Tool
from tools.ingest.parse_geometry import ParseGeometryTool
from tools.ingest.parse_loops import ParseLoopsTool
from tools.ingest.parse_probes import ParseProbesTool

logger = logging.getLogger(__name__)

RECORD_FLOAT_FORMAT = "%.10g"


def records_frame(records: Sequence[BaseModel], columns: List[str]) -> pd.DataFrame:
    rows = [record.model_dump(exclude={"line"}) for record in records]
    frame = pd.DataFrame(rows, columns=columns)
    if "healthy" in frame.columns:
        frame["healthy"] = frame["healthy"].map({True: "true", False: "false"})
    if "link_id" in frame.columns:
        # pre-matched probe links are optional, keep them integer with blanks
        frame["link_id"] = frame["link_id"].astype("Int64")
    return frame


class ExportMeasurementsTool(Tool):
    """Writes synthetic loop, probe and geometry records in the same layout the ingest tools read."""

    FILES = {
        "loops": ("loops.csv", ParseLoopsTool),
        "probes": ("probes.csv", ParseProbesTool),
        "geometry": ("geometry.csv", ParseGeometryTool),
    }

    def __init__(self):
        super().__init__(name="export_measurements", description="Export records as ingestible CSV files")

    def _validate_custom_schema(self, input_data: Any):
        if not isinstance(input_data, dict) or "out_dir" not in input_data:
            return "Input data must be a dictionary with an 'out_dir'"
        unknown = set(input_data) - set(self.FILES) - {"out_dir"}
        if unknown:
            return f"Unknown record sets: {sorted(unknown)}"
        return True

    def run(self, input_data: Any) -> Dict[str, Any]:
        """
        Args:
            input_data: {"out_dir": str, "loops"|"probes"|"geometry": list of records}
        """
        validation_result = self.validate_input_schema(input_data)
        if validation_result != True:
            return {"success": False, "server_error": False, "error": f"Input validation failed: {validation_result}"}
        out_dir = input_data["out_dir"]
        written = []
        try:
            os.makedirs(out_dir, exist_ok=True)
            for key, (filename, tool_class) in self.FILES.items():
                if key not in input_data:
                    continue
                columns = list(tool_class().input_schema.keys())
                path = os.path.join(out_dir, filename)
                records_frame(input_data[key], columns).to_csv(
                    path, index=False, na_rep="", float_format=RECORD_FLOAT_FORMAT, lineterminator="\n",
                )
                written.append(path)
                logger.info(f"Wrote {len(input_data[key])} {key} records to {path}")
        except OSError as e:
            logger.error(f"Failed to export records to {out_dir}: {e}", exc_info=True)
            return {"success": False, "server_error": True, "error": f"Failed to export records: {str(e)}"}
        return {"success": True, "server_error": False, "response": written}
