from typing import List

from core.data.records import LoopRecord
from tools.ingest.csv_record_tool import CsvRecordTool


class ParseLoopsTool(CsvRecordTool):
    record_model = LoopRecord

    def __init__(self):
        input_schema = {
            "timestamp": {"type": "number", "required": True, "description": "Seconds since run start", "example": 300},
            "detector_id": {"type": "string", "required": True, "description": "Detector identifier", "example": "loop-12"},
            "link_id": {"type": "integer", "required": True, "description": "Corridor link the detector sits on", "example": 12},
            "density": {"type": "number", "required": False, "description": "Density in veh/m", "example": 0.041},
            "flow": {"type": "number", "required": False, "description": "Flow in veh/s (entry links: boundary demand)", "example": ""},
            "speed": {"type": "number", "required": False, "description": "Speed in m/s, with flow when density is absent", "example": ""},
            "healthy": {"type": "boolean", "required": False, "description": "false marks a malfunctioning detector (default true)", "example": "true"},
        }
        super().__init__(name="loops", description="Loop-detector reports", input_schema=input_schema)


def parse_loops(path: str) -> List[LoopRecord]:
    """Loop records in timestamp order; unhealthy reports are kept and flagged."""
    return ParseLoopsTool().load(path)
