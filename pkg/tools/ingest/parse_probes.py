from typing import List

from core.data.records import ProbeRecord
from tools.ingest.csv_record_tool import CsvRecordTool


class ParseProbesTool(CsvRecordTool):
    record_model = ProbeRecord

    def __init__(self):
        input_schema = {
            "timestamp": {"type": "number", "required": True, "description": "Seconds since run start", "example": 310},
            "device_id": {"type": "string", "required": True, "description": "Hashed device identifier", "example": "a41f09"},
            "x": {"type": "number", "required": False, "description": "Corridor-local easting in m", "example": 1530.0},
            "y": {"type": "number", "required": False, "description": "Corridor-local northing in m", "example": 2.5},
            "link_id": {"type": "integer", "required": False, "description": "Pre-matched link, instead of x/y", "example": ""},
            "speed": {"type": "number", "required": True, "description": "Speed in m/s", "example": 24.3},
            "heading": {"type": "number", "required": True, "description": "Degrees clockwise from north, [0, 360)", "example": 91.0},
        }
        super().__init__(name="probes", description="GPS probe reports", input_schema=input_schema)


def parse_probes(path: str) -> List[ProbeRecord]:
    return ParseProbesTool().load(path)
