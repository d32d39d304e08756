from typing import List

from core.data.probe_matching import validate_geometry
from core.data.records import LinkGeometry
from tools.ingest.csv_record_tool import CsvRecordTool


class ParseGeometryTool(CsvRecordTool):
    record_model = LinkGeometry
    sort_by_timestamp = False

    def __init__(self):
        input_schema = {
            "link_id": {"type": "integer", "required": True, "description": "Mainline link id", "example": 7},
            "x_min": {"type": "number", "required": True, "description": "Box west edge in m", "example": 1400.0},
            "x_max": {"type": "number", "required": True, "description": "Box east edge in m", "example": 1600.0},
            "y_min": {"type": "number", "required": True, "description": "Box south edge in m", "example": -10.0},
            "y_max": {"type": "number", "required": True, "description": "Box north edge in m", "example": 10.0},
            "bearing": {"type": "number", "required": True, "description": "End-to-end bearing in degrees, [0, 360)", "example": 90.0},
        }
        super().__init__(name="geometry", description="Link bounding boxes for probe matching", input_schema=input_schema)


def parse_geometry(path: str) -> List[LinkGeometry]:
    """
    Raises:
        SchemaError: a malformed row
        GeometryError: duplicate or overlapping boxes
    """
    boxes = ParseGeometryTool().load(path)
    validate_geometry(boxes)
    return boxes
