import logging
import os
from typing import Any, Dict, List, Optional, Tuple, Type

import pandas as pd
from pydantic import BaseModel, ValidationError

from core.errors import SchemaError
from core.tool.tool_class import FIRST_DATA_LINE, Tool

logger = logging.getLogger(__name__)


def _first_message(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first.get("loc", ()) if part != "__root__")
    message = first.get("msg", str(error)).removeprefix("Value error, ")
    return f"{where}: {message}" if where else message


class CsvRecordTool(Tool):
    """
    Reads one delimited record file into validated pydantic records.

    Column types and presence are checked against input_schema first, then each row is
    validated by record_model; every problem carries the file line it came from.
    """

    record_model: Type[BaseModel]
    sort_by_timestamp: bool = True

    def read_rows(self, path: str) -> Tuple[Optional[List[str]], List[Dict[str, Any]]]:
        if not os.path.exists(path):
            raise SchemaError("file does not exist", path=path)
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, comment="#")
        except pd.errors.EmptyDataError:
            return None, []
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise SchemaError(f"unreadable file: {e}", path=path)
        frame.columns = [str(c).strip() for c in frame.columns]
        return list(frame.columns), frame.to_dict(orient="records")

    def build_record(self, row: Dict[str, Any], line: int) -> BaseModel:
        try:
            return self.record_model.model_validate({**self.coerce_row(row), "line": line})
        except ValidationError as e:
            raise SchemaError(_first_message(e), line=line)

    def check(self, path: str) -> List[SchemaError]:
        """Every violation in the file; an empty list means it parses cleanly."""
        try:
            columns, rows = self.read_rows(path)
        except SchemaError as e:
            return [e]
        violations = self.schema_violations(rows, columns)
        bad_lines = {v.line for v in violations}
        for i, row in enumerate(rows):
            line = i + FIRST_DATA_LINE
            if line in bad_lines or 1 in bad_lines:
                continue
            try:
                self.build_record(row, line)
            except SchemaError as e:
                violations.append(e)
        for v in violations:
            v.path = path
        return sorted(violations, key=lambda v: v.line or 0)

    def load(self, path: str) -> List[BaseModel]:
        """
        Raises:
            SchemaError: the first violation in file order
        """
        violations = self.check(path)
        if violations:
            raise violations[0]
        _, rows = self.read_rows(path)
        records = [self.build_record(row, i + FIRST_DATA_LINE) for i, row in enumerate(rows)]
        if self.sort_by_timestamp:
            records.sort(key=lambda r: r.timestamp)
        logger.info(f"{self.name}: read {len(records)} records from {path}")
        return records

    def run(self, input_data: Any) -> Dict[str, Any]:
        """
        Args:
            input_data: {"path": file to read}
        """
        path = input_data.get("path") if isinstance(input_data, dict) else None
        if not path:
            return {"success": False, "server_error": False, "error": f"{self.name} needs a 'path'"}
        try:
            violations = self.check(path)
            if violations:
                logger.warning(f"{self.name}: {len(violations)} schema violation(s) in {path}")
                return {
                    "success": False,
                    "server_error": False,
                    "error": str(violations[0]),
                    "violations": [str(v) for v in violations],
                }
            return {"success": True, "server_error": False, "response": self.load(path)}
        except Exception as e:
            logger.error(f"{self.name} failed on {path}: {e}", exc_info=True)
            return {"success": False, "server_error": True, "error": str(e)}
