from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Union

from core.errors import SchemaError

# header occupies line 1 of every delimited file
FIRST_DATA_LINE = 2

TRUE_VALUES = {"1", "true", "yes", "y", "t"}
FALSE_VALUES = {"0", "false", "no", "n", "f"}


class Tool(ABC):
    """
    Abstract base class for pipeline tools (file ingestion, exports).

    A tool declares the columns it reads in input_schema, validates rows against it, and
    reports its outcome through run's success envelope instead of raising.
    """

    def __init__(self, name: str, description: str = "", input_schema: Optional[Dict] = None):
        self.name = name
        self.description = description
        self.input_schema = input_schema

    def get_input_schema_prompt(self) -> str:
        """
        Human-readable description of the expected input.

        Returns:
            str: A description of the input schema
        """
        if self.input_schema is not None:
            return self._generate_dynamic_schema_prompt()
        return self._get_custom_input_schema_prompt()

    def _get_custom_input_schema_prompt(self) -> str:
        return f"{self.name} Input Schema: No schema defined."

    def _generate_dynamic_schema_prompt(self) -> str:
        """
        Describe self.input_schema as a delimited file: one column per field plus an example row.
        """
        lines = [
            f"{self.name} Input Schema:",
            "Comma-separated text with a header row and these columns:",
        ]
        for field_name, field_info in self.input_schema.items():
            field_type = field_info.get('type', 'string')
            required_text = " (required)" if field_info.get('required', False) else " (optional)"
            lines.append(f"    {field_name}: {field_type}{required_text} - {field_info.get('description', '')}")
        lines.append("")
        lines.append("Example:")
        lines.append(",".join(self.input_schema.keys()))
        lines.append(",".join(
            str(field_info.get('example', self._get_example_value(field_info.get('type', 'string'))))
            for field_info in self.input_schema.values()
        ))
        return "\n".join(lines)

    def _get_example_value(self, field_type: str) -> str:
        if field_type == "integer":
            return "3"
        if field_type == "number":
            return "0.05"
        if field_type == "boolean":
            return "true"
        return "abc"

    def validate_input_schema(self, input_data: Any) -> Union[bool, str]:
        """
        Validates rows against the tool's schema.

        Args:
            input_data: list of row dictionaries with raw string cells

        Returns:
            Union[bool, str]: True if validation passes, or every violation, one per line
        """
        if self.input_schema is None:
            return self._validate_custom_schema(input_data)
        violations = self.schema_violations(input_data)
        if not violations:
            return True
        return "\n".join(str(v) for v in violations)

    def _validate_custom_schema(self, input_data: Any) -> Union[bool, str]:  # pylint: disable=unused-argument
        return True

    def schema_violations(self, rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> List[SchemaError]:
        """
        Every schema violation in rows, each tagged with its file line.

        Args:
            rows: row dictionaries in file order
            columns: header of the file, when known, to report missing required columns once
        """
        errors: List[SchemaError] = []
        required = [name for name, info in self.input_schema.items() if info.get('required', False)]
        if columns is not None:
            missing = [name for name in required if name not in columns]
            if missing:
                return [SchemaError(f"missing required column(s): {', '.join(missing)}", line=1)]
        for i, row in enumerate(rows):
            line = i + FIRST_DATA_LINE
            for field_name, field_info in self.input_schema.items():
                value = row.get(field_name)
                if self._is_blank(value):
                    if field_info.get('required', False):
                        errors.append(SchemaError(f"{field_name} is required", line=line))
                    continue
                try:
                    self.coerce(value, field_info.get('type', 'string'), field_name)
                except ValueError as e:
                    errors.append(SchemaError(str(e), line=line))
        return errors

    @staticmethod
    def _is_blank(value: Any) -> bool:
        return value is None or (isinstance(value, str) and not value.strip())

    def coerce(self, value: Any, field_type: str, field_name: str) -> Any:
        """
        Convert one raw cell to its schema type.

        Raises:
            ValueError: the cell cannot be read as field_type
        """
        if self._is_blank(value):
            return None
        text = str(value).strip()
        if field_type == "integer":
            try:
                number = float(text)
            except ValueError:
                raise ValueError(f"{field_name} must be an integer, got {text!r}")
            if not number.is_integer():
                raise ValueError(f"{field_name} must be an integer, got {text!r}")
            return int(number)
        if field_type == "number":
            try:
                return float(text)
            except ValueError:
                raise ValueError(f"{field_name} must be a number, got {text!r}")
        if field_type == "boolean":
            lowered = text.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(f"{field_name} must be a boolean, got {text!r}")
        return text

    def coerce_row(self, row: Dict[str, Any]) -> Dict[str, Any]:
        """Typed copy of a row holding only schema fields; blank cells are dropped."""
        typed = {}
        for field_name, field_info in self.input_schema.items():
            value = self.coerce(row.get(field_name), field_info.get('type', 'string'), field_name)
            if value is not None:
                typed[field_name] = value
        return typed

    @abstractmethod
    def run(self, input_data: Any) -> Dict[str, Any]:
        """
        Executes the tool with the provided input data.

        Returns:
            {
                "success": True | False,
                "server_error": True | False,
                "response": The result of the tool execution
                "error": The error message if the tool execution fails
            }
        """
