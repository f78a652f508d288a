"""Report record validation

Every JSON record the borel and asymptotics commands print is checked
against schemas/report_record.yaml first: exactly the declared fields, each
with its declared type, finite when numeric, and inside its bounds.
"""

import logging
import math
import re
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import yaml


logger = logging.getLogger(__name__)

DEFAULT_SCHEMA = Path(__file__).resolve().parent.parent / "schemas" / "report_record.yaml"

FIELD_TYPES = {
    "string": (str,),
    "integer": (int,),
    "float": (float, int),
    "boolean": (bool,),
}


class ValidationError(Exception):
    """Raised when a schema or a record is invalid"""
    pass


def _has_type(value: Any, type_name: str) -> bool:
    # bool is an int subclass; it only satisfies "boolean"
    if isinstance(value, bool):
        return type_name == "boolean"
    return isinstance(value, FIELD_TYPES[type_name])


def _check_bounds(name: str, value: Any, spec: Dict[str, Any]) -> Optional[str]:
    if "min" in spec and value < spec["min"]:
        return f"Field '{name}' value {value} below minimum {spec['min']}"
    if "max" in spec and value > spec["max"]:
        return f"Field '{name}' value {value} above maximum {spec['max']}"
    return None


def _check_pattern(name: str, value: Any, spec: Dict[str, Any]) -> Optional[str]:
    if "pattern" in spec and not re.match(spec["pattern"], str(value)):
        return f"Field '{name}' does not match required pattern"
    return None


def _check_enum(name: str, value: Any, spec: Dict[str, Any]) -> Optional[str]:
    if "enum" in spec and value not in spec["enum"]:
        return f"Field '{name}' value '{value}' not in allowed values: {spec['enum']}"
    return None


VALUE_CHECKS: List[Callable[[str, Any, Dict[str, Any]], Optional[str]]] = [
    _check_bounds,
    _check_pattern,
    _check_enum,
]


class SchemaValidator:
    """Checks flat report records against a {"fields": {...}} schema"""

    def __init__(self, schema: Dict[str, Any]):
        if "fields" not in schema:
            raise ValidationError("Schema must contain 'fields' definition")
        for name, spec in schema["fields"].items():
            if "type" not in spec:
                raise ValidationError(f"Field '{name}' missing 'type' definition")
            if spec["type"] not in FIELD_TYPES:
                raise ValidationError(f"Field '{name}' has unsupported type: {spec['type']}")
        self.schema = schema
        self.fields: Dict[str, Dict[str, Any]] = schema["fields"]

    def validate(self, record: Dict[str, Any]) -> Dict[str, Any]:
        """Check one record

        Args:
            record: Flat mapping of field name to value

        Returns:
            {"valid": bool, "errors": [messages], "record": record}
        """
        errors: List[str] = []

        required = sorted(n for n, spec in self.fields.items() if spec.get("required", False))
        missing = [n for n in required if n not in record]
        if missing:
            errors.append(f"Missing required fields: {', '.join(missing)}")
        extra = sorted(set(record) - set(self.fields))
        if extra:
            errors.append(f"Unexpected fields: {', '.join(extra)}")

        for name, spec in self.fields.items():
            if name in record:
                problem = self._field_problem(name, record[name], spec)
                if problem:
                    errors.append(problem)

        return {"valid": not errors, "errors": errors, "record": record}

    def require_valid(self, record: Dict[str, Any]) -> Dict[str, Any]:
        """Return the record unchanged, or raise ValidationError listing the problems"""
        result = self.validate(record)
        if not result["valid"]:
            logger.error(f"Invalid report record {record}: {result['errors']}")
            raise ValidationError("; ".join(result["errors"]))
        return record

    @staticmethod
    def _field_problem(name: str, value: Any, spec: Dict[str, Any]) -> Optional[str]:
        """First problem with one field value, or None"""
        if value is None:
            return None if spec.get("nullable", False) else f"Field '{name}' is not nullable"

        type_name = spec["type"]
        if not _has_type(value, type_name):
            return (f"Field '{name}' has invalid type. "
                    f"Expected {type_name}, got {type(value).__name__}")
        if type_name == "float" and not math.isfinite(value):
            return f"Field '{name}' is not finite: {value}"

        for check in VALUE_CHECKS:
            if type_name not in ("integer", "float") and check is _check_bounds:
                continue
            problem = check(name, value, spec)
            if problem:
                return problem
        return None

    @classmethod
    def from_file(cls, schema_path: str = str(DEFAULT_SCHEMA)) -> "SchemaValidator":
        """Load a YAML schema file

        Args:
            schema_path: Path to the schema; defaults to the report record schema

        Returns:
            SchemaValidator for that schema
        """
        path = Path(schema_path)
        if not path.exists():
            raise ValidationError(f"Schema file not found: {schema_path}")
        with open(path, "r") as f:
            return cls(yaml.safe_load(f) or {})
