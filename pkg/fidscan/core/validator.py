"""Schema and consistency checks for run configurations and manifests"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import yaml
from jsonschema import Draft7Validator

from .models import RunConfig

SCHEMA_DIR = Path(__file__).parent.parent / "schemas"

# keys that only make sense for one model
MODEL_KEYS = {"stoner": ("du", "size"), "bcs": ("dv", "nu")}

_RANGE_PARTS = re.compile(r"^\s*([^:]+?)\s*:\s*([^:]+?)\s*:\s*(\d+)\s*$")


@dataclass
class ValidationResult:
    """Outcome of a validation; truthy when valid"""

    is_valid: bool
    errors: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.is_valid


class BaseValidator:
    """JSON Schema (kept as YAML) validation with path-prefixed messages"""

    def __init__(self, schema_path: Path):
        self.schema_path = schema_path
        self._schema: Optional[Dict[str, Any]] = None

    @property
    def schema(self) -> Dict[str, Any]:
        if self._schema is None:
            with open(self.schema_path, "r") as f:
                self._schema = yaml.safe_load(f)
        return self._schema

    def schema_errors(self, data: Any) -> Iterator[str]:
        validator = Draft7Validator(self.schema)
        for error in sorted(validator.iter_errors(data), key=lambda e: list(e.path)):
            location = ".".join(str(part) for part in error.path) or "<root>"
            yield f"{location}: {error.message}"

    def consistency_errors(self, data: Dict[str, Any]) -> Iterator[str]:
        """Checks across keys; none by default"""
        return iter(())

    def validate_data(self, data: Any) -> ValidationResult:
        """Validate a mapping, collecting every violation"""
        errors = list(self.schema_errors(data))
        if isinstance(data, dict):
            errors.extend(self.consistency_errors(data))
        return ValidationResult(not errors, errors)

    def validate_file(self, file_path: Path) -> ValidationResult:
        try:
            with open(file_path, "r") as f:
                data = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            return ValidationResult(False, [f"Error reading file: {e}"])
        if data is None:
            return ValidationResult(False, [f"Empty configuration file: {file_path}"])
        return self.validate_data(data)


class RunConfigValidator(BaseValidator):
    """Run configurations and run manifests share one schema"""

    def __init__(self):
        super().__init__(SCHEMA_DIR / "run_config.yaml")

    def consistency_errors(self, data: Dict[str, Any]) -> Iterator[str]:
        # a file without a model may be completed by the --model flag
        model = data.get("model")
        for other, keys in MODEL_KEYS.items():
            if other == model or model not in MODEL_KEYS:
                continue
            for key in keys:
                if key in data:
                    yield f"{key}: does not apply to model {model}"
        for key in ("t", "coupling"):
            if isinstance(data.get(key), str):
                yield from _range_errors(key, data[key])

    def validate_run_config(self, config: RunConfig) -> ValidationResult:
        return self.validate_data(config.to_dict())


def _range_errors(key: str, text: str) -> Iterator[str]:
    match = _RANGE_PARTS.match(text)
    if not match:
        return
    try:
        low, high = float(match.group(1)), float(match.group(2))
    except ValueError:
        return
    if int(match.group(3)) < 2:
        yield f"{key}: range {text!r} needs at least 2 points"
    if not high > low:
        yield f"{key}: range {text!r} must have positive length"
