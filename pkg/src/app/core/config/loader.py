import yaml
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from src.app.core.errors import EdgeChainError

ModelT = TypeVar("ModelT", bound=BaseModel)


class ConfigFileError(EdgeChainError):
    """Raised when a scenario or benchmark configuration file cannot be used."""

    pass


class ConfigLoader:
    """Utility class for loading scenario and benchmark configuration files.

    Files may be JSON or YAML; YAML is a superset of JSON so one parser covers both.
    """

    def load_raw(self, path: str | Path) -> Dict[str, Any]:
        """Load a configuration file into a plain dictionary."""
        config_file = Path(path)

        try:
            with open(config_file, "r", encoding="utf-8") as file:
                data = yaml.safe_load(file)
        except FileNotFoundError:
            raise ConfigFileError(f"Config file not found: {config_file}")
        except yaml.YAMLError as e:
            raise ConfigFileError(f"Error parsing config file {config_file}: {e}")

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigFileError(
                f"Config file {config_file} must contain a mapping at top level"
            )
        return data

    def load_model(
        self,
        model: Type[ModelT],
        path: Optional[str | Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
        section: Optional[str] = None,
    ) -> ModelT:
        """Build a pydantic model from defaults, an optional file and flag overrides.

        Precedence: model defaults < file contents < overrides.
        """
        data: Dict[str, Any] = {}
        if path is not None:
            raw = self.load_raw(path)
            data.update(raw.get(section, {}) if section else raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value

        try:
            return model.model_validate(data)
        except ValidationError as e:
            raise ConfigFileError(f"Invalid {model.__name__} configuration: {e}")


# Global instance
config_loader = ConfigLoader()
