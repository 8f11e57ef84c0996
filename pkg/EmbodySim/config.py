"""Configuration management for EmbodySim."""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger("EmbodySim.config")

# Default configuration values
DEFAULT_CONFIG = {
    "scene": {
        "room_half_extents": [3.0, 2.5, 1.5],
        "n_base": 8,
        "n_added": 3,
        "max_retries": 200,
        "max_overlap": 0.05,
        "ambient_probability": 0.35,
    },
    "sensors": {
        "tactile_grid": 8,
        "tactile_k0": 1.0,
        "tactile_d_max": 0.25,
        "tactile_g_sat": 4.0,
        "tactile_sigma": 0.2,
        "heatmap_width": 64,
        "heatmap_height": 64,
        "sample_rate": 16000,
        "duration": 0.5,
        "point_cloud_size": 256,
    },
    "embedding": {
        "projection_seed": 1024,
        "lr": 0.5,
        "epochs": 200,
        "select_init_scale": 4.0,
        "ridge": 1e-3,
    },
    "protocol": {"max_line_bytes": 16 * 1024 * 1024},
    "environment": {
        "step_length": 0.25,
        "reach": 0.8,
        "look_radius": 2.0,
        "max_steps": 64,
    },
    "taskgen": {
        "tasks_per_scene": 10,
        "kinds": [
            "captioning",
            "qa",
            "dialogue",
            "retrieval",
            "tool_use",
            "task_decomposition",
            "rearrangement",
        ],
        "k_twins": 3,
        "twin_varied": ["material", "temp_label", "hardness"],
    },
    "evaluation": {
        "k_twins": 4,
        "episodes": 500,
        "seed": 2024,
        "candidates": 6,
        "train_scenes": 200,
        "output": "./out/reports",
    },
    "generation": {
        "scenes": 100,
        "seed": 7,
        "workers": 4,
        "output": "./out/dataset.jsonl",
    },
    "server": {
        "host": "127.0.0.1",
        "port": 7341,
        "seed": 11,
        "episode_log": "./out/episodes.jsonl",
    },
}


class Config:
    """Configuration manager for EmbodySim."""

    def __init__(self):
        self._config = None
        self._config_file = None
        self._loaded = False
        self._loading = False

    def _get_config_path(self) -> Path:
        """Get the configuration file path."""
        # 1. Environment variable
        if os.environ.get("EMBODYSIM_CONFIG"):
            return Path(os.environ["EMBODYSIM_CONFIG"])

        # 2. Current directory
        local_config = Path("./EmbodySim.yaml")
        if local_config.exists():
            return local_config

        # 3. User config directory
        config_dir = Path.home() / ".config" / "EmbodySim"
        config_file = config_dir / "EmbodySim.yaml"

        if not config_dir.exists():
            config_dir.mkdir(parents=True, exist_ok=True)

        if not config_file.exists():
            self._create_default_config(config_file)

        return config_file

    def _create_default_config(self, config_file: Path):
        """Create a default configuration file with comments."""
        default_config_content = """# EmbodySim Configuration File
# Every value below is the built-in default; delete a key to keep it.

scene:
  # Half extents (m) of the room box, centered at (x, y) = half extents
  room_half_extents: [3.0, 2.5, 1.5]
  # Pre-existing objects and inserted interactive objects (1-10)
  n_base: 8
  n_added: 3
  # Rejection-sampling attempts per object before placement fails
  max_retries: 200

sensors:
  tactile_grid: 8
  heatmap_width: 64
  heatmap_height: 64
  sample_rate: 16000
  duration: 0.5
  point_cloud_size: 256

embedding:
  # Full-batch gradient descent for the SELECT head
  lr: 0.5
  epochs: 200

taskgen:
  tasks_per_scene: 10
  # Visual twins injected per generated scene
  k_twins: 3

evaluation:
  k_twins: 4
  episodes: 500
  seed: 2024
  # SELECT-head training scenes for the interactive policy
  train_scenes: 200
  # Sense chain for --ablation, each mask a superset of the one before
  # modality_masks: [[visual], [visual, impact_sound]]
  output: ./out/reports

generation:
  scenes: 100
  seed: 7
  workers: 4
  output: ./out/dataset.jsonl

server:
  host: 127.0.0.1
  port: 7341
  seed: 11
  episode_log: ./out/episodes.jsonl

# Note: any key can be overridden with an environment variable, e.g.
# - EMBODYSIM_SERVER_HOST
# - EMBODYSIM_SERVER_PORT
# - EMBODYSIM_GENERATION_SEED
"""
        try:
            config_file.write_text(default_config_content)
            logger.info(f"Created default configuration file at {config_file}")
        except Exception as e:
            logger.warning(f"Failed to create default config file: {e}")

    def _load_config(self):
        """Load configuration from file."""
        try:
            self._config_file = self._get_config_path()

            if self._config_file.exists():
                with open(self._config_file, "r") as f:
                    loaded_config = yaml.safe_load(f) or {}

                self._merge_config(self._config, loaded_config)
                logger.info(f"Loaded configuration from {self._config_file}")
        except Exception as e:
            logger.warning(f"Failed to load config file, using defaults: {e}")

    def _merge_config(self, base: Dict[str, Any], update: Dict[str, Any]):
        """Recursively merge configuration dictionaries."""
        for key, value in update.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._merge_config(base[key], value)
            else:
                base[key] = value

    def _ensure_loaded(self):
        """Ensure configuration is loaded (lazy loading)."""
        if not self._loaded and not self._loading:
            self._loading = True
            try:
                self._config = copy.deepcopy(DEFAULT_CONFIG)
                self._load_config()
                self._loaded = True
            finally:
                self._loading = False

    @property
    def config(self):
        """Get the configuration dictionary, loading it if needed."""
        self._ensure_loaded()
        return self._config

    @property
    def config_file(self):
        """Get the configuration file path."""
        self._ensure_loaded()
        return self._config_file

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation (e.g., 'server.port')."""
        self._ensure_loaded()
        env_key = f"EMBODYSIM_{key.upper().replace('.', '_')}"
        if env_key in os.environ:
            return _coerce(os.environ[env_key])

        keys = key.split(".")
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def section(self, name: str) -> Dict[str, Any]:
        """Get a whole section with environment overrides applied."""
        self._ensure_loaded()
        values = copy.deepcopy(self._config.get(name, {}))
        for key in list(values):
            values[key] = self.get(f"{name}.{key}", values[key])
        return values

    def get_config_info(self) -> str:
        """Get information about the current configuration."""
        self._ensure_loaded()
        return f"Config file: {self._config_file or 'Using defaults'}"


def _coerce(value: str) -> Any:
    """Convert an environment string to int, bool or float where it looks like one."""
    if value.lstrip("-").isdigit():
        return int(value)
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    if "." in value or "e" in value.lower():
        try:
            return float(value)
        except ValueError:
            pass
    return value


@dataclass
class RunConfig:
    """Everything a command needs, resolved from config file and CLI flags."""

    scene: Dict[str, Any] = field(default_factory=dict)
    sensors: Dict[str, Any] = field(default_factory=dict)
    embedding: Dict[str, Any] = field(default_factory=dict)
    environment: Dict[str, Any] = field(default_factory=dict)
    taskgen: Dict[str, Any] = field(default_factory=dict)
    evaluation: Dict[str, Any] = field(default_factory=dict)
    generation: Dict[str, Any] = field(default_factory=dict)
    server: Dict[str, Any] = field(default_factory=dict)
    protocol: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_config(
        cls, cfg: Optional[Config] = None, overrides: Optional[Dict[str, Any]] = None
    ) -> "RunConfig":
        """Build a RunConfig; ``overrides`` maps dotted keys to values."""
        cfg = cfg or config
        run = cls(
            **{
                name: cfg.section(name)
                for name in (
                    "scene",
                    "sensors",
                    "embedding",
                    "environment",
                    "taskgen",
                    "evaluation",
                    "generation",
                    "server",
                    "protocol",
                )
            }
        )
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            section, _, key = dotted.partition(".")
            getattr(run, section)[key] = value
        run.validate()
        return run

    def validate(self):
        """Reject configs that would make runs non-reproducible or empty."""
        from .errors import SceneValidationError

        for section, key in (
            ("generation", "seed"),
            ("evaluation", "seed"),
            ("server", "seed"),
        ):
            if not isinstance(getattr(self, section).get(key), int):
                raise SceneValidationError(
                    f"{section}.{key} must be an explicit integer"
                )
        n_added = self.scene.get("n_added", 1)
        if not 1 <= int(n_added) <= 10:
            raise SceneValidationError(f"scene.n_added must be in 1..10, got {n_added}")


# Global config instance - lazy loaded
config = Config()
