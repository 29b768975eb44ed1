"""
Settings Manager Module
Quản lý cấu hình: giá trị mặc định từ config.json, ghi đè được bằng environment variables
"""

import os
import copy
import json
import logging
from typing import Any, Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()


class SettingsManager:
    """Analysis defaults: config.json merged over built-in defaults"""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file or os.getenv("MMS_CONFIG_FILE", "config.json")
        self.config = self.load_config()
        self.load_env_overrides()

    def load_config(self) -> Dict[str, Any]:
        """Tải cấu hình từ file"""
        config = self.get_default_config()
        if os.path.exists(self.config_file):
            try:
                with open(self.config_file, "r", encoding="utf-8") as f:
                    stored = json.load(f)
                for section, values in stored.items():
                    if isinstance(values, dict) and isinstance(config.get(section), dict):
                        config[section].update(values)
                    else:
                        config[section] = values
            except (OSError, ValueError) as e:
                logger.error(f"Error loading config {self.config_file}: {e}")
        return config

    @staticmethod
    def get_default_config() -> Dict[str, Any]:
        """Cấu hình mặc định"""
        return {
            "grids": {
                "p_grid": [1, 1.25, 1.5, 2, 3, 4, 8],
                "eps_grid": [0.05, 0.1, 0.2, 0.4],
                "ap_grid": [1.5, 2, 3, 4, 8],
                "rhi_eps_grid": [0.05, 0.1, 0.2, 0.4],
                "gehring_eps_grid": [0.05, 0.1, 0.2, 0.4, 0.8],
            },
            "tolerances": {
                "metric": 1e-9,
                "witness": 1e-12,
                "implication": 1e-9,
                "partition": 1e-12,
            },
            "regularity": {
                "fit_radius_fraction": 0.125,
            },
            "strong": {
                "stability_factor": 2.0,
                "ap_exponent": 4.0,
            },
            "mollify": {
                "gehring_factor": 10.0,
                "uniform_factor": 4.0,
                "convergence_floor": 1e-12,
                "inversion_allowance": 0.1,
                "test_set_fraction": 0.25,
            },
            "modulus": {
                "tol": 1e-6,
                "max_cuts_per_round": 32,
                "iteration_factor": 10,
            },
            "output": {
                "output_dir": "outputs",
                "space_digits": 17,
                "report_digits": 15,
            },
            "logging": {
                "level": "INFO",
                "file": "logs/app.log",
            },
        }

    def load_env_overrides(self):
        """Tải cấu hình từ environment variables"""
        env_mapping = {
            "MMS_OUTPUT_DIR": ("output", "output_dir"),
            "LOG_LEVEL": ("logging", "level"),
            "LOG_FILE": ("logging", "file"),
        }
        for env_var, (section, key) in env_mapping.items():
            env_value = os.getenv(env_var)
            if env_value:
                self.config.setdefault(section, {})[key] = env_value
                logger.debug(f"Loaded {section}.{key} from environment")

    def save_config(self):
        try:
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False)
            logger.info(f"Config saved to {self.config_file}")
        except OSError as e:
            logger.error(f"Error saving config: {e}")

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.config.get(section, {}).get(key, default)

    def get_section(self, section: str) -> Dict[str, Any]:
        return copy.deepcopy(self.config.get(section, {}))

    def set(self, section: str, key: str, value: Any, persist: bool = False):
        self.config.setdefault(section, {})[key] = value
        if persist:
            self.save_config()


# Global instance
settings_manager = SettingsManager()
