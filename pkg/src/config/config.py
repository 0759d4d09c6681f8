import json
import logging
import os
import sys
from typing import Any, Dict, Optional

from src.config.models import PipelineConfigModel, load_model
from src.core.errors import ConfigError

logger = logging.getLogger(__name__)


class HullScanConfig:
    """Gestion de la configuration de l'application"""

    HOME_ENV = "HULLSCAN_HOME"
    DEFAULT_HOME = os.path.expanduser("~/.hullscan")
    # Fichiers de configuration livrés avec l'application
    SHIPPED_CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__)))), "config")

    DEFAULT_PIPELINE = "pipeline_desk.json"
    DEFAULT_OUTPUT_DIR = "hullscan_out"

    def __init__(self, home: Optional[str] = None):
        """Initialise la configuration"""
        self.config_dir = home or os.environ.get(self.HOME_ENV) or self.DEFAULT_HOME
        self.config_file = os.path.join(self.config_dir, "config.json")
        self.cache_dir = os.path.join(self.config_dir, "cache")
        self.setup_directories()
        self._config = self.load_config()

    def setup_directories(self):
        """Crée les répertoires nécessaires s'ils n'existent pas"""
        os.makedirs(self.config_dir, exist_ok=True)
        os.makedirs(self.cache_dir, exist_ok=True)

        if sys.platform != "win32":
            os.chmod(self.config_dir, 0o700)

    def load_config(self) -> Dict:
        """Charge les préférences depuis config.json"""
        if os.path.exists(self.config_file):
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    return json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Erreur de lecture du fichier de configuration {self.config_file}: {e}") from e
        return {}

    def save_config(self):
        """Sauvegarde les préférences dans config.json"""
        with open(self.config_file, 'w', encoding='utf-8') as f:
            json.dump(self._config, f, indent=2)

    def get(self, key: str, default=None) -> Any:
        """Récupère une valeur de configuration"""
        return self._config.get(key, default)

    def set(self, key: str, value: Any):
        """Définit une valeur de configuration"""
        self._config[key] = value
        self.save_config()

    def shipped_config(self, name: str) -> str:
        return os.path.join(self.SHIPPED_CONFIG_DIR, name)

    def resolve(self, key: str, cli_value: Any = None, file_value: Any = None, default: Any = None) -> Any:
        """Priorité : option de ligne de commande > fichier --config > config.json > défaut"""
        for value in (cli_value, file_value, self.get(key)):
            if value is not None:
                return value
        return default

    def get_threads(self, args, pipeline: Optional[PipelineConfigModel] = None) -> Optional[int]:
        """Nombre de threads ; None : tous les cœurs"""
        return self.resolve("default_threads", getattr(args, "threads", None),
                            pipeline.threads if pipeline else None)

    def get_output_dir(self, args, pipeline: Optional[PipelineConfigModel] = None) -> str:
        return self.resolve("default_output_dir", getattr(args, "output", None),
                            pipeline.output_dir if pipeline else None, self.DEFAULT_OUTPUT_DIR)

    def cache_enabled(self, args, pipeline: Optional[PipelineConfigModel] = None) -> bool:
        if getattr(args, "no_cache", False):
            return False
        return bool(self.resolve("use_cache", None, pipeline.use_cache if pipeline else None, True))

    def load_pipeline(self, args) -> PipelineConfigModel:
        """Configuration de pipeline : --config, sinon la configuration livrée par défaut"""
        path = getattr(args, "config", None) or self.get("default_pipeline") or \
            self.shipped_config(self.DEFAULT_PIPELINE)
        pipeline = load_model(path, PipelineConfigModel)
        logger.debug("Configuration de pipeline lue depuis %s", path)
        return pipeline

    def pipeline_dir(self, args) -> str:
        """Répertoire de référence des chemins relatifs du pipeline"""
        path = getattr(args, "config", None) or self.get("default_pipeline") or \
            self.shipped_config(self.DEFAULT_PIPELINE)
        return os.path.dirname(os.path.abspath(path))
