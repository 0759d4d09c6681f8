import hashlib
import json
import logging
import os
from typing import Optional

from src.config.models import PhantomSpecModel, ScanConfigModel
from src.core.errors import HistoryFormatError
from src.core.modules.history_io import read_histories, write_histories
from src.core.modules.simulator import HistoryBatch

logger = logging.getLogger(__name__)


class HistoryCache:
    """Cache des historiques simulés, indexé par le fantôme et l'acquisition"""

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        os.makedirs(self.cache_dir, exist_ok=True)

    @staticmethod
    def cache_key(phantom: PhantomSpecModel, scan: ScanConfigModel) -> str:
        """SHA-256 du fantôme et de l'acquisition sérialisés de façon canonique"""
        payload = json.dumps({"phantom": phantom.model_dump(mode="json"),
                              "scan": scan.model_dump(mode="json")}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def path_for(self, phantom: PhantomSpecModel, scan: ScanConfigModel) -> str:
        return os.path.join(self.cache_dir, f"{self.cache_key(phantom, scan)}.pcth")

    def get(self, phantom: PhantomSpecModel, scan: ScanConfigModel) -> Optional[HistoryBatch]:
        """Historiques en cache, None si absents ou illisibles"""
        cache_file = self.path_for(phantom, scan)
        if not os.path.exists(cache_file):
            return None
        try:
            batch = read_histories(cache_file)
        except HistoryFormatError as e:
            logger.warning("Entrée de cache ignorée (%s)", e)
            return None
        logger.info("Historiques repris du cache: %s", cache_file)
        return batch

    def set(self, phantom: PhantomSpecModel, scan: ScanConfigModel, batch: HistoryBatch):
        """Stocke un lot ; l'écriture passe par un fichier temporaire renommé"""
        cache_file = self.path_for(phantom, scan)
        partial = cache_file + ".part"
        write_histories(partial, batch)
        os.replace(partial, cache_file)
