import json
import logging
import os
import time
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class RunJournal:
    """Journal des étapes exécutées, un objet JSON par ligne"""

    def __init__(self, log_file: str):
        self.log_file = log_file
        os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)

    def log_action(self, action: str, success: bool = True, details: Optional[Dict[str, Any]] = None):
        """Enregistre une action dans le journal"""
        log_entry = {
            "timestamp": time.strftime("%Y-%m-%d %H:%M:%S"),
            "user": os.getenv('USER') or 'unknown',
            "action": action,
            "status": "SUCCESS" if success else "FAILED",
            "details": details or {}
        }

        try:
            with open(self.log_file, 'a', encoding='utf-8') as f:
                f.write(json.dumps(log_entry, default=str) + "\n")
        except OSError as e:
            logger.warning("Journal %s inaccessible: %s", self.log_file, e)

    def log_stage(self, stage: str, duration: float, success: bool = True, error: Optional[Exception] = None,
                  **details):
        """Enregistre une étape du pipeline avec sa durée"""
        details["duration_s"] = round(duration, 6)
        if not success and error is not None:
            details["error"] = str(error)
        self.log_action(stage.upper(), success=success, details=details)
