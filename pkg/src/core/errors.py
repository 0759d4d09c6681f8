"""
Hiérarchie des erreurs de hullscan et codes de sortie associés
"""


class HullScanError(Exception):
    """Erreur de base de l'application"""

    exit_code = 1


class ConfigError(HullScanError):
    """Fichier de configuration invalide ou incohérent"""

    exit_code = 2


class HistoryFormatError(HullScanError):
    """Fichier binaire (historiques ou masque) illisible"""

    exit_code = 3


class BadMagicError(HistoryFormatError):
    """Signature de fichier inattendue"""


class VersionMismatchError(HistoryFormatError):
    """Version de format non supportée"""


class TruncatedFileError(HistoryFormatError):
    """Fichier tronqué au milieu d'un enregistrement"""

    def __init__(self, message: str, record_index: int = -1):
        super().__init__(message)
        self.record_index = record_index


class GridMismatchError(HullScanError):
    """Deux volumes ne partagent pas la même grille"""

    exit_code = 4


class InsufficientCoverageError(HullScanError):
    """Le sinogramme ne couvre pas les 360 degrés"""

    exit_code = 5


class NoEdgeError(HullScanError):
    """Aucun contour exploitable dans une coupe"""

    exit_code = 6


class PreconditionError(HullScanError):
    """Argument violant une précondition d'une opération"""

    exit_code = 7


class StageError(HullScanError):
    """Échec d'une étape du pipeline"""

    exit_code = 8

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"Étape '{stage}' en échec: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, HullScanError):
            self.exit_code = cause.exit_code
