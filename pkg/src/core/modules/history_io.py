"""
Format binaire portable des fichiers d'historiques (et conteneur commun aux
fichiers de masque).

En-tête : signature 4 octets, version uint16, taille d'enregistrement
uint16, nombre d'enregistrements uint64, tout en little-endian. Suivent les
enregistrements de 13 float64 dans l'ordre des champs de ProtonHistory.
"""
import logging
import os
import struct
from typing import BinaryIO, Tuple

import numpy as np

from src.core.errors import BadMagicError, HistoryFormatError, TruncatedFileError, VersionMismatchError
from src.core.modules.simulator import HISTORY_DTYPE, HistoryBatch

logger = logging.getLogger(__name__)

HISTORY_MAGIC = b"PCTH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<HHQ")
HEADER_SIZE = 4 + _HEADER.size


def write_header(f: BinaryIO, magic: bytes, record_size: int, count: int):
    f.write(magic)
    f.write(_HEADER.pack(FORMAT_VERSION, record_size, count))


def read_header(f: BinaryIO, magic: bytes, path: str) -> Tuple[int, int]:
    """Valide l'en-tête et renvoie (taille d'enregistrement, nombre d'enregistrements)"""
    tag = f.read(4)
    if tag != magic:
        raise BadMagicError(f"{path}: signature {tag!r} au lieu de {magic!r}")
    raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: en-tête tronqué", record_index=0)
    version, record_size, count = _HEADER.unpack(raw)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version} non supportée (attendue {FORMAT_VERSION})")
    return record_size, count


def write_histories(path: str, batch: HistoryBatch):
    """Écrit un lot d'historiques ; un lot vide produit un fichier réduit à l'en-tête"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        write_header(f, HISTORY_MAGIC, HISTORY_DTYPE.itemsize, len(batch))
        f.write(batch.records.astype(HISTORY_DTYPE, copy=False).tobytes())
    logger.info("%d historiques écrits dans %s", len(batch), path)


def read_histories(path: str) -> HistoryBatch:
    with open(path, 'rb') as f:
        record_size, count = read_header(f, HISTORY_MAGIC, path)
        if record_size != HISTORY_DTYPE.itemsize:
            raise HistoryFormatError(
                f"{path}: enregistrements de {record_size} octets, {HISTORY_DTYPE.itemsize} attendus")
        payload = f.read(count * record_size)

    complete = len(payload) // record_size
    if complete < count:
        raise TruncatedFileError(
            f"{path}: fichier tronqué à l'enregistrement {complete} sur {count}", record_index=complete)
    records = np.frombuffer(payload, dtype=HISTORY_DTYPE, count=count).copy()
    logger.debug("%d historiques lus depuis %s", count, path)
    return HistoryBatch(records)
