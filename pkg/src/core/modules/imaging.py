"""
Export des coupes en images PGM et lecture/écriture des fichiers de masque.

Un fichier de masque reprend l'en-tête des fichiers d'historiques avec la
signature PCTM ; la charge utile est la grille (3 uint32 + 6 float64) suivie
du masque [iz, iy, ix] compressé par np.packbits.
"""
import logging
import os
import struct
from typing import Optional

import numpy as np

from src.core.errors import HistoryFormatError, PreconditionError, TruncatedFileError
from src.core.modules.geometry import GridSpec
from src.core.modules.history_io import read_header, write_header
from src.core.modules.volumes import HullMask

logger = logging.getLogger(__name__)

MASK_MAGIC = b"PCTM"
_GRID = struct.Struct("<3I6d")


def to_gray_levels(slice2d: np.ndarray, normalization: Optional[float] = None) -> np.ndarray:
    """
    Niveaux 0..255 = round(255 * clamp(valeur / normalization, 0, 1)).
    normalization None : maximum de la coupe (1 pour une coupe nulle).
    """
    values = np.asarray(slice2d, dtype=np.float64)
    if values.ndim != 2:
        raise PreconditionError(f"Coupe 2D attendue, forme {values.shape}")
    if normalization is None:
        normalization = float(values.max()) if values.size and values.max() > 0 else 1.0
    if normalization <= 0:
        raise PreconditionError("La normalisation doit être strictement positive")
    scaled = np.clip(values / normalization, 0.0, 1.0)
    # Arrondi au plus proche, demi-entiers vers le haut : identique sur toutes les plateformes
    return np.floor(255.0 * scaled + 0.5).astype(np.uint8)


def export_slice_image(slice2d: np.ndarray, path: str, normalization: Optional[float] = None):
    """Écrit une coupe en PGM binaire (P5), ligne iy = 0 en premier"""
    pixels = to_gray_levels(slice2d, normalization)
    height, width = pixels.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(f"P5\n{width} {height}\n255\n".encode('ascii'))
        f.write(np.ascontiguousarray(pixels).tobytes())


def write_mask(path: str, mask: HullMask):
    grid = mask.grid
    packed = np.packbits(mask.data.astype(np.uint8).ravel())
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        write_header(f, MASK_MAGIC, 1, int(mask.data.size))
        f.write(_GRID.pack(grid.nx, grid.ny, grid.nz, grid.voxel_size_x, grid.voxel_size_y,
                           grid.slice_thickness, *grid.origin))
        f.write(packed.tobytes())
    logger.info("Masque écrit dans %s (%d voxels)", path, mask.count())


def read_mask(path: str) -> HullMask:
    with open(path, 'rb') as f:
        record_size, count = read_header(f, MASK_MAGIC, path)
        if record_size != 1:
            raise HistoryFormatError(f"{path}: taille d'élément {record_size} inattendue pour un masque")
        raw = f.read(_GRID.size)
        if len(raw) < _GRID.size:
            raise TruncatedFileError(f"{path}: description de grille tronquée", record_index=0)
        nx, ny, nz, vx, vy, vz, ox, oy, oz = _GRID.unpack(raw)
        grid = GridSpec(nx, ny, nz, vx, vy, vz, (ox, oy, oz))
        if count != nx * ny * nz:
            raise HistoryFormatError(f"{path}: {count} voxels annoncés pour une grille {grid.shape}")
        payload = f.read()

    expected = (count + 7) // 8
    if len(payload) < expected:
        raise TruncatedFileError(f"{path}: masque tronqué à l'octet {len(payload)} sur {expected}",
                                 record_index=len(payload) * 8)
    bits = np.unpackbits(np.frombuffer(payload[:expected], dtype=np.uint8), count=count)
    return HullMask(grid, bits.reshape(grid.shape))
