"""
Exécution parallèle à résultats ordonnés.

Les noyaux numba sont compilés avec nogil=True : un pool de threads suffit
à occuper plusieurs cœurs sans copier les volumes entre processus.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def resolve_threads(threads: Optional[int]) -> int:
    """Nombre de threads effectif (None ou 0 : tous les cœurs)"""
    if not threads:
        return os.cpu_count() or 1
    return max(1, int(threads))


def map_ordered(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """Applique func à chaque élément ; les résultats suivent l'ordre d'entrée"""
    items = list(items)
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug("Pool de %d threads pour %d tâches", workers, len(items))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def chunk_bounds(total: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Découpe [0, total) en intervalles consécutifs de taille chunk_size"""
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def sum_ordered(parts: Sequence[np.ndarray], shape, dtype) -> np.ndarray:
    """Somme de volumes privés, dans l'ordre des morceaux"""
    total = np.zeros(shape, dtype=dtype)
    for part in parts:
        total += part
    return total
