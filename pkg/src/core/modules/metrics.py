"""
Comparaison voxel à voxel d'une enveloppe approchée H' avec la vérité H
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np

from src.core.modules.volumes import HullMask


@dataclass(frozen=True)
class HullComparison:
    """Voxels manquants |H \\ H'| et en trop |H' \\ H|, au total et par coupe"""
    missing: int
    extra: int
    missing_per_slice: np.ndarray
    extra_per_slice: np.ndarray
    truth_count: int
    approx_count: int

    @property
    def identical(self) -> bool:
        return self.missing == 0 and self.extra == 0

    def to_dict(self) -> Dict:
        return {
            "missing": self.missing,
            "extra": self.extra,
            "truth_count": self.truth_count,
            "approx_count": self.approx_count,
            "missing_per_slice": [int(v) for v in self.missing_per_slice],
            "extra_per_slice": [int(v) for v in self.extra_per_slice],
        }


def compare_hulls(truth: HullMask, approx: HullMask) -> HullComparison:
    truth.require_same_grid(approx)
    h = truth.data.astype(bool)
    h_prime = approx.data.astype(bool)
    missing = (h & ~h_prime).sum(axis=(1, 2), dtype=np.int64)
    extra = (h_prime & ~h).sum(axis=(1, 2), dtype=np.int64)
    return HullComparison(
        missing=int(missing.sum()),
        extra=int(extra.sum()),
        missing_per_slice=missing,
        extra_per_slice=extra,
        truth_count=truth.count(),
        approx_count=approx.count(),
    )
