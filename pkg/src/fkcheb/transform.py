"""Block structure of the knots and the triangular change of variables ``M = W V``.

After the transform, the signed piece gradients of extremes inside a block
subinterval only touch the coordinates of that block, so hull tests on an
interval run in dimension ``m (q - p)`` plus one leading coordinate per
non-neutral delimiter.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .deviation import DeviationProfile
from .quasidiff import confined_quasidiff
from .spline import KnotClass, SplineModel, classify_knots

LOGGER = logging.getLogger(__name__)


class TransformError(ValueError):
    """Raised for coincident knots or intervals that do not consist of whole blocks."""


@dataclass(frozen=True)
class BlockStructure:
    """Knot indices delimiting block subintervals: 0, every non-neutral knot, and N."""

    delimiters: Tuple[int, ...]

    @property
    def blocks(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(zip(self.delimiters, self.delimiters[1:]))

    def is_aligned(self, p: int, q: int) -> bool:
        return p < q and p in self.delimiters and q in self.delimiters

    def aligned_intervals(self) -> List[Tuple[int, int]]:
        """Every union of consecutive blocks, shortest first then leftmost."""

        pairs = [
            (p, q)
            for index, p in enumerate(self.delimiters)
            for q in self.delimiters[index + 1 :]
        ]
        return sorted(pairs, key=lambda pair: (pair[1] - pair[0], pair[0]))


def block_structure(
    model: SplineModel, classes: Optional[Sequence[KnotClass]] = None, tau_zero: Optional[float] = None
) -> BlockStructure:
    if model.has_coincident_knots:
        raise TransformError("Coincident knots are not supported by the block analysis")
    if classes is None:
        classes = classify_knots(model, tau_zero)
    inner = [knot_class.knot_index for knot_class in classes if not knot_class.is_neutral]
    return BlockStructure(delimiters=(0, *inner, model.pieces))


@dataclass(frozen=True, eq=False)
class TransformMatrices:
    V: np.ndarray
    W: np.ndarray
    M: np.ndarray
    k_map: Dict[int, Optional[int]]
    structure: BlockStructure
    degree: int

    def coordinate_indices(self, p: int, q: int) -> List[int]:
        """Coordinates that can be nonzero for generators of the aligned interval ``(p, q)``."""

        if not self.structure.is_aligned(p, q):
            raise TransformError(f"Interval ({p}, {q}) is not a union of whole blocks")
        width = self.degree + 1
        indices: List[int] = []
        for k in range(p, q):
            base = k * width
            if k in self.structure.delimiters:
                indices.append(base)
            indices.extend(range(base + 1, base + width))
        return indices


def _v_block(model: SplineModel, k: int) -> np.ndarray:
    m = model.degree
    block = np.eye(m + 1)
    if k == 0:
        return block
    block[0, 0] = -1.0
    coeffs = model.blocks[k]
    for j in range(1, m):
        block[0, j + 1] = -(m + 1 - j) * coeffs[j - 1]
    return block


def _w_block(model: SplineModel, p: int, q: int) -> np.ndarray:
    """Maps ``(a_qm, eta_q(t))`` to ``(a_pm, eta_p(t))``; ``a_00``'s slot plays ``a_pm`` for ``p = 0``."""

    m = model.degree
    a_qm = model.alm(q)
    lead_p = 1.0 if p == 0 else model.alm(p)
    delta = model.breakpoints[q] - model.breakpoints[p]
    block = np.zeros((m + 1, m + 1))
    block[0, 0] = lead_p / a_qm
    for j in range(1, m + 1):
        power = m + 1 - j
        block[j, 0] = delta ** power / a_qm
        for col in range(1, m + 1):
            k = m + 1 - col
            if 1 <= k <= power:
                block[j, col] = comb(power, k) * delta ** (power - k)
    return block


def build_transform(
    model: SplineModel, classes: Optional[Sequence[KnotClass]] = None, tau_zero: Optional[float] = None
) -> TransformMatrices:
    if classes is None:
        classes = classify_knots(model, tau_zero)
    structure = block_structure(model, classes)
    m, pieces = model.degree, model.pieces
    width = m + 1
    size = width * pieces

    V = np.zeros((size, size))
    for k in range(pieces):
        V[k * width : (k + 1) * width, k * width : (k + 1) * width] = _v_block(model, k)

    non_neutral = structure.delimiters[1:-1]
    k_map: Dict[int, Optional[int]] = {}
    W = np.eye(size)
    for p in range(pieces):
        q = next((index for index in non_neutral if index > p), None)
        k_map[p] = q
        if q is not None:
            W[p * width : (p + 1) * width, q * width : (q + 1) * width] -= _w_block(model, p, q)

    LOGGER.debug("Built transform of size %d with delimiters %s", size, structure.delimiters)
    return TransformMatrices(V=V, W=W, M=W @ V, k_map=k_map, structure=structure, degree=m)


def transformed_generators(
    model: SplineModel, profile: DeviationProfile, mats: TransformMatrices, p: int, q: int
) -> Tuple[np.ndarray, np.ndarray]:
    """``M``-images of the confined generators, restricted to the block coordinates.

    Returns ``A`` with one row per stable generator and ``B`` with shape
    ``(u, 2, d)`` for the unstable segments.
    """

    indices = mats.coordinate_indices(p, q)
    qd = confined_quasidiff(model, profile, p, q)
    A = (qd.stable @ mats.M.T)[:, indices]
    B = (qd.unstable @ mats.M.T)[..., indices]
    return A, B
