"""Assign mode-occupation labels (n_A, n_B, n_C) to charge-basis eigenstates.

Every bare Fock state of the effective model is sampled in the charge basis:
the mode charges are k = T (n - n_g) and each mode contributes a momentum-space
Hermite-Gauss function with <k_m^2> = (1/4) sqrt(E'_J,m / 2 E_C,m). States whose
largest overlap is below one half are hybridized and take their label from
the previous sweep point (or from an injective assignment when there is none).
"""

import itertools
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import eval_hermite

from .errors import LabelingError
from .normal_modes import HYBRIDIZATION_THRESHOLD, MODES, TRANSFORM, EffectiveParams, Occupation

_logger = logging.getLogger(__name__)

MAX_TOTAL_QUANTA = 4
_TIE_BREAK = 1e-9


class StateLabel(NamedTuple):
    occupation: Occupation
    overlap: float
    hybridized: bool

    def __str__(self):
        return format_occupation(self.occupation)


def format_occupation(occupation: Occupation) -> str:
    return '(' + ','.join(str(n) for n in occupation) + ')'


def candidate_occupations(max_total: int = MAX_TOTAL_QUANTA) -> List[Occupation]:
    """All (n_A, n_B, n_C) with n_A + n_B + n_C <= max_total, by total then lexicographic."""
    occs = [occ for occ in itertools.product(range(max_total + 1), repeat=3) if sum(occ) <= max_total]
    return sorted(occs, key=lambda occ: (sum(occ), tuple(-n for n in occ)))


def mode_charge_widths(ep: EffectiveParams) -> np.ndarray:
    """Standard deviation sqrt(<k_m^2>) of each mode charge in the harmonic ground state."""
    return np.array([
        np.sqrt(0.25 * np.sqrt(ep.mode(m).ej_prime / (2.0 * ep.mode(m).ec))) for m in MODES
    ])


def harmonic_charge_states(charges: np.ndarray, ep: EffectiveParams,
                           occupations: Sequence[Occupation]) -> np.ndarray:
    """Normalized bare product states sampled on the charge grid.

    `charges` holds n - n_g for every basis vector (shape dim x 3).
    Returns an array of shape (dim, len(occupations)).
    """
    k = charges @ TRANSFORM.T
    widths = mode_charge_widths(ep)
    y = k / (np.sqrt(2.0) * widths)
    envelope = np.exp(-0.5 * y ** 2)
    max_n = max(max(occ) for occ in occupations)
    profiles = [
        [eval_hermite(n, y[:, m]) * envelope[:, m] for n in range(max_n + 1)]
        for m in range(3)
    ]
    states = np.empty((charges.shape[0], len(occupations)))
    for col, occ in enumerate(occupations):
        vec = profiles[0][occ[0]] * profiles[1][occ[1]] * profiles[2][occ[2]]
        states[:, col] = vec / np.linalg.norm(vec)
    return states


def overlap_matrix(states: np.ndarray, bare: np.ndarray) -> np.ndarray:
    """|<bare_j|psi_i>|^2 with shape (n_states, n_bare)."""
    return np.abs(states.T @ bare) ** 2


def assign_labels(overlaps: np.ndarray,
                  occupations: Sequence[Occupation],
                  states: Optional[np.ndarray] = None,
                  previous_states: Optional[np.ndarray] = None,
                  previous_labels: Optional[Sequence[StateLabel]] = None) -> List[StateLabel]:
    n_states = overlaps.shape[0]
    best = np.argmax(overlaps, axis=1)
    best_overlap = overlaps[np.arange(n_states), best]

    labels: List[Optional[StateLabel]] = [None] * n_states
    claimed = {}
    for i in range(n_states):
        if best_overlap[i] < HYBRIDIZATION_THRESHOLD:
            continue
        occ = tuple(occupations[best[i]])
        if occ in claimed:
            raise LabelingError(
                f"states {claimed[occ]} and {i} both claim {format_occupation(occ)} "
                f"with overlaps {best_overlap[claimed[occ]]:.3f} and {best_overlap[i]:.3f}"
            )
        claimed[occ] = i
        labels[i] = StateLabel(occ, float(best_overlap[i]), False)

    pending = [i for i in range(n_states) if labels[i] is None]
    if not pending:
        return labels

    index_of = {tuple(occ): j for j, occ in enumerate(occupations)}

    if previous_states is not None and previous_labels is not None and states is not None:
        if previous_states.shape[0] != states.shape[0]:
            raise LabelingError("previous solution uses a different charge basis")
        free = [j for j, lab in enumerate(previous_labels) if lab.occupation not in claimed]
        if free:
            continuity = np.abs(previous_states[:, free].T @ states[:, pending]) ** 2
            cost = -continuity.T
            cost += _TIE_BREAK * np.abs(np.subtract.outer(np.array(pending), np.array(free)))
            rows, cols = linear_sum_assignment(cost)
            for r, c in zip(rows, cols):
                i = pending[r]
                occ = previous_labels[free[c]].occupation
                if occ in claimed:
                    continue
                claimed[occ] = i
                j = index_of.get(occ)
                labels[i] = StateLabel(occ, float(overlaps[i, j]) if j is not None else 0.0, True)
            pending = [i for i in pending if labels[i] is None]

    if pending:
        free = [j for j, occ in enumerate(occupations) if tuple(occ) not in claimed]
        if len(free) < len(pending):
            raise LabelingError("more hybridized states than unassigned candidate labels")
        cost = -overlaps[np.ix_(pending, free)]
        cost += _TIE_BREAK * np.abs(np.subtract.outer(np.array(pending), np.array(free)))
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            i = pending[r]
            occ = tuple(occupations[free[c]])
            labels[i] = StateLabel(occ, float(overlaps[i, free[c]]), True)

    hybridized = [format_occupation(lab.occupation) for lab in labels if lab.hybridized]
    if hybridized:
        _logger.debug("hybridized states: %s", ', '.join(hybridized))
    return labels


def label_eigenstates(states: np.ndarray, charges: np.ndarray, ep: EffectiveParams,
                      previous_states: Optional[np.ndarray] = None,
                      previous_labels: Optional[Sequence[StateLabel]] = None,
                      max_total: int = MAX_TOTAL_QUANTA) -> Tuple[List[StateLabel], np.ndarray]:
    """Label the columns of `states`; returns the labels and the overlap matrix."""
    occupations = candidate_occupations(max_total)
    bare = harmonic_charge_states(charges, ep, occupations)
    overlaps = overlap_matrix(states, bare)
    labels = assign_labels(overlaps, occupations, states, previous_states, previous_labels)
    return labels, overlaps
