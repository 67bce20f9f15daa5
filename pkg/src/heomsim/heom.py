"""Hierarchy index bookkeeping and equations of motion for auxiliary
density operators.

Each bath exponential contributes a conjugate pair of hierarchy modes, so
an expansion with K terms drives a hierarchy over multi-indices of length
2K.  The hierarchy is truncated by total occupation; no closure correction
is applied at the boundary, convergence is reached by raising the depth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bath import BathExpansion

DEFAULT_MAX_INDICES = 1 << 21

_HERMITIAN_TOL = 1e-10


class HierarchyTooLargeError(ValueError):
    pass


def hierarchy_size(n_modes: int, depth: int) -> int:
    """Number of multi-indices of length n_modes with total at most depth."""
    return math.comb(depth + n_modes, n_modes)


def _index_tuples(n_modes, budget):
    if n_modes == 0:
        yield ()
        return
    for head in range(budget + 1):
        for rest in _index_tuples(n_modes - 1, budget - head):
            yield (head,) + rest


def enumerate_indices(n_modes: int, depth: int) -> list[tuple[int, ...]]:
    """All occupation tuples with sum <= depth, in lexicographic order."""
    if n_modes < 1:
        raise ValueError("need at least one hierarchy mode")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    return list(_index_tuples(n_modes, depth))


@dataclass(frozen=True)
class HierarchyStructure:
    """Index table plus neighbour maps for one truncated hierarchy.

    up[q, m] is the row of the index reached by raising mode q of row m,
    down[q, m] the row reached by lowering it.  Rows that would leave the
    truncated set point at the sentinel value size, which addresses a
    zero block in the padded state array.
    """

    n_modes: int
    depth: int
    indices: np.ndarray
    up: np.ndarray
    down: np.ndarray
    row_index: dict

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    def row_of(self, occupation) -> int:
        """Row holding one occupation tuple; KeyError outside the set."""
        return self.row_index[tuple(int(n) for n in occupation)]

    def occupation_of(self, row: int) -> tuple[int, ...]:
        """Occupation tuple stored at one row."""
        return tuple(int(n) for n in self.indices[row])


def build_hierarchy(
    n_modes: int, depth: int, max_indices: int = DEFAULT_MAX_INDICES
) -> HierarchyStructure:
    size = hierarchy_size(n_modes, depth)
    if size > max_indices:
        raise HierarchyTooLargeError(
            "hierarchy with %d modes at depth %d needs %d auxiliary operators "
            "(limit %d)" % (n_modes, depth, size, max_indices)
        )
    tuples = enumerate_indices(n_modes, depth)
    index_of = {tup: row for row, tup in enumerate(tuples)}
    up = np.full((n_modes, size), size, dtype=np.intp)
    down = np.full((n_modes, size), size, dtype=np.intp)
    for row, tup in enumerate(tuples):
        total = sum(tup)
        for q in range(n_modes):
            if total < depth:
                raised = tup[:q] + (tup[q] + 1,) + tup[q + 1 :]
                up[q, row] = index_of[raised]
            if tup[q] > 0:
                lowered = tup[:q] + (tup[q] - 1,) + tup[q + 1 :]
                down[q, row] = index_of[lowered]
    return HierarchyStructure(
        n_modes=n_modes,
        depth=depth,
        indices=np.array(tuples, dtype=np.int64),
        up=up,
        down=down,
        row_index=index_of,
    )


def interleave_modes(expansion: BathExpansion):
    """Hierarchy mode amplitudes and rates.

    Each bath term (amp, rate) occupies two consecutive mode slots, the
    second carrying the complex conjugates.
    """
    amps = np.empty(2 * expansion.n_terms, dtype=complex)
    rates = np.empty(2 * expansion.n_terms, dtype=complex)
    amps[0::2] = expansion.amplitudes
    amps[1::2] = np.conj(expansion.amplitudes)
    rates[0::2] = expansion.rates
    rates[1::2] = np.conj(expansion.rates)
    return amps, rates


def _require_hermitian(name, a):
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > _HERMITIAN_TOL * scale:
        raise ValueError("%s must be Hermitian" % name)


class HierarchySystem:
    """Right-hand side of the hierarchy equations for one bath expansion.

    State arrays have shape (size, dim, dim); row 0 is the physical
    density matrix and the remaining rows are auxiliary operators.
    """

    def __init__(
        self,
        hamiltonian,
        coupling,
        expansion: BathExpansion,
        depth: int,
        max_indices: int = DEFAULT_MAX_INDICES,
    ):
        h = np.asarray(hamiltonian, dtype=complex)
        f = np.asarray(coupling, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hamiltonian must be a square matrix")
        if f.shape != h.shape:
            raise ValueError("coupling operator shape must match the hamiltonian")
        _require_hermitian("hamiltonian", h)
        _require_hermitian("coupling operator", f)

        self.hamiltonian = h
        self.coupling = f
        self.expansion = expansion
        self.structure = build_hierarchy(2 * expansion.n_terms, depth, max_indices)
        self.mode_amplitudes, self.mode_rates = interleave_modes(expansion)

        occupations = self.structure.indices.astype(float)
        self._damping = occupations @ self.mode_rates
        # Lowering feeds back as -i*amp*f@rho from the plain modes and
        # +i*conj(amp)*rho@f from the conjugate modes, weighted by occupation.
        signed = np.where(
            np.arange(self.structure.n_modes) % 2 == 0, -1j, 1j
        ) * self.mode_amplitudes
        weights = signed[:, None] * occupations.T
        self._pre_weights = weights[0::2]
        self._post_weights = weights[1::2]
        self._down_pre = self.structure.down[0::2]
        self._down_post = self.structure.down[1::2]

    @property
    def size(self) -> int:
        return self.structure.size

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def stiffness_bound(self) -> float:
        """Largest frequency scale entering the generator.

        Used to keep the fixed step well inside the stability region.
        """
        hnorm = float(np.linalg.norm(self.hamiltonian, 2))
        return max(
            hnorm,
            float(self.mode_rates.real.max()),
            float(np.abs(self.mode_rates.imag).max()),
        )

    def initial_state(self, rho0) -> np.ndarray:
        rho = np.asarray(rho0, dtype=complex)
        if rho.shape != self.hamiltonian.shape:
            raise ValueError("initial density matrix has wrong shape")
        state = np.zeros((self.size, self.dim, self.dim), dtype=complex)
        state[0] = rho
        return state

    def physical(self, state: np.ndarray) -> np.ndarray:
        """Reduced system density matrix stored in the root row."""
        return state[0]

    def rhs(self, state: np.ndarray) -> np.ndarray:
        h = self.hamiltonian
        f = self.coupling
        padded = np.empty((self.size + 1, self.dim, self.dim), dtype=complex)
        padded[: self.size] = state
        padded[self.size] = 0.0

        raised_sum = padded[self.structure.up].sum(axis=0)
        out = -1j * (h @ state - state @ h)
        out -= self._damping[:, None, None] * state
        out += -1j * (f @ raised_sum - raised_sum @ f)
        lowered_pre = np.einsum(
            "qm,qmab->mab", self._pre_weights, padded[self._down_pre]
        )
        lowered_post = np.einsum(
            "qm,qmab->mab", self._post_weights, padded[self._down_post]
        )
        out += f @ lowered_pre
        out += lowered_post @ f
        return out
