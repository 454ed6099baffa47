from typing import Sequence, Tuple
import math
import numpy as np

from app.qtel.hilbert.model import (CAV_A, CAV_B, E_LEVEL, FOCK_1, G_LEVEL,
                                    Operator, PureState, SpaceLabel,
                                    qubit_label)
from app.qtel.hilbert.ops import embed

# c|1⟩ = |0⟩ in the two-level Fock truncation
LOWERING = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_EG = np.zeros((2, 2), dtype=np.complex128)
SIGMA_EG[E_LEVEL, G_LEVEL] = 1.0


def hamiltonian_h1(e: float, atom: str = "atom", cavity: str = "cav") -> Operator:
    """
    Effective Raman Hamiltonian H⁽¹⁾ = E(|e⟩⟨e| + |g⟩⟨g|) + E(|e⟩⟨g|c + |g⟩⟨e|c†)
    on the ``atom`` ⊗ ``cavity`` pair
    """
    coupling = np.kron(SIGMA_EG, LOWERING)
    m = e * np.eye(4, dtype=np.complex128) + e * (coupling + coupling.conj().T)
    return Operator(label=qubit_label(atom, cavity), matrix=m)


def hamiltonian_h2(delta_e: float, atom: str = "atom") -> Operator:
    m = np.zeros((2, 2), dtype=np.complex128)
    m[E_LEVEL, E_LEVEL] = delta_e
    return Operator(label=qubit_label(atom), matrix=m)


def lowering_operator(label: SpaceLabel, mode: str) -> Operator:
    return embed(Operator(label=qubit_label(mode), matrix=LOWERING), mode,
                 label)


def number_operator(label: SpaceLabel, mode: str) -> Operator:
    c = lowering_operator(label, mode)
    return c.dagger() @ c


def h_eff(h: Operator, kappa: float, modes: str | Sequence[str]) -> Operator:
    """
    H − iκ Σ c†c over the leaking ``modes``
    """
    names = (modes, ) if isinstance(modes, str) else tuple(modes)
    out = h
    for mode in names:
        out = out - (1j * kappa) * number_operator(h.label, mode)
    return out


def jump_operators(label: SpaceLabel,
                   mode_a: str = CAV_A,
                   mode_b: str = CAV_B) -> Tuple[Operator, Operator]:
    """
    J± = (c_A ± c_B)/√2, the modes seen by detectors D₊ and D₋ behind the
    beam splitter
    """
    ca = lowering_operator(label, mode_a)
    cb = lowering_operator(label, mode_b)
    s = 1.0 / math.sqrt(2.0)
    return (ca + cb) * s, (ca - cb) * s


def collapse_operators(label: SpaceLabel,
                       kappa: float,
                       mode_a: str = CAV_A,
                       mode_b: str = CAV_B) -> Tuple[Operator, Operator]:
    """
    √(2κ)J±, normalized so that the Lindblad anti-commutator reproduces
    −iκ(n_A + n_B)
    """
    jp, jm = jump_operators(label, mode_a, mode_b)
    r = math.sqrt(2.0 * kappa)
    return jp * r, jm * r


def truncation_leak(state: PureState, atom: str, cavity: str) -> float:
    """
    weight on |e,1⟩, the only level H⁽¹⁾ would couple out of the {0, 1}
    photon truncation
    """
    t = state.amplitudes.reshape(state.label.dims)
    idx = [slice(None)] * len(state.label.dims)
    idx[state.label.index(atom)] = E_LEVEL
    idx[state.label.index(cavity)] = FOCK_1
    return float(np.sum(np.abs(t[tuple(idx)])**2))
