"""
Gates Module
Gate matrices of the expansion circuit and its optical decomposition.

Two-qubit matrices are indexed 2 * bit(first slot) + bit(second slot).
Half-wave plates use the Jones convention
    HWP(theta) = [[cos 2theta, sin 2theta], [sin 2theta, -cos 2theta]]
so that HWP(pi/8) is the Hadamard and HWP(pi/16) is the F gate.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-12

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """Named 2x2 or 4x4 unitary; ``control`` is the control slot of a 4x4 gate"""

    name: str
    matrix: np.ndarray
    control: Optional[int] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"Unsupported gate shape {matrix.shape} for {self.name}")
        if matrix.shape == (4, 4) and self.control not in (None, 0, 1):
            raise ValueError(f"Invalid control slot {self.control} for {self.name}")
        if matrix.shape == (2, 2) and self.control is not None:
            raise ValueError(f"Single-qubit gate {self.name} cannot declare a control slot")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        if not self.is_unitary():
            raise ValueError(f"Gate {self.name} is not unitary")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_unitary(self, tol: float = UNITARITY_TOLERANCE) -> bool:
        product = self.matrix.conj().T @ self.matrix
        return bool(np.max(np.abs(product - np.eye(self.dim))) <= tol)

    def dagger(self) -> "GateMatrix":
        return GateMatrix(f"{self.name}^dag", self.matrix.conj().T, self.control)

    def to_dict(self) -> Dict:
        return {
            "dim": self.dim,
            "control": self.control,
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


@dataclass(frozen=True)
class DecomposedCircuit:
    """Ordered (gate, slots) steps acting on a two-slot register"""

    name: str
    steps: List[Tuple[GateMatrix, Tuple[int, ...]]] = field(default_factory=list)
    control: Optional[int] = None

    @property
    def two_qubit_gates(self) -> int:
        return sum(1 for gate, _ in self.steps if gate.dim == 4)

    @property
    def single_qubit_gates(self) -> int:
        return sum(1 for gate, _ in self.steps if gate.dim == 2)

    def compose(self) -> GateMatrix:
        """Multiply the steps in time order into one 4x4 gate"""
        total = np.eye(4, dtype=np.complex128)
        for gate, slots in self.steps:
            total = _embed(gate, slots) @ total
        return GateMatrix(self.name, total, control=self.control)


def _embed(gate: GateMatrix, slots: Tuple[int, ...]) -> np.ndarray:
    identity = np.eye(2, dtype=np.complex128)
    if gate.dim == 2:
        if slots == (0,):
            return np.kron(gate.matrix, identity)
        if slots == (1,):
            return np.kron(identity, gate.matrix)
    elif slots == (0, 1):
        return gate.matrix
    elif slots == (1, 0):
        swap = SWAP.matrix
        return swap @ gate.matrix @ swap
    raise ValueError(f"Invalid slots {slots} for {gate.dim}x{gate.dim} gate {gate.name}")


def hwp(theta: float) -> GateMatrix:
    """Half-wave plate with its fast axis at angle theta (radians)"""
    c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
    return GateMatrix(f"HWP({theta:.12g})", [[c, s], [s, -c]])


def _controlled(name: str, target_gate: np.ndarray, control: int) -> GateMatrix:
    """Apply target_gate to the other slot when the control slot is V"""
    projector_h = np.diag([1.0, 0.0])
    projector_v = np.diag([0.0, 1.0])
    identity = np.eye(2)
    if control == 0:
        matrix = np.kron(projector_h, identity) + np.kron(projector_v, target_gate)
    else:
        matrix = np.kron(identity, projector_h) + np.kron(target_gate, projector_v)
    return GateMatrix(name, matrix, control=control)


X = GateMatrix("X", [[0, 1], [1, 0]])
Z = GateMatrix("Z", [[1, 0], [0, -1]])
HADAMARD = GateMatrix("H", [[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]])
F = GateMatrix("F", hwp(np.pi / 16).matrix)
SWAP = GateMatrix("SWAP", [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
CNOT = _controlled("CNOT", X.matrix, control=0)
CZ = _controlled("CZ", Z.matrix, control=0)


def ch_direct() -> GateMatrix:
    """
    Controlled-Hadamard with the control in the second slot.

    |a>|b> -> (|c> + (-1)^(c+1) b |c+1>) / sqrt(2)^b  |b>,  c = a xor b
    """
    return _controlled("CH", HADAMARD.matrix, control=1)


def ch_decomposed() -> DecomposedCircuit:
    """
    CH from one CNOT and four wave plates on the target.

    F Z F = H and H X H = Z, so F H . CNOT . H F acts as the identity on
    the target when the control is H and as H when it is V. No phase
    correction is needed.
    """
    return DecomposedCircuit(
        "CH(decomposed)",
        [
            (F, (0,)),
            (HADAMARD, (0,)),
            (CNOT, (1, 0)),
            (HADAMARD, (0,)),
            (F, (0,)),
        ],
        control=1,
    )


def equivalent_up_to_phase(a: GateMatrix, b: GateMatrix, tol: float = UNITARITY_TOLERANCE) -> bool:
    """True iff ||A - e^{i phi} B||_max <= tol, phi read off B's largest entry"""
    if a.dim != b.dim:
        raise ValueError(f"Dimension mismatch: {a.name} is {a.dim}x{a.dim}, {b.name} is {b.dim}x{b.dim}")

    index = np.unravel_index(np.argmax(np.abs(b.matrix)), b.matrix.shape)
    reference = a.matrix[index]
    if abs(reference) <= tol:
        return False
    phase = (reference / abs(reference)) / (b.matrix[index] / abs(b.matrix[index]))
    deviation = float(np.max(np.abs(a.matrix - phase * b.matrix)))
    logger.debug("Phase-aligned deviation %s vs %s: %.3e", a.name, b.name, deviation)
    return deviation <= tol


def registered_gates() -> Dict[str, GateMatrix]:
    """Every gate the toolkit uses, by name"""
    gates = {
        "X": X,
        "Z": Z,
        "H": HADAMARD,
        "F": F,
        "CNOT": CNOT,
        "CZ": CZ,
        "CH": ch_direct(),
        "SWAP": SWAP,
    }
    return dict(sorted(gates.items()))


def dump_registry() -> Dict[str, Dict]:
    """JSON-ready {name: {dim, control, entries}} for cross-implementation checks"""
    return {name: gate.to_dict() for name, gate in registered_gates().items()}


__all__ = [
    "GateMatrix",
    "DecomposedCircuit",
    "X",
    "Z",
    "HADAMARD",
    "F",
    "SWAP",
    "CNOT",
    "CZ",
    "hwp",
    "ch_direct",
    "ch_decomposed",
    "equivalent_up_to_phase",
    "registered_gates",
    "dump_registry",
]
