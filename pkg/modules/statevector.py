"""
State Vector Module
Dense pure-state simulation of polarization qubits carried by labeled modes.

Bit convention: bit i of a basis index is the polarization of ``modes[i]``
(H -> 0, V -> 1). Everything that leaves this module (JSON, ket strings,
sampled counts) is keyed by mode labels, never by raw bit positions.
"""

import json
import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from modules.exceptions import ModeError, StateError

logger = logging.getLogger(__name__)

ModeId = Union[int, str]

# Equality tolerance used throughout the toolkit
TOLERANCE = 1e-12
# Amplitudes below this are hidden when pretty-printing only
DISPLAY_CUTOFF = 1e-14
# V-amplitude transmission of the polarization dependent loss element
PDL_TRANSMISSION = 1.0 / np.sqrt(2.0)


class Polarization(IntEnum):
    """Computational basis of a polarization qubit"""

    H = 0
    V = 1

    @classmethod
    def from_letter(cls, letter: str) -> "Polarization":
        """Parse 'H' or 'V' (case-insensitive)"""
        try:
            return cls[letter.strip().upper()]
        except KeyError:
            raise ValueError(f"Invalid polarization: {letter!r}. Supported: H, V") from None


@dataclass(frozen=True, eq=False)
class PureState:
    """Amplitude vector over the H/V basis of an ordered list of modes"""

    modes: Tuple[ModeId, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(set(modes)) != len(modes):
            raise ModeError(f"Duplicate mode labels in {list(modes)}")

        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size != 1 << len(modes):
            raise StateError(
                f"Expected {1 << len(modes)} amplitudes for {len(modes)} modes, got {amplitudes.size}"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise StateError("Amplitudes must be finite")
        amplitudes.flags.writeable = False

        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", amplitudes)

        norm = float(np.vdot(amplitudes, amplitudes).real)
        if norm > 1.0 + TOLERANCE:
            raise StateError(f"Squared norm {norm!r} exceeds 1")

    @property
    def n(self) -> int:
        return len(self.modes)

    def index_of(self, mode: ModeId) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ModeError(f"Unknown mode: {mode!r}. Present: {list(self.modes)}") from None

    def axis_of(self, mode: ModeId) -> int:
        """Tensor axis of a mode in the C-ordered (2,)*n view"""
        return self.n - 1 - self.index_of(mode)

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "PureState":
        return PureState(self.modes, amplitudes)

    def amplitude(self, assignment: Dict[ModeId, Polarization]) -> complex:
        """Amplitude of the basis state given as {mode: polarization}"""
        if set(assignment) != set(self.modes):
            raise ModeError(f"Assignment must cover exactly {list(self.modes)}")
        index = sum(int(assignment[mode]) << i for i, mode in enumerate(self.modes))
        return complex(self.amplitudes[index])

    def __repr__(self) -> str:
        return f"PureState(modes={list(self.modes)}, {to_ket_string(self)})"


@dataclass(frozen=True)
class MeasurementRecord:
    """One branch of a projective H/V measurement"""

    mode: ModeId
    outcome: Polarization
    probability: float
    # None when the branch has zero probability
    post_state: Optional[PureState]


def _gate_array(gate, dim: int) -> np.ndarray:
    matrix = np.asarray(getattr(gate, "matrix", gate), dtype=np.complex128)
    if matrix.shape != (dim, dim):
        raise ValueError(f"Invalid gate shape {matrix.shape}, expected ({dim}, {dim})")
    return matrix


def basis_label(index: int, n: int) -> str:
    """Polarization letters of a basis index, in mode order"""
    return "".join("V" if (index >> i) & 1 else "H" for i in range(n))


def basis_state(assignments: Sequence[Tuple[ModeId, Polarization]]) -> PureState:
    """Product state with one amplitude 1 on the encoded index"""
    if not assignments:
        raise ValueError("basis_state requires at least one mode")

    modes = [mode for mode, _ in assignments]
    if len(set(modes)) != len(modes):
        raise ModeError(f"Duplicate mode labels in {modes}")

    index = sum(int(Polarization(pol)) << i for i, (_, pol) in enumerate(assignments))
    amplitudes = np.zeros(1 << len(modes), dtype=np.complex128)
    amplitudes[index] = 1.0
    return PureState(tuple(modes), amplitudes)


def apply_1q(state: PureState, gate, mode: ModeId) -> PureState:
    """Apply a 2x2 gate to one mode"""
    matrix = _gate_array(gate, 2)
    axis = state.axis_of(mode)
    psi = np.tensordot(matrix, state.as_tensor(), axes=([1], [axis]))
    psi = np.moveaxis(psi, 0, axis)
    return state.with_amplitudes(psi.reshape(-1))


def apply_2q(state: PureState, gate, mode_a: ModeId, mode_b: ModeId) -> PureState:
    """
    Apply a 4x4 gate to two modes.

    mode_a is the first tensor factor of the gate: row/column index is
    2 * bit(mode_a) + bit(mode_b).
    """
    if mode_a == mode_b:
        raise ModeError(f"Two-qubit gate needs distinct modes, got {mode_a!r} twice")

    matrix = _gate_array(gate, 4).reshape(2, 2, 2, 2)
    axis_a = state.axis_of(mode_a)
    axis_b = state.axis_of(mode_b)
    psi = np.tensordot(matrix, state.as_tensor(), axes=([2, 3], [axis_a, axis_b]))
    psi = np.moveaxis(psi, [0, 1], [axis_a, axis_b])
    return state.with_amplitudes(psi.reshape(-1))


def pdl_filter(state: PureState, modes: Iterable[ModeId]) -> PureState:
    """
    Polarization dependent loss on every listed mode: H -> H, V -> V/sqrt(2).

    The result is left sub-normalized; its squared norm is the success
    probability of the filter. A mode listed twice is filtered once.
    """
    kraus = np.diag([1.0, PDL_TRANSMISSION]).astype(np.complex128)
    for mode in dict.fromkeys(modes):
        state = apply_1q(state, kraus, mode)
    return state


def norm_squared(state: PureState) -> float:
    return float(np.vdot(state.amplitudes, state.amplitudes).real)


def renormalize(state: PureState) -> PureState:
    norm = norm_squared(state)
    if not norm > 0.0:
        raise StateError("Cannot renormalize a zero-norm state")
    return state.with_amplitudes(state.amplitudes / np.sqrt(norm))


def tensor(state_a: PureState, state_b: PureState) -> PureState:
    """Product state; modes of state_a come first"""
    overlap = set(state_a.modes) & set(state_b.modes)
    if overlap:
        raise ModeError(f"Overlapping mode labels: {sorted(map(str, overlap))}")
    # modes[0] is the least significant bit, so state_b varies slowest
    amplitudes = np.kron(state_b.amplitudes, state_a.amplitudes)
    return PureState(state_a.modes + state_b.modes, amplitudes)


def reorder(state: PureState, modes: Sequence[ModeId]) -> PureState:
    """Same state with its modes listed in a different order"""
    modes = tuple(modes)
    if len(modes) != state.n or set(modes) != set(state.modes):
        raise ModeError(f"Cannot reorder {list(state.modes)} as {list(modes)}")
    if modes == state.modes:
        return state

    n = state.n
    perm = [state.axis_of(modes[n - 1 - k]) for k in range(n)]
    psi = np.transpose(state.as_tensor(), perm)
    return PureState(modes, psi.reshape(-1))


def measure(
    state: PureState, mode: ModeId, remove: bool = False
) -> Tuple[MeasurementRecord, MeasurementRecord]:
    """
    Projective H/V measurement of one mode, both branches enumerated.

    Branch probabilities are absolute branch weights, so they sum to the
    pre-measurement squared norm. By default the measured mode stays in the
    post-state, collapsed to the observed polarization.
    """
    total = norm_squared(state)
    if not total > 0.0:
        raise StateError("Cannot measure a zero-norm state")

    axis = state.axis_of(mode)
    psi = state.as_tensor()
    remaining = tuple(m for m in state.modes if m != mode)

    records = []
    for outcome in Polarization:
        branch = np.take(psi, int(outcome), axis=axis)
        probability = float(np.vdot(branch, branch).real)
        post_state = None
        if probability > 0.0:
            branch = branch / np.sqrt(probability)
            if remove:
                post_state = PureState(remaining, branch.reshape(-1))
            else:
                collapsed = np.zeros_like(psi)
                index = [slice(None)] * state.n
                index[axis] = int(outcome)
                collapsed[tuple(index)] = branch
                post_state = state.with_amplitudes(collapsed.reshape(-1))
        records.append(MeasurementRecord(mode, outcome, probability, post_state))

    logger.debug(
        "Measured mode %r: p(H)=%.17g p(V)=%.17g", mode, records[0].probability, records[1].probability
    )
    return records[0], records[1]


def fidelity(state: PureState, target: PureState) -> float:
    """Normalized squared overlap |<target|state>|^2 / (|state|^2 |target|^2)"""
    if set(state.modes) != set(target.modes):
        raise ModeError(f"Mismatched mode sets: {list(state.modes)} vs {list(target.modes)}")

    target = reorder(target, state.modes)
    norms = norm_squared(state) * norm_squared(target)
    if not norms > 0.0:
        raise StateError("Fidelity is undefined for zero-norm states")

    overlap = np.vdot(target.amplitudes, state.amplitudes)
    return min(1.0, float(abs(overlap) ** 2 / norms))


def to_ket_string(state: PureState, precision: int = 8) -> str:
    """Human-readable superposition, e.g. '0.70710678|HV> + 0.70710678|VH>'"""
    terms = []
    for index in np.flatnonzero(np.abs(state.amplitudes) >= DISPLAY_CUTOFF):
        amp = complex(state.amplitudes[index])
        if abs(amp.imag) < DISPLAY_CUTOFF:
            coeff = f"{amp.real:.{precision}g}"
        else:
            coeff = f"({amp.real:.{precision}g}{amp.imag:+.{precision}g}j)"
        terms.append(f"{coeff}|{basis_label(int(index), state.n)}>")
    if not terms:
        return "0"
    return " + ".join(terms).replace("+ -", "- ")


def sample_counts(state: PureState, shots: int, seed: Optional[int] = None) -> Dict[str, int]:
    """Seeded basis-outcome sampling of a (possibly sub-normalized) state"""
    if shots < 1:
        raise ValueError(f"Invalid shot count: {shots}")
    probabilities = np.abs(state.amplitudes) ** 2
    total = probabilities.sum()
    if not total > 0.0:
        raise StateError("Cannot sample a zero-norm state")

    rng = np.random.default_rng(seed)
    draws = rng.choice(probabilities.size, size=shots, p=probabilities / total)
    indices, counts = np.unique(draws, return_counts=True)
    return {basis_label(int(i), state.n): int(c) for i, c in zip(indices, counts)}


# JSON codec: {"modes": [...], "amplitudes": [[re, im], ...]} in bit-index order

def state_to_dict(state: PureState) -> Dict:
    return {
        "modes": list(state.modes),
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def state_from_dict(data: Dict) -> PureState:
    try:
        modes = data["modes"]
        pairs = data["amplitudes"]
    except (KeyError, TypeError):
        raise StateError("State JSON needs 'modes' and 'amplitudes' fields") from None

    if not isinstance(modes, list) or not all(isinstance(m, (int, str)) and not isinstance(m, bool) for m in modes):
        raise StateError("'modes' must be a list of integer or string labels")
    try:
        amplitudes = np.array([complex(float(re), float(im)) for re, im in pairs], dtype=np.complex128)
    except (TypeError, ValueError):
        raise StateError("'amplitudes' must be a list of [re, im] pairs") from None
    return PureState(tuple(modes), amplitudes)


def dumps_state(state: PureState) -> str:
    return json.dumps(state_to_dict(state))


def loads_state(text: str) -> PureState:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise StateError(f"Malformed state JSON: {e}") from None
    return state_from_dict(data)


def save_state(state: PureState, path: Path):
    Path(path).write_text(dumps_state(state) + "\n")


def load_state(path: Path) -> PureState:
    return loads_state(Path(path).read_text())


__all__ = [
    "ModeId",
    "Polarization",
    "PureState",
    "MeasurementRecord",
    "TOLERANCE",
    "DISPLAY_CUTOFF",
    "PDL_TRANSMISSION",
    "basis_label",
    "basis_state",
    "apply_1q",
    "apply_2q",
    "pdl_filter",
    "norm_squared",
    "renormalize",
    "tensor",
    "reorder",
    "measure",
    "fidelity",
    "to_ket_string",
    "sample_counts",
    "state_to_dict",
    "state_from_dict",
    "dumps_state",
    "loads_state",
    "save_state",
    "load_state",
]
