"""
Schemes Module
W-state expansion circuits built from the CH + CNOT expansion block.

Every driver records the CircuitPlan it executes, so an outcome carries its
own resource count (ancilla photons, two-qubit gates, loss filters). Success
probabilities are always read from squared norms of the simulated state;
the closed forms live in modules.analysis.

PDL placement per scheme:
  cascade          - every W mode that does not enter the block
  parallel_partial - every untouched W mode
  parallel_double  - none
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from modules.exceptions import LayoutError, ModeError, ResourceLimitError, StateError
from modules.gates import registered_gates
from modules.statevector import (
    TOLERANCE,
    ModeId,
    Polarization,
    PureState,
    apply_2q,
    basis_state,
    fidelity,
    measure,
    norm_squared,
    pdl_filter,
    renormalize,
    state_to_dict,
    tensor,
)

logger = logging.getLogger(__name__)

# Largest register the dense simulator is allowed to build
MAX_QUBITS = 22
# Acceptance tolerance of back-propagation verification
VERIFY_TOLERANCE = 1e-9

SCHEMES = ("cascade", "parallel", "partial", "odd_add", "odd_project", "prepare")
ODD_STRATEGIES = ("project", "add")


@dataclass(frozen=True)
class WSpec:
    """Ideal N-mode W state: equal superposition of the N one-V basis states"""

    n: int
    modes: Tuple[ModeId, ...] = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"Invalid W state size: {self.n}. Must be >= 1")
        modes = tuple(self.modes) or tuple(range(1, self.n + 1))
        if len(modes) != self.n:
            raise ModeError(f"W_{self.n} needs {self.n} mode labels, got {len(modes)}")
        if len(set(modes)) != len(modes):
            raise ModeError(f"Duplicate mode labels in {list(modes)}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "modes", modes)

    @classmethod
    def of(cls, state: PureState) -> "WSpec":
        """W specification on the modes of an existing state"""
        return cls(state.n, state.modes)


def fresh_label(base: ModeId, taken: Iterable[ModeId]) -> ModeId:
    """Ancilla label derived from its paired input: 2 -> '2a', then '2aa', ..."""
    taken = set(taken)
    label = f"{base}a"
    while label in taken:
        label += "a"
    return label


@dataclass(frozen=True)
class ParallelLayout:
    """Which W modes enter a block (with which fresh ancilla) and which do not"""

    pairs: Tuple[Tuple[ModeId, ModeId], ...]
    untouched: Tuple[ModeId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((a, b) for a, b in self.pairs))
        object.__setattr__(self, "untouched", tuple(self.untouched))

    @classmethod
    def pairing(cls, modes: Sequence[ModeId], k: Optional[int] = None) -> "ParallelLayout":
        """Send the first k modes (all by default) into blocks with fresh ancillas"""
        modes = tuple(modes)
        k = len(modes) if k is None else k
        if not 1 <= k <= len(modes):
            raise LayoutError(f"Invalid number of circuits: {k} for {len(modes)} modes")

        taken = set(modes)
        pairs = []
        for mode in modes[:k]:
            ancilla = fresh_label(mode, taken)
            taken.add(ancilla)
            pairs.append((mode, ancilla))
        return cls(tuple(pairs), modes[k:])

    @property
    def inputs(self) -> Tuple[ModeId, ...]:
        return tuple(mode for mode, _ in self.pairs)

    @property
    def ancillas(self) -> Tuple[ModeId, ...]:
        return tuple(ancilla for _, ancilla in self.pairs)

    def validate(self, spec: WSpec):
        inputs, ancillas = self.inputs, self.ancillas
        if not self.pairs:
            raise LayoutError("Layout has no circuits")
        if len(set(inputs)) != len(inputs):
            raise LayoutError(f"A mode enters more than one circuit: {list(inputs)}")
        if set(inputs) & set(self.untouched):
            raise LayoutError("A mode is both paired and untouched")
        if set(inputs) | set(self.untouched) != set(spec.modes) or len(inputs) + len(self.untouched) != spec.n:
            raise LayoutError(f"Layout does not cover the W modes {list(spec.modes)}")
        if len(set(ancillas)) != len(ancillas) or set(ancillas) & set(spec.modes):
            raise LayoutError(f"Ancilla modes must be fresh and distinct: {list(ancillas)}")


@dataclass(frozen=True)
class CircuitStep:
    """One ancilla injection, gate, loss filter or measurement on named modes"""

    kind: str
    name: str
    modes: Tuple[ModeId, ...]

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "name": self.name, "modes": list(self.modes)}


@dataclass
class CircuitPlan:
    """Ordered steps of a scheme; gate steps list modes in gate-slot order"""

    steps: List[CircuitStep] = field(default_factory=list)

    def add_ancilla(self, mode: ModeId) -> "CircuitPlan":
        self.steps.append(CircuitStep("ancilla", "H", (mode,)))
        return self

    def add_gate(self, name: str, *modes: ModeId) -> "CircuitPlan":
        self.steps.append(CircuitStep("gate", name, tuple(modes)))
        return self

    def add_pdl(self, modes: Iterable[ModeId]) -> "CircuitPlan":
        for mode in modes:
            self.steps.append(CircuitStep("pdl", "PDL", (mode,)))
        return self

    def add_measurement(self, mode: ModeId) -> "CircuitPlan":
        self.steps.append(CircuitStep("measure", "HV", (mode,)))
        return self

    def extend(self, other: "CircuitPlan") -> "CircuitPlan":
        self.steps.extend(other.steps)
        return self

    @property
    def ancillas(self) -> List[ModeId]:
        return [step.modes[0] for step in self.steps if step.kind == "ancilla"]

    @property
    def two_qubit_gates(self) -> int:
        return sum(1 for step in self.steps if step.kind == "gate" and len(step.modes) == 2)

    @property
    def pdl_filters(self) -> int:
        return sum(1 for step in self.steps if step.kind == "pdl")

    @property
    def measurements(self) -> int:
        return sum(1 for step in self.steps if step.kind == "measure")

    def inverse(self) -> "CircuitPlan":
        """Reversed gate sequence with every gate replaced by its adjoint"""
        if any(step.kind != "gate" for step in self.steps):
            raise ValueError("Only pure gate sequences can be inverted")
        steps = [CircuitStep("gate", _adjoint_name(step.name), step.modes) for step in reversed(self.steps)]
        return CircuitPlan(steps)

    def run(self, state: PureState) -> PureState:
        """Execute ancilla, gate and PDL steps; measurements belong to the driver"""
        gates = registered_gates()
        for step in self.steps:
            if step.kind == "ancilla":
                state = tensor(state, basis_state([(step.modes[0], Polarization.H)]))
            elif step.kind == "gate":
                gate = _resolve_gate(gates, step.name)
                state = apply_2q(state, gate, *step.modes)
            elif step.kind == "pdl":
                state = pdl_filter(state, step.modes)
            else:
                raise ValueError(f"Unsupported plan step for run(): {step.kind}")
        return state

    def to_dict(self) -> Dict:
        return {
            "ancillas": self.ancillas,
            "two_qubit_gates": self.two_qubit_gates,
            "pdl_filters": self.pdl_filters,
            "measurements": self.measurements,
            "steps": [step.to_dict() for step in self.steps],
        }


def _adjoint_name(name: str) -> str:
    return name[: -len("^dag")] if name.endswith("^dag") else f"{name}^dag"


def _resolve_gate(gates, name: str):
    base = name[: -len("^dag")] if name.endswith("^dag") else name
    try:
        gate = gates[base]
    except KeyError:
        raise ValueError(f"Unsupported gate in plan: {name}") from None
    if gate.dim != 4:
        raise ValueError(f"Plan gate steps must be two-qubit gates, got {name}")
    return gate.dagger() if base != name else gate


@dataclass(frozen=True)
class ExpansionOutcome:
    """Renormalized output, exact success probability and fidelity to the target W"""

    state: PureState
    success_probability: float
    target: WSpec
    fidelity: float
    plan: CircuitPlan = field(default_factory=CircuitPlan)

    def to_dict(self, include_state: bool = False) -> Dict:
        result = {
            "target_n": self.target.n,
            "modes": list(self.target.modes),
            "success_probability": self.success_probability,
            "fidelity": self.fidelity,
            "resources": {
                "ancillas": len(self.plan.ancillas),
                "two_qubit_gates": self.plan.two_qubit_gates,
                "pdl_filters": self.plan.pdl_filters,
                "measurements": self.plan.measurements,
            },
        }
        if include_state:
            result["state"] = state_to_dict(self.state)
        return result


def _check_size(n_qubits: int):
    if n_qubits > MAX_QUBITS:
        raise ResourceLimitError(f"Scheme needs {n_qubits} qubits; the dense simulator is limited to {MAX_QUBITS}")


def _require_input(state: PureState, spec: WSpec):
    if set(state.modes) != set(spec.modes) or state.n != spec.n:
        raise ModeError(f"State modes {list(state.modes)} do not match W_{spec.n} modes {list(spec.modes)}")
    norm = norm_squared(state)
    if abs(norm - 1.0) > TOLERANCE:
        raise StateError(f"Input state must be unit norm, squared norm is {norm!r}")


def _outcome(state: PureState, plan: CircuitPlan, prior: float = 1.0) -> ExpansionOutcome:
    """Post-select: success probability from the squared norm, then renormalize"""
    probability = norm_squared(state)
    state = renormalize(state)
    target = WSpec.of(state)
    return ExpansionOutcome(state, prior * probability, target, fidelity(state, ideal_w(target)), plan)


def _chain(first: ExpansionOutcome, second: ExpansionOutcome) -> ExpansionOutcome:
    plan = CircuitPlan(list(first.plan.steps)).extend(second.plan)
    return ExpansionOutcome(
        second.state,
        first.success_probability * second.success_probability,
        second.target,
        second.fidelity,
        plan,
    )


def block_plan(ancilla: ModeId, input_mode: ModeId) -> CircuitPlan:
    """CH (control = input, target = ancilla) then CNOT (control = ancilla, target = input)"""
    # CH's control sits in its second slot, CNOT's in its first
    return CircuitPlan().add_gate("CH", ancilla, input_mode).add_gate("CNOT", ancilla, input_mode)


def expansion_block(state: PureState, ancilla: ModeId, input_mode: ModeId) -> PureState:
    """
    The expansion circuit on (ancilla, input):

        |a>|b> -> (|c>|a> + (-1)^(c+1) b |c+1>|a+1>) / sqrt(2)^b,  c = a xor b
    """
    if ancilla == input_mode:
        raise ModeError(f"Ancilla and input must be distinct modes, got {ancilla!r} twice")
    return block_plan(ancilla, input_mode).run(state)


def ideal_w(spec: WSpec) -> PureState:
    """Equal superposition of the n basis states with exactly one V"""
    _check_size(spec.n)
    amplitudes = np.zeros(1 << spec.n, dtype=np.complex128)
    amplitudes[[1 << i for i in range(spec.n)]] = 1.0 / np.sqrt(spec.n)
    return PureState(spec.modes, amplitudes)


def bell_pair(first: Polarization, second: Polarization) -> PureState:
    """Two independent photons through one block (ancilla in mode 1, input in mode 2)"""
    state = basis_state([(1, Polarization(first)), (2, Polarization(second))])
    return expansion_block(state, 1, 2)


def is_entangled_pair(state: PureState) -> bool:
    """Schmidt rank > 1 for a two-mode state"""
    if state.n != 2:
        raise ModeError(f"Expected a two-mode state, got {state.n} modes")
    singular_values = np.linalg.svd(state.as_tensor(), compute_uv=False)
    return int(np.sum(singular_values > TOLERANCE)) > 1


def cascade_step(w: PureState, spec: WSpec, input_mode: Optional[ModeId] = None) -> ExpansionOutcome:
    """
    Add one photon: one block on a single W qubit plus PDL on every other W mode.

    Succeeds with probability 1/2 + 1/(2n); W_1 -> W_2 is deterministic.
    """
    _require_input(w, spec)
    _check_size(spec.n + 1)

    input_mode = spec.modes[-1] if input_mode is None else input_mode
    if input_mode not in spec.modes:
        raise ModeError(f"Unknown input mode: {input_mode!r}")
    ancilla = fresh_label(input_mode, spec.modes)

    plan = CircuitPlan().add_ancilla(ancilla).extend(block_plan(ancilla, input_mode))
    plan.add_pdl(mode for mode in spec.modes if mode != input_mode)

    outcome = _outcome(plan.run(w), plan)
    logger.debug("Cascade W_%d -> W_%d: p=%.17g", spec.n, outcome.target.n, outcome.success_probability)
    return outcome


def cascade_expand(start_n: int, k: int) -> ExpansionOutcome:
    """k cascade steps starting from the ideal W_start_n (|V> for start_n = 1)"""
    if k < 1:
        raise ValueError(f"Invalid number of cascade steps: {k}. Must be >= 1")
    spec = WSpec(start_n)
    _check_size(start_n + k)

    outcome = ExpansionOutcome(ideal_w(spec), 1.0, spec, 1.0)
    for _ in range(k):
        outcome = _chain(outcome, cascade_step(outcome.state, outcome.target))
    return outcome


def parallel_double(w: PureState, spec: WSpec, layout: Optional[ParallelLayout] = None) -> ExpansionOutcome:
    """
    One block per W qubit, each with a fresh |H> ancilla, and no loss.

    W_n -> W_2n deterministically. Output modes are the W modes followed by
    the ancillas in pair order.
    """
    _require_input(w, spec)
    layout = layout or ParallelLayout.pairing(spec.modes)
    if layout.untouched:
        raise LayoutError("Full parallel doubling sends every mode into a block; use parallel_partial")
    layout.validate(spec)
    _check_size(spec.n + len(layout.pairs))

    plan = CircuitPlan()
    for ancilla in layout.ancillas:
        plan.add_ancilla(ancilla)
    for input_mode, ancilla in layout.pairs:
        plan.extend(block_plan(ancilla, input_mode))

    outcome = _outcome(plan.run(w), plan)
    logger.debug("Parallel W_%d -> W_%d: p=%.17g", spec.n, outcome.target.n, outcome.success_probability)
    return outcome


def parallel_partial(w: PureState, spec: WSpec, layout: ParallelLayout) -> ExpansionOutcome:
    """
    Blocks on k < n W qubits, PDL on the qubits that do not enter a circuit.

    W_n -> W_{n+k} with probability (n + k) / (2n).
    """
    _require_input(w, spec)
    if not layout.untouched:
        raise LayoutError("Partial expansion needs untouched modes; use parallel_double")
    layout.validate(spec)
    _check_size(spec.n + len(layout.pairs))

    plan = CircuitPlan()
    for ancilla in layout.ancillas:
        plan.add_ancilla(ancilla)
    for input_mode, ancilla in layout.pairs:
        plan.extend(block_plan(ancilla, input_mode))
    plan.add_pdl(layout.untouched)

    outcome = _outcome(plan.run(w), plan)
    logger.debug(
        "Partial W_%d with %d circuits -> W_%d: p=%.17g",
        spec.n,
        len(layout.pairs),
        outcome.target.n,
        outcome.success_probability,
    )
    return outcome


def odd_add_one(w2n: PureState, spec: WSpec) -> ExpansionOutcome:
    """W_2N -> W_2N+1 by one cascade step: p = 1/2 + 1/(4N)"""
    if spec.n % 2:
        raise ValueError(f"Unsupported odd input size {spec.n}; odd_add_one expects W_2N")
    return cascade_step(w2n, spec)


def odd_project(
    w2n2: PureState, spec: WSpec, mode: Optional[ModeId] = None
) -> Tuple[ExpansionOutcome, PureState]:
    """
    Measure one qubit of W_2N+2.

    H leaves W_2N+1 on the other modes with probability 1 - 1/(2(N+1)); V
    leaves every other mode in |H> and the entanglement is gone.
    """
    _require_input(w2n2, spec)
    if spec.n < 2:
        raise ValueError(f"Invalid W state size for projection: {spec.n}. Must be >= 2")

    mode = spec.modes[-1] if mode is None else mode
    success, failure = measure(w2n2, mode, remove=True)
    plan = CircuitPlan().add_measurement(mode)

    target = WSpec.of(success.post_state)
    outcome = ExpansionOutcome(
        success.post_state,
        success.probability,
        target,
        fidelity(success.post_state, ideal_w(target)),
        plan,
    )
    logger.debug("Projection W_%d -> W_%d: p=%.17g", spec.n, target.n, outcome.success_probability)
    return outcome, failure.post_state


def verify_back(
    candidate: PureState,
    spec: WSpec,
    layers: Optional[int] = 1,
    tolerance: float = VERIFY_TOLERANCE,
) -> bool:
    """
    Run a candidate backwards through parallel doubling and check what comes out.

    Each layer pairs modes[i] with modes[n + i] (the ordering parallel_double
    produces), applies the inverse blocks in reverse order and requires every
    ancilla slot to read H with certainty. After the last layer the residual
    must be the ideal W state. ``layers=None`` keeps undoing layers while the
    size stays even, ending at W_1 = |V> for power-of-two sizes.
    """
    if spec.n % 2 or candidate.n % 2:
        raise ValueError(f"Unsupported odd mode count {candidate.n}; verify_back expects W_2n")
    _require_input(candidate, spec)

    state = candidate
    depth = 0
    while layers is None or depth < layers:
        if state.n % 2:
            if layers is None:
                break
            raise ValueError(f"Cannot undo layer {depth + 1}: {state.n} modes left")

        half = state.n // 2
        pairs = list(zip(state.modes[:half], state.modes[half:]))
        plan = CircuitPlan()
        for input_mode, ancilla in pairs:
            plan.extend(block_plan(ancilla, input_mode))
        state = plan.inverse().run(state)

        for _, ancilla in pairs:
            h_branch, v_branch = measure(state, ancilla, remove=True)
            if v_branch.probability > tolerance:
                logger.debug("Rejected: ancilla %r reads V with p=%.3e", ancilla, v_branch.probability)
                return False
            state = h_branch.post_state
        depth += 1

    residual = fidelity(state, ideal_w(WSpec.of(state)))
    logger.debug("Residual fidelity after %d layer(s): %.17g", depth, residual)
    return residual >= 1.0 - tolerance


def prepare_w(target_n: int, odd_strategy: str = "project") -> ExpansionOutcome:
    """
    Build W_n from the single photon |V>.

    Even sizes come from W_{n/2} by parallel doubling; odd sizes use the
    chosen odd strategy on the neighbouring even size.
    """
    if odd_strategy not in ODD_STRATEGIES:
        raise ValueError(f"Unsupported odd strategy: {odd_strategy}. Supported: {', '.join(ODD_STRATEGIES)}")
    if target_n < 1:
        raise ValueError(f"Invalid W state size: {target_n}. Must be >= 1")
    _check_size(target_n + (target_n % 2 if odd_strategy == "project" else 0))

    def build(n: int) -> ExpansionOutcome:
        if n == 1:
            spec = WSpec(1)
            return ExpansionOutcome(ideal_w(spec), 1.0, spec, 1.0)
        if n % 2 == 0:
            base = build(n // 2)
            return _chain(base, parallel_double(base.state, base.target))
        if odd_strategy == "add":
            base = build(n - 1)
            return _chain(base, odd_add_one(base.state, base.target))
        base = build(n + 1)
        projected, _ = odd_project(base.state, base.target)
        return _chain(base, projected)

    outcome = build(target_n)
    logger.debug("Prepared W_%d (%s): p=%.17g", target_n, odd_strategy, outcome.success_probability)
    return outcome


def run_descriptor(descriptor: Dict) -> ExpansionOutcome:
    """
    Dispatch a run descriptor such as
        {"scheme": "partial", "start_n": 3, "k": 2}
        {"scheme": "prepare", "target_n": 5, "odd_strategy": "project"}
    """
    if not isinstance(descriptor, dict):
        raise ValueError(f"Run descriptor must be a mapping, got {type(descriptor).__name__}")
    scheme = descriptor.get("scheme")
    if scheme not in SCHEMES:
        raise ValueError(f"Unsupported scheme: {scheme!r}. Supported: {', '.join(SCHEMES)}")

    def require(key: str) -> int:
        value = descriptor.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"Scheme {scheme} needs an integer '{key}'")
        return value

    if scheme == "prepare":
        return prepare_w(require("target_n"), descriptor.get("odd_strategy", "project"))
    if scheme == "cascade":
        return cascade_expand(require("start_n"), require("k"))

    spec = WSpec(require("start_n"))
    w = ideal_w(spec)
    if scheme == "parallel":
        return parallel_double(w, spec)
    if scheme == "partial":
        return parallel_partial(w, spec, ParallelLayout.pairing(spec.modes, require("k")))
    if scheme == "odd_add":
        return odd_add_one(w, spec)
    outcome, _ = odd_project(w, spec)
    return outcome


__all__ = [
    "MAX_QUBITS",
    "VERIFY_TOLERANCE",
    "SCHEMES",
    "ODD_STRATEGIES",
    "WSpec",
    "ParallelLayout",
    "CircuitStep",
    "CircuitPlan",
    "ExpansionOutcome",
    "fresh_label",
    "block_plan",
    "expansion_block",
    "ideal_w",
    "bell_pair",
    "is_entangled_pair",
    "cascade_step",
    "cascade_expand",
    "parallel_double",
    "parallel_partial",
    "odd_add_one",
    "odd_project",
    "verify_back",
    "prepare_w",
    "run_descriptor",
]
