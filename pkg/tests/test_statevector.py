"""
Tests for the state vector kernels and codec
"""

import json
import pytest
import sys
from pathlib import Path

import numpy as np
from scipy.stats import unitary_group

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.exceptions import ModeError, StateError
from modules.statevector import (
    Polarization,
    PureState,
    apply_1q,
    apply_2q,
    basis_label,
    basis_state,
    dumps_state,
    fidelity,
    load_state,
    loads_state,
    measure,
    norm_squared,
    pdl_filter,
    renormalize,
    reorder,
    sample_counts,
    save_state,
    state_from_dict,
    tensor,
    to_ket_string,
)

H, V = Polarization.H, Polarization.V


def haar_state(n_modes, seed, modes=None):
    """Haar-random pure state: first column of a Haar unitary"""
    vector = unitary_group.rvs(2 ** n_modes, random_state=seed)[:, 0]
    return PureState(tuple(modes or range(1, n_modes + 1)), vector)


class TestPolarization:
    """Test cases for Polarization parsing"""

    def test_from_letter_case_insensitive(self):
        """Test that letters parse regardless of case"""
        assert Polarization.from_letter("h") is H
        assert Polarization.from_letter(" V ") is V

    def test_from_letter_invalid(self):
        """Test that anything but H or V is rejected"""
        with pytest.raises(ValueError, match="Invalid polarization"):
            Polarization.from_letter("x")


class TestPureState:
    """Test cases for PureState construction"""

    def test_basis_state_encoding(self):
        """Test that bit i of the index is the polarization of modes[i]"""
        state = basis_state([(1, H), (2, V), (3, V)])
        assert state.modes == (1, 2, 3)
        assert np.flatnonzero(state.amplitudes).tolist() == [0b110]
        assert state.amplitude({1: H, 2: V, 3: V}) == 1.0

    def test_basis_state_duplicate_modes(self):
        """Test that duplicate labels are rejected"""
        with pytest.raises(ModeError):
            basis_state([(1, H), (1, V)])

    def test_basis_state_empty(self):
        """Test that at least one mode is required"""
        with pytest.raises(ValueError):
            basis_state([])

    def test_wrong_amplitude_count(self):
        """Test that the amplitude vector must have 2^n entries"""
        with pytest.raises(StateError, match="Expected 4 amplitudes"):
            PureState((1, 2), np.ones(3))

    def test_norm_above_one_rejected(self):
        """Test that super-normalized vectors are rejected"""
        with pytest.raises(StateError, match="exceeds 1"):
            PureState((1,), [1.0, 1.0])

    def test_subnormalized_allowed(self):
        """Test that post-selected states may carry norm below one"""
        state = PureState((1,), [0.5, 0.0])
        assert norm_squared(state) == pytest.approx(0.25)

    def test_amplitudes_read_only(self):
        """Test that amplitudes cannot be mutated in place"""
        state = basis_state([(1, H)])
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0

    def test_unknown_mode(self):
        """Test lookup of a mode that is not present"""
        with pytest.raises(ModeError, match="Unknown mode"):
            basis_state([(1, H)]).index_of(7)


class TestKernels:
    """Test cases for gate application"""

    X = np.array([[0, 1], [1, 0]])
    CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])

    def test_apply_1q_targets_named_mode(self):
        """Test that a flip lands on the requested mode only"""
        state = apply_1q(basis_state([(1, H), (2, V)]), self.X, 1)
        assert state.amplitude({1: V, 2: V}) == 1.0

    def test_apply_2q_slot_order(self):
        """Test that mode_a is the first tensor factor of the gate"""
        state = basis_state([(1, V), (2, H)])
        flipped = apply_2q(state, self.CNOT, 1, 2)
        untouched = apply_2q(state, self.CNOT, 2, 1)
        assert flipped.amplitude({1: V, 2: V}) == 1.0
        assert untouched.amplitude({1: V, 2: H}) == 1.0

    @pytest.mark.parametrize("a, b", [(H, H), (H, V), (V, H), (V, V)])
    def test_apply_2q_cnot_matches_dense_matrix(self, a, b):
        """Test every CNOT basis input against the 4x4 matrix, with a spectator mode in between"""
        out = apply_2q(basis_state([(1, a), (2, V), (3, b)]), self.CNOT, 1, 3)
        column = self.CNOT[:, 2 * int(a) + int(b)]
        for row, expected in enumerate(column):
            assignment = {1: Polarization(row >> 1), 2: V, 3: Polarization(row & 1)}
            assert out.amplitude(assignment) == expected
        assert norm_squared(out) == 1.0

    @pytest.mark.parametrize("seed", range(10))
    def test_disjoint_modes_commute(self, seed):
        """Test that gates on disjoint modes give the same state in either order"""
        state = haar_state(4, seed)
        u1 = unitary_group.rvs(2, random_state=seed + 300)
        u2 = unitary_group.rvs(4, random_state=seed + 400)
        u3 = unitary_group.rvs(4, random_state=seed + 500)

        one_then_two = apply_2q(apply_1q(state, u1, 2), u2, 4, 1)
        two_then_one = apply_1q(apply_2q(state, u2, 4, 1), u1, 2)
        assert np.max(np.abs(one_then_two.amplitudes - two_then_one.amplitudes)) <= 1e-12

        pair_first = apply_2q(apply_2q(state, u2, 1, 2), u3, 3, 4)
        pair_second = apply_2q(apply_2q(state, u3, 3, 4), u2, 1, 2)
        assert np.max(np.abs(pair_first.amplitudes - pair_second.amplitudes)) <= 1e-12

    def test_apply_2q_non_adjacent_modes(self):
        """Test a two-qubit gate on modes that are not neighbours"""
        state = basis_state([("a", V), ("b", H), ("c", H)])
        out = apply_2q(state, self.CNOT, "a", "c")
        assert out.amplitude({"a": V, "b": H, "c": V}) == 1.0

    def test_apply_2q_same_mode(self):
        """Test that a two-qubit gate needs distinct modes"""
        with pytest.raises(ModeError):
            apply_2q(basis_state([(1, H), (2, H)]), self.CNOT, 1, 1)

    def test_apply_1q_wrong_shape(self):
        """Test that a 4x4 matrix is not accepted as a single-qubit gate"""
        with pytest.raises(ValueError, match="Invalid gate shape"):
            apply_1q(basis_state([(1, H)]), self.CNOT, 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_unitaries_preserve_norm(self, seed):
        """Test norm preservation under Haar-random one- and two-qubit unitaries"""
        state = haar_state(4, seed)
        u1 = unitary_group.rvs(2, random_state=seed + 100)
        u2 = unitary_group.rvs(4, random_state=seed + 200)
        out = apply_2q(apply_1q(state, u1, 3), u2, 4, 2)
        assert norm_squared(out) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n_modes", range(2, 11))
    def test_norm_preserved_up_to_ten_modes(self, n_modes):
        """Test norm preservation of a random gate sequence on registers of 2 to 10 modes"""
        rng = np.random.default_rng(n_modes)
        vector = rng.normal(size=2 ** n_modes) + 1j * rng.normal(size=2 ** n_modes)
        state = PureState(tuple(range(1, n_modes + 1)), vector / np.linalg.norm(vector))

        for step in range(2 * n_modes):
            a, b = rng.choice(n_modes, size=2, replace=False) + 1
            state = apply_1q(state, unitary_group.rvs(2, random_state=1000 * n_modes + step), int(a))
            state = apply_2q(state, unitary_group.rvs(4, random_state=2000 * n_modes + step), int(a), int(b))
        assert norm_squared(state) == pytest.approx(1.0, abs=1e-12)


class TestPdlFilter:
    """Test cases for the polarization dependent loss filter"""

    def test_pdl_on_h_is_lossless(self):
        """Test that H passes the filter unchanged"""
        state = pdl_filter(basis_state([(1, H)]), [1])
        assert norm_squared(state) == pytest.approx(1.0)

    def test_pdl_on_v_halves_probability(self):
        """Test that V survives with probability 1/2"""
        state = pdl_filter(basis_state([(1, V)]), [1])
        assert norm_squared(state) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize(
        "modes, expected",
        [([1, 1], 0.5), ([1, 2, 1], 0.25), ((m for m in [2, 1, 2]), 0.25), ([2, 2, 2], 0.5)],
    )
    def test_repeated_mode_filtered_once(self, modes, expected):
        """Test that listing a mode twice does not square its attenuation"""
        state = pdl_filter(basis_state([(1, V), (2, V)]), modes)
        assert norm_squared(state) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_pdl_contraction(self, seed):
        """Test that the filter never increases the norm and matches the per-basis weights"""
        state = haar_state(3, seed)
        out = pdl_filter(state, [1, 3])
        weights = np.array([0.5 ** (((i >> 0) & 1) + ((i >> 2) & 1)) for i in range(8)])
        expected = float(np.sum(np.abs(state.amplitudes) ** 2 * weights))
        assert norm_squared(out) <= norm_squared(state) + 1e-15
        assert norm_squared(out) == pytest.approx(expected, abs=1e-12)

    def test_renormalize_zero_state(self):
        """Test that a zero vector cannot be renormalized"""
        with pytest.raises(StateError):
            renormalize(PureState((1,), [0.0, 0.0]))


class TestMeasure:
    """Test cases for projective measurement"""

    @pytest.mark.parametrize("seed", range(10))
    def test_branch_completeness(self, seed):
        """Test that branch weights sum to the pre-measurement norm"""
        state = haar_state(3, seed)
        state = state.with_amplitudes(0.6 * state.amplitudes)
        h_branch, v_branch = measure(state, 2)
        assert h_branch.probability + v_branch.probability == pytest.approx(norm_squared(state), abs=1e-12)
        assert norm_squared(h_branch.post_state) == pytest.approx(1.0, abs=1e-12)

    def test_measure_keeps_mode_by_default(self):
        """Test that the measured mode collapses but stays in the state"""
        bell = PureState((1, 2), np.array([0, 1, 1, 0]) / np.sqrt(2))
        h_branch, v_branch = measure(bell, 1)
        assert h_branch.post_state.modes == (1, 2)
        assert h_branch.post_state.amplitude({1: H, 2: V}) == pytest.approx(1.0)
        assert v_branch.post_state.amplitude({1: V, 2: H}) == pytest.approx(1.0)

    def test_measure_remove(self):
        """Test that remove=True drops the measured mode"""
        bell = PureState((1, 2), np.array([0, 1, 1, 0]) / np.sqrt(2))
        h_branch, _ = measure(bell, 1, remove=True)
        assert h_branch.post_state.modes == (2,)
        assert h_branch.outcome is H

    def test_zero_probability_branch(self):
        """Test that an impossible branch has no post-state"""
        _, v_branch = measure(basis_state([(1, H), (2, H)]), 2)
        assert v_branch.probability == 0.0
        assert v_branch.post_state is None

    def test_measure_zero_norm(self):
        """Test that a zero-norm state cannot be measured"""
        with pytest.raises(StateError):
            measure(PureState((1,), [0.0, 0.0]), 1)


class TestStateAlgebra:
    """Test cases for tensor, reorder and fidelity"""

    def test_tensor_mode_order(self):
        """Test that the first factor's modes come first"""
        state = tensor(basis_state([(1, V)]), basis_state([("1a", H)]))
        assert state.modes == (1, "1a")
        assert state.amplitude({1: V, "1a": H}) == 1.0

    def test_tensor_overlap(self):
        """Test that factors must act on disjoint modes"""
        with pytest.raises(ModeError, match="Overlapping"):
            tensor(basis_state([(1, V)]), basis_state([(1, H)]))

    def test_reorder(self):
        """Test that reordering keeps the physical state"""
        state = basis_state([(1, V), (2, H), (3, H)])
        moved = reorder(state, (3, 1, 2))
        assert moved.modes == (3, 1, 2)
        assert moved.amplitude({1: V, 2: H, 3: H}) == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_fidelity_label_aligned(self, seed):
        """Test that fidelity matches modes by label, not position"""
        state = haar_state(3, seed)
        assert fidelity(state, reorder(state, (2, 3, 1))) == pytest.approx(1.0, abs=1e-12)

    def test_fidelity_orthogonal(self):
        """Test fidelity of orthogonal basis states"""
        assert fidelity(basis_state([(1, H)]), basis_state([(1, V)])) == 0.0

    def test_fidelity_mismatched_modes(self):
        """Test that fidelity needs identical mode sets"""
        with pytest.raises(ModeError):
            fidelity(basis_state([(1, H)]), basis_state([(2, H)]))


class TestFormatting:
    """Test cases for display and sampling helpers"""

    def test_basis_label(self):
        """Test letters are written in mode order"""
        assert basis_label(0b01, 2) == "VH"

    def test_ket_string(self):
        """Test pretty-printing of a Bell state"""
        bell = PureState((1, 2), np.array([0, 1, 1, 0]) / np.sqrt(2))
        assert to_ket_string(bell) == "0.70710678|VH> + 0.70710678|HV>"

    def test_ket_string_negative_and_cutoff(self):
        """Test signs and suppression of negligible amplitudes"""
        state = PureState((1,), [np.sqrt(0.5), -np.sqrt(0.5) + 1e-17])
        assert to_ket_string(state, precision=3) == "0.707|H> - 0.707|V>"
        assert to_ket_string(PureState((1,), [1e-15, 0.0])) == "0"

    def test_sample_counts_seeded(self):
        """Test that sampling is reproducible for a fixed seed"""
        state = haar_state(3, 1)
        first = sample_counts(state, 500, seed=42)
        second = sample_counts(state, 500, seed=42)
        assert first == second
        assert sum(first.values()) == 500
        assert all(len(label) == 3 for label in first)

    def test_sample_counts_invalid_shots(self):
        """Test that at least one shot is required"""
        with pytest.raises(ValueError):
            sample_counts(basis_state([(1, H)]), 0)


class TestCodec:
    """Test cases for JSON serialization"""

    def test_round_trip_bitwise(self):
        """Test that load(save(state)) reproduces amplitudes bit for bit"""
        rng = np.random.default_rng(2024)
        for trial in range(100):
            n = int(rng.integers(1, 6))
            modes = [f"m{i}" if i % 2 else i for i in range(n)]
            state = haar_state(n, trial, modes)
            restored = loads_state(dumps_state(state))
            assert restored.modes == state.modes
            assert np.array_equal(restored.amplitudes, state.amplitudes)

    def test_file_round_trip(self, tmp_path):
        """Test saving to and loading from disk"""
        state = haar_state(2, 9)
        path = tmp_path / "state.json"
        save_state(state, path)
        assert np.array_equal(load_state(path).amplitudes, state.amplitudes)

    def test_truncated_json(self):
        """Test that malformed JSON raises StateError"""
        text = dumps_state(basis_state([(1, H)]))
        with pytest.raises(StateError, match="Malformed"):
            loads_state(text[:-5])

    @pytest.mark.parametrize(
        "payload",
        [
            {"modes": [1]},
            {"modes": "12", "amplitudes": [[1, 0], [0, 0]]},
            {"modes": [1], "amplitudes": [[1], [0]]},
            [1, 2],
        ],
    )
    def test_invalid_payloads(self, payload):
        """Test that structurally invalid payloads raise StateError"""
        with pytest.raises(StateError):
            state_from_dict(payload)

    @pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity"])
    def test_non_finite_amplitudes(self, token):
        """Test that NaN and infinite amplitudes are rejected on load"""
        text = '{"modes": [1], "amplitudes": [[' + token + ', 0.0], [0.0, 0.0]]}'
        with pytest.raises(StateError, match="finite"):
            loads_state(text)

    def test_non_finite_constructor(self):
        """Test that PureState itself refuses a NaN amplitude"""
        with pytest.raises(StateError, match="finite"):
            PureState((1,), [complex("nan"), 0.0])

    def test_wire_format(self):
        """Test the field layout of the serialized form"""
        data = json.loads(dumps_state(basis_state([(1, V), ("1a", H)])))
        assert data == {"modes": [1, "1a"], "amplitudes": [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]}
