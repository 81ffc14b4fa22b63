"""
Analysis Module
Closed-form success probabilities of the expansion schemes and their
cross-validation against full state-vector simulation.

Formulas are evaluated in exact rationals; pass ``exact=True`` to get the
Fraction, otherwise the value is converted to float at the boundary.
"""

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from tabulate import tabulate

from modules.exceptions import ResourceLimitError
from modules.schemes import (
    MAX_QUBITS,
    ODD_STRATEGIES,
    ParallelLayout,
    WSpec,
    cascade_expand,
    cascade_step,
    ideal_w,
    odd_add_one,
    odd_project,
    parallel_double,
    parallel_partial,
    prepare_w,
)
from modules.statevector import TOLERANCE

logger = logging.getLogger(__name__)

Probability = Union[float, Fraction]

THREADS_ENV_VAR = "WEXPAND_THREADS"
CSV_COLUMNS = ("scheme", "size", "analytic", "simulated", "abs_delta")


def _require_at_least(name: str, value: int, minimum: int = 1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValueError(f"Invalid {name}: {value!r}. Must be an integer >= {minimum}")


def _boundary(value: Fraction, exact: bool) -> Probability:
    return value if exact else float(value)


def p_step(N: int, exact: bool = False) -> Probability:
    """p(W_N -> W_N+1) = 1/2 + 1/(2N)"""
    _require_at_least("N", N)
    return _boundary(Fraction(1, 2) + Fraction(1, 2 * N), exact)


def p_from_single(k: int, exact: bool = False) -> Probability:
    """p(W_1 -> W_k+1) = (k + 1) 2^-k"""
    _require_at_least("k", k)
    return _boundary(Fraction(k + 1, 2**k), exact)


def p_double_cascade(N: int, exact: bool = False) -> Probability:
    """p(W_N -> W_2N) by N cascade steps = 2^(1 - N)"""
    _require_at_least("N", N)
    return _boundary(Fraction(2, 2**N), exact)


def p_partial(n: int, k: int, exact: bool = False) -> Probability:
    """k of n W qubits in blocks, PDL on the rest: (n + k) / (2n)"""
    _require_at_least("n", n)
    _require_at_least("k", k)
    if k > n:
        raise ValueError(f"Invalid number of circuits: {k} > {n}")
    return _boundary(Fraction(n + k, 2 * n), exact)


def p_odd_add(N: int, exact: bool = False) -> Probability:
    """p(W_2N -> W_2N+1) by one cascade step = 1/2 + 1/(4N)"""
    _require_at_least("N", N)
    return _boundary(Fraction(1, 2) + Fraction(1, 4 * N), exact)


def p_odd_project(N: int, exact: bool = False) -> Probability:
    """p(W_2N+2 -> W_2N+1) by measuring one qubit = 1 - 1/(2(N + 1))"""
    _require_at_least("N", N)
    return _boundary(1 - Fraction(1, 2 * (N + 1)), exact)


def p_prepare(n: int, odd_strategy: str = "project", exact: bool = False) -> Probability:
    """Success probability of prepare_w: product along the doubling recursion"""
    _require_at_least("n", n)
    if odd_strategy not in ODD_STRATEGIES:
        raise ValueError(f"Unsupported odd strategy: {odd_strategy}. Supported: {', '.join(ODD_STRATEGIES)}")

    def recurse(m: int) -> Fraction:
        if m == 1:
            return Fraction(1)
        if m % 2 == 0:
            return recurse(m // 2)
        if odd_strategy == "add":
            return recurse(m - 1) * p_odd_add((m - 1) // 2, exact=True)
        return recurse(m + 1) * p_odd_project((m - 1) // 2, exact=True)

    return _boundary(recurse(n), exact)


def expected_probability(descriptor: Dict, exact: bool = False) -> Probability:
    """Closed-form success probability of a run descriptor (see schemes.run_descriptor)"""
    scheme = descriptor.get("scheme")
    if scheme == "prepare":
        return p_prepare(descriptor["target_n"], descriptor.get("odd_strategy", "project"), exact)

    n = descriptor["start_n"]
    _require_at_least("start_n", n)
    if scheme == "cascade":
        value = Fraction(1)
        for m in range(n, n + descriptor["k"]):
            value *= p_step(m, exact=True)
    elif scheme == "parallel":
        value = Fraction(1)
    elif scheme == "partial":
        value = p_partial(n, descriptor["k"], exact=True)
    elif scheme == "odd_add":
        value = p_odd_add(n // 2, exact=True)
    elif scheme == "odd_project":
        # 1 - 1/(2(N + 1)) with n = 2N + 2
        value = Fraction(n - 1, n)
    else:
        raise ValueError(f"Unsupported scheme: {scheme!r}")
    return _boundary(value, exact)


@dataclass(frozen=True)
class FormulaRow:
    scheme: str
    size: str
    analytic: float
    simulated: float
    abs_delta: float

    @property
    def sort_key(self) -> Tuple:
        return (self.scheme, tuple(int(part) for part in self.size.split("/")))


@dataclass
class FormulaTable:
    """Analytic vs simulated success probabilities, one row per (scheme, size)"""

    rows: List[FormulaRow] = field(default_factory=list)
    tolerance: float = TOLERANCE

    @property
    def max_delta(self) -> float:
        return max((row.abs_delta for row in self.rows), default=0.0)

    def failures(self) -> List[FormulaRow]:
        return [row for row in self.rows if not row.abs_delta <= self.tolerance]

    def passed(self) -> bool:
        return not self.failures()

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [row.scheme, row.size] + [f"{value:.17g}" for value in (row.analytic, row.simulated, row.abs_delta)]
            )
        return buffer.getvalue()

    def to_json(self) -> str:
        payload = {
            "tolerance": self.tolerance,
            "passed": self.passed(),
            "rows": [asdict(row) for row in self.rows],
        }
        return json.dumps(payload, indent=2) + "\n"

    def save(self, path: Path, fmt: str = "csv"):
        if fmt not in ("csv", "json"):
            raise ValueError(f"Unsupported output format: {fmt}. Supported: csv, json")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv() if fmt == "csv" else self.to_json())


def threads_from_env(default: int = 1) -> int:
    """Worker count from WEXPAND_THREADS, falling back to ``default``"""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return default
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        logger.warning("Ignoring invalid %s=%r, using %d worker(s)", THREADS_ENV_VAR, raw, default)
        return default
    return threads


class CrossValidator:
    """Runs every scheme at every size up to max_n and compares with the formulas"""

    def __init__(self, max_n: int, threads: Optional[int] = None, tolerance: float = TOLERANCE):
        _require_at_least("max_n", max_n)
        # doubling W_max_n is the largest register of the sweep
        if 2 * max_n > MAX_QUBITS:
            raise ResourceLimitError(
                f"max_n={max_n} needs {2 * max_n} qubits; the dense simulator is limited to {MAX_QUBITS}"
            )
        self.max_n = max_n
        self.threads = threads if threads is not None else threads_from_env()
        self.tolerance = tolerance

    def cells(self) -> List[Tuple[str, str, Callable[[], float], Callable[[], float]]]:
        """(scheme, size, analytic, simulate) for every cell of the sweep"""
        cells = []
        sizes = range(1, self.max_n + 1)

        for N in sizes:
            cells.append(("cascade", str(N), lambda N=N: p_step(N), lambda N=N: _simulate_step(N)))
        for k in sizes:
            cells.append(
                ("cascade_single", str(k), lambda k=k: p_from_single(k), lambda k=k: cascade_expand(1, k).success_probability)
            )
        for N in sizes:
            cells.append(
                ("cascade_double", str(N), lambda N=N: p_double_cascade(N), lambda N=N: cascade_expand(N, N).success_probability)
            )
        for n in sizes:
            cells.append(("parallel", str(n), lambda: 1.0, lambda n=n: _simulate_parallel(n)))
        for n in sizes:
            for k in range(1, n):
                cells.append(
                    ("partial", f"{n}/{k}", lambda n=n, k=k: p_partial(n, k), lambda n=n, k=k: _simulate_partial(n, k))
                )
        for N in range(1, self.max_n // 2 + 1):
            cells.append(("odd_add", str(N), lambda N=N: p_odd_add(N), lambda N=N: _simulate_odd_add(N)))
        for N in range(1, (self.max_n - 2) // 2 + 1):
            cells.append(("odd_project", str(N), lambda N=N: p_odd_project(N), lambda N=N: _simulate_odd_project(N)))
        for strategy in ODD_STRATEGIES:
            for n in sizes:
                cells.append(
                    (
                        f"prepare_{strategy}",
                        str(n),
                        lambda n=n, s=strategy: p_prepare(n, s),
                        lambda n=n, s=strategy: prepare_w(n, s).success_probability,
                    )
                )
        return cells

    def _evaluate(self, cell) -> FormulaRow:
        scheme, size, analytic_fn, simulate_fn = cell
        analytic = analytic_fn()
        simulated = simulate_fn()
        row = FormulaRow(scheme, size, analytic, simulated, abs(analytic - simulated))
        logger.debug("%s[%s]: analytic=%.17g simulated=%.17g", scheme, size, analytic, simulated)
        return row

    def run(self) -> FormulaTable:
        cells = self.cells()
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                rows = list(pool.map(self._evaluate, cells))
        else:
            rows = [self._evaluate(cell) for cell in cells]
        rows.sort(key=lambda row: row.sort_key)
        return FormulaTable(rows, self.tolerance)

    def print_summary(self, table: FormulaTable):
        """Print the sweep as a grid"""
        print("\n" + "=" * 60)
        print("📐 FORMULA CROSS-VALIDATION")
        print("=" * 60)

        table_data = [["Scheme", "Size", "Analytic", "Simulated", "|Δ|"]]
        for row in table.rows:
            table_data.append(
                [row.scheme, row.size, f"{row.analytic:.12g}", f"{row.simulated:.12g}", f"{row.abs_delta:.3e}"]
            )
        print(tabulate(table_data, headers="firstrow", tablefmt="grid"))

        status = "✅ All rows agree" if table.passed() else f"❌ {len(table.failures())} row(s) disagree"
        print(f"{status} (max |Δ| = {table.max_delta:.3e}, tolerance {table.tolerance:g})")
        print("=" * 60)


def _simulate_step(N: int) -> float:
    spec = WSpec(N)
    return cascade_step(ideal_w(spec), spec).success_probability


def _simulate_parallel(n: int) -> float:
    spec = WSpec(n)
    return parallel_double(ideal_w(spec), spec).success_probability


def _simulate_partial(n: int, k: int) -> float:
    spec = WSpec(n)
    return parallel_partial(ideal_w(spec), spec, ParallelLayout.pairing(spec.modes, k)).success_probability


def _simulate_odd_add(N: int) -> float:
    spec = WSpec(2 * N)
    return odd_add_one(ideal_w(spec), spec).success_probability


def _simulate_odd_project(N: int) -> float:
    spec = WSpec(2 * N + 2)
    outcome, _ = odd_project(ideal_w(spec), spec)
    return outcome.success_probability


def cross_validate(max_n: int, threads: Optional[int] = None) -> FormulaTable:
    """Full analytic-vs-simulation sweep up to max_n"""
    return CrossValidator(max_n, threads=threads).run()


__all__ = [
    "THREADS_ENV_VAR",
    "p_step",
    "p_from_single",
    "p_double_cascade",
    "p_partial",
    "p_odd_add",
    "p_odd_project",
    "p_prepare",
    "expected_probability",
    "FormulaRow",
    "FormulaTable",
    "CrossValidator",
    "threads_from_env",
    "cross_validate",
]
