#!/usr/bin/env python3
"""
W-State Expansion Toolkit
Command-line front end: run expansion schemes, cross-validate the closed-form
success probabilities, verify candidate W states and dump the gate set.

Exit codes: 0 success, 1 usage error, 2 validation failure / reject,
3 resource bound exceeded.
"""

import argparse
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from tabulate import tabulate

# Fix Windows encoding issues
if platform.system() == "Windows":
    if sys.stdout.encoding != 'utf-8':
        sys.stdout.reconfigure(encoding='utf-8')
    if sys.stderr.encoding != 'utf-8':
        sys.stderr.reconfigure(encoding='utf-8')

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.analysis import CrossValidator, expected_probability
from modules.exceptions import ResourceLimitError, WExpandError
from modules.gates import dump_registry
from modules.schemes import (
    MAX_QUBITS,
    ODD_STRATEGIES,
    SCHEMES,
    VERIFY_TOLERANCE,
    WSpec,
    bell_pair,
    is_entangled_pair,
    run_descriptor,
    verify_back,
)
from modules.statevector import (
    TOLERANCE,
    Polarization,
    load_state,
    sample_counts,
    state_to_dict,
    to_ket_string,
)

logger = logging.getLogger("wexpand")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3

COMMANDS = ("bell", "run", "validate", "verify", "dump-gates")


class UsageError(WExpandError):
    """Bad command-line input"""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exit code 1 instead of 2"""

    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Everything a command needs, checked before any computation starts"""

    command: str
    scheme: Optional[str] = None
    n: Optional[int] = None
    k: Optional[int] = None
    odd_strategy: str = "project"
    descriptor: Optional[Path] = None
    letters: Optional[List[str]] = None
    state_file: Optional[Path] = None
    out: Optional[Path] = None
    fmt: str = "json"
    seed: Optional[int] = None
    shots: Optional[int] = None
    tolerance: Optional[float] = None
    include_state: bool = False
    verbose: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"Unsupported command: {self.command}. Supported: {', '.join(COMMANDS)}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise UsageError(f"Invalid tolerance: {self.tolerance}. Must be > 0")
        if self.shots is not None and self.shots < 1:
            raise UsageError(f"Invalid shot count: {self.shots}. Must be >= 1")
        if self.seed is not None and self.seed < 0:
            raise UsageError(f"Invalid seed: {self.seed}. Must be >= 0")

        if self.command == "bell":
            if not self.letters or len(self.letters) != 2:
                raise UsageError("bell needs exactly two polarizations, e.g. 'H V'")
            try:
                [Polarization.from_letter(letter) for letter in self.letters]
            except ValueError as e:
                raise UsageError(str(e)) from None
        elif self.command == "run":
            if self.descriptor is not None:
                self._load_descriptor()
            self._validate_scheme()
        elif self.command == "validate":
            if self.n is None or self.n < 2:
                raise UsageError(f"Invalid max size: {self.n}. Must be >= 2")
            if 2 * self.n > MAX_QUBITS:
                raise ResourceLimitError(f"max size {self.n} needs {2 * self.n} qubits; limit is {MAX_QUBITS}")
        elif self.command == "verify":
            if self.state_file is None:
                raise UsageError("verify needs a state file")
            if self.n is None or self.n < 2 or self.n % 2:
                raise UsageError(f"Invalid expected size: {self.n}. Must be even and >= 2")

    def _validate_scheme(self):
        scheme, n, k = self.scheme, self.n, self.k
        if scheme not in SCHEMES:
            raise UsageError(f"Unsupported scheme: {scheme}. Supported: {', '.join(SCHEMES)}")
        for flag, value in (("--n", n), ("--k", k)):
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise UsageError(f"Scheme {scheme} needs an integer {flag}, got {value!r}")
        if n is None or n < 1:
            raise UsageError(f"Scheme {scheme} needs --n >= 1")
        if scheme == "cascade" and (k is None or k < 1):
            raise UsageError("Scheme cascade needs --k >= 1")
        if scheme == "partial" and (k is None or not 1 <= k < n):
            raise UsageError(f"Scheme partial needs 1 <= --k < --n, got k={k}, n={n}")
        if scheme == "odd_add" and n % 2:
            raise UsageError(f"Scheme odd_add needs an even --n, got {n}")
        if scheme == "odd_project" and (n < 2 or n % 2):
            raise UsageError(f"Scheme odd_project needs an even --n >= 2, got {n}")
        if scheme == "prepare" and self.odd_strategy not in ODD_STRATEGIES:
            raise UsageError(f"Unsupported odd strategy: {self.odd_strategy}")

    def _load_descriptor(self):
        """Copy a descriptor file into the scheme fields so it is checked like the flags"""
        try:
            data = json.loads(Path(self.descriptor).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"Cannot read run descriptor {self.descriptor}: {e}") from None
        if not isinstance(data, dict):
            raise UsageError(f"Run descriptor {self.descriptor} must be a JSON object, got {type(data).__name__}")

        self.scheme = data.get("scheme")
        self.n = data.get("target_n" if self.scheme == "prepare" else "start_n")
        self.k = data.get("k")
        self.odd_strategy = data.get("odd_strategy", "project")

    def to_descriptor(self) -> Dict:
        """Run descriptor for schemes.run_descriptor"""
        if self.scheme == "prepare":
            return {"scheme": "prepare", "target_n": self.n, "odd_strategy": self.odd_strategy}
        descriptor = {"scheme": self.scheme, "start_n": self.n}
        if self.scheme in ("cascade", "partial"):
            descriptor["k"] = self.k
        return descriptor


class ExpansionRunner:
    """Executes one CLI command and writes its artifact"""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config

    def emit(self, text: str):
        """Write an artifact to --out, or to stdout when no path is given"""
        if self.config.out is None:
            print(text, end="" if text.endswith("\n") else "\n")
            return
        out = Path(self.config.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text if text.endswith("\n") else text + "\n")
        print(f"📄 Artifact saved to: {out}", file=sys.stderr)

    def cmd_bell(self) -> int:
        first, second = (Polarization.from_letter(letter) for letter in self.config.letters)
        state = bell_pair(first, second)
        entangled = is_entangled_pair(state)

        print(f"🔗 |{first.name}{second.name}> -> {to_ket_string(state)}", file=sys.stderr)
        print(f"   entangled: {entangled}", file=sys.stderr)

        artifact = {"input": f"{first.name}{second.name}", "entangled": entangled, "state": state_to_dict(state)}
        self.emit(json.dumps(artifact, indent=2))
        return EXIT_OK

    def cmd_run(self) -> int:
        descriptor = self.config.to_descriptor()
        tolerance = self.config.tolerance or TOLERANCE

        outcome = run_descriptor(descriptor)
        analytic = expected_probability(descriptor)
        delta = abs(analytic - outcome.success_probability)
        valid = delta <= tolerance and outcome.fidelity >= 1.0 - tolerance

        result = {"descriptor": descriptor, "analytic_probability": analytic, "abs_delta": delta, "valid": valid}
        result.update(outcome.to_dict(include_state=self.config.include_state))
        if self.config.shots:
            result["samples"] = sample_counts(outcome.state, self.config.shots, self.config.seed)

        self.print_summary(descriptor, result)
        if self.config.fmt == "csv":
            columns = ["scheme", "target_n", "success_probability", "analytic_probability", "abs_delta", "fidelity"]
            values = [descriptor["scheme"], str(outcome.target.n)] + [
                f"{result[column]:.17g}" for column in columns[2:]
            ]
            self.emit(",".join(columns) + "\n" + ",".join(values) + "\n")
        else:
            self.emit(json.dumps(result, indent=2))
        return EXIT_OK if valid else EXIT_VALIDATION

    def print_summary(self, descriptor: Dict, result: Dict):
        table_data = [
            ["Field", "Value"],
            ["Scheme", descriptor["scheme"]],
            ["Target", f"W_{result['target_n']}"],
            ["Success probability", f"{result['success_probability']:.17g}"],
            ["Analytic", f"{result['analytic_probability']:.17g}"],
            ["Fidelity", f"{result['fidelity']:.17g}"],
            ["Ancillas", result["resources"]["ancillas"]],
            ["Two-qubit gates", result["resources"]["two_qubit_gates"]],
            ["PDL filters", result["resources"]["pdl_filters"]],
        ]
        print(tabulate(table_data, headers="firstrow", tablefmt="grid"), file=sys.stderr)
        print("✅ Result matches the closed form" if result["valid"] else "❌ Result does not match the closed form",
              file=sys.stderr)

    def cmd_validate(self) -> int:
        validator = CrossValidator(self.config.n, tolerance=self.config.tolerance or TOLERANCE)
        table = validator.run()
        if self.config.verbose:
            validator.print_summary(table)
        if self.config.out is not None:
            table.save(self.config.out, self.config.fmt)
            print(f"📄 Artifact saved to: {self.config.out}", file=sys.stderr)
        else:
            self.emit(table.to_csv() if self.config.fmt == "csv" else table.to_json())

        if table.passed():
            print(f"✅ {len(table.rows)} rows agree within {table.tolerance:g}", file=sys.stderr)
            return EXIT_OK
        for row in table.failures():
            print(f"❌ {row.scheme}[{row.size}]: |Δ| = {row.abs_delta:.3e}", file=sys.stderr)
        return EXIT_VALIDATION

    def cmd_verify(self) -> int:
        candidate = load_state(self.config.state_file)
        tolerance = self.config.tolerance or VERIFY_TOLERANCE

        if candidate.n != self.config.n:
            print(f"❌ Rejected: state has {candidate.n} modes, expected {self.config.n}", file=sys.stderr)
            accepted = False
        else:
            accepted = verify_back(candidate, WSpec.of(candidate), tolerance=tolerance)
            print("✅ Accepted: genuine W state" if accepted else "❌ Rejected: not a W state", file=sys.stderr)

        self.emit(json.dumps({"file": str(self.config.state_file), "expected_n": self.config.n, "accepted": accepted}))
        return EXIT_OK if accepted else EXIT_VALIDATION

    def cmd_dump_gates(self) -> int:
        self.emit(json.dumps(dump_registry(), indent=2))
        return EXIT_OK

    def execute(self) -> int:
        handlers = {
            "bell": self.cmd_bell,
            "run": self.cmd_run,
            "validate": self.cmd_validate,
            "verify": self.cmd_verify,
            "dump-gates": self.cmd_dump_gates,
        }
        logger.debug("Running %s with %s", self.config.command, self.config)
        return handlers[self.config.command]()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json", help="Artifact format")
    common.add_argument("--out", type=Path, help="Artifact path (default: stdout)")
    common.add_argument("--tolerance", type=float, help="Equality tolerance (default 1e-12; 1e-9 for verify)")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging and console tables")

    parser = _Parser(
        description="Deterministic W-state expansion: simulate and verify",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python scripts/wexpand.py bell H V
  python scripts/wexpand.py run --scheme parallel --n 3
  python scripts/wexpand.py run --scheme cascade --n 1 --k 3
  python scripts/wexpand.py run --scheme partial --n 3 --k 2
  python scripts/wexpand.py validate --n 6 --format csv --out table.csv
  python scripts/wexpand.py verify w4.json --n 4
        """,
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
    subparsers.required = True

    bell = subparsers.add_parser("bell", parents=[common], help="Two photons through one expansion block")
    bell.add_argument("letters", nargs="*", help="Polarizations of mode 1 and mode 2 (H or V)")

    run = subparsers.add_parser("run", parents=[common], help="Run one expansion scheme")
    run.add_argument("--scheme", choices=SCHEMES, help="Scheme to run")
    run.add_argument("--n", type=int, help="Input W size (target size for prepare)")
    run.add_argument("--k", type=int, help="Cascade steps, or circuits for partial")
    run.add_argument("--odd-strategy", choices=ODD_STRATEGIES, default="project", help="Odd sizes in prepare")
    run.add_argument("--descriptor", type=Path, help="JSON run descriptor instead of --scheme/--n/--k")
    run.add_argument("--include-state", action="store_true", help="Embed the output state in the result")
    run.add_argument("--shots", type=int, help="Attach sampled basis counts")
    run.add_argument("--seed", type=int, help="Seed for --shots sampling")

    validate = subparsers.add_parser("validate", parents=[common], help="Cross-validate every closed form")
    validate.add_argument("--n", "--max-n", dest="n", type=int, required=True, help="Largest W size in the sweep")

    verify = subparsers.add_parser("verify", parents=[common], help="Back-propagation W-state test")
    verify.add_argument("state_file", type=Path, help="Serialized state (JSON)")
    verify.add_argument("--n", type=int, required=True, help="Expected number of modes")

    subparsers.add_parser("dump-gates", parents=[common], help="Gate registry as JSON")
    return parser


def parse_config(argv: Optional[List[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(
        command=args.command,
        scheme=getattr(args, "scheme", None),
        n=getattr(args, "n", None),
        k=getattr(args, "k", None),
        odd_strategy=getattr(args, "odd_strategy", "project"),
        descriptor=getattr(args, "descriptor", None),
        letters=getattr(args, "letters", None),
        state_file=getattr(args, "state_file", None),
        out=args.out,
        fmt=args.fmt,
        seed=getattr(args, "seed", None),
        shots=getattr(args, "shots", None),
        tolerance=args.tolerance,
        include_state=getattr(args, "include_state", False),
        verbose=args.verbose,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    try:
        config = parse_config(argv)
        logging.basicConfig(
            level=logging.DEBUG if config.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return ExpansionRunner(config).execute()
    except ResourceLimitError as e:
        print(f"❌ Resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (WExpandError, ValueError, KeyError, OSError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
