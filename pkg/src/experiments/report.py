import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """Outcome of one acceptance check."""
    name: str
    passed: bool
    detail: str
    values: Dict[str, Any] = field(default_factory=dict)


class ValidationReport:
    """Collects check results and renders them as text and JSON."""

    def __init__(self, config_hash: str, inject_fault: str = "none"):
        self.config_hash = config_hash
        self.inject_fault = inject_fault
        self.checks: List[CheckResult] = []

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
        return check

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "inject_fault": self.inject_fault,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failures),
            "checks": [asdict(check) for check in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    def to_text(self) -> str:
        """
        Generate the human-readable report.

        Returns:
            str: One line per check followed by a summary line
        """
        width = max((len(check.name) for check in self.checks), default=0)
        lines = [f"Validation report (config {self.config_hash})"]
        if self.inject_fault != "none":
            lines.append(f"Injected fault: {self.inject_fault}")
        lines.append("")
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            lines.append(f"{status}  {check.name.ljust(width)}  {check.detail}")
        lines.append("")
        verdict = "all checks passed" if self.passed else f"{len(self.failures)} of {len(self.checks)} checks failed"
        lines.append(f"Result: {verdict}")
        return "\n".join(lines) + "\n"
