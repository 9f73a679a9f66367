"""Pass/fail reports returned by the verifiers."""

from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    counterexample: object = None
    note: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "counterexample": _plain(self.counterexample),
            "note": self.note,
        }


@dataclass
class Report:
    checks: list = field(default_factory=list)

    def add(self, name, passed, counterexample=None, note=""):
        self.checks.append(Check(name, bool(passed), counterexample, note))
        return self

    def extend(self, other, prefix=""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.counterexample, c.note))
        return self

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def __bool__(self):
        return self.ok

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def get(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "ok  " if c.passed else "FAIL"
            extra = "" if c.passed or c.counterexample is None else f"  {c.counterexample}"
            note = f"  ({c.note})" if c.note else ""
            lines.append(f"{status} {c.name}{extra}{note}")
        return "\n".join(lines)


def _plain(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    try:
        return int(value)
    except (TypeError, ValueError):
        return str(value)
