"""Residual tables: named numerical checks with tolerances and verdicts."""
import math


class ResidualTable:
    """Ordered list of ``{check, value, tol, pass}`` rows.

    ``add(name, value, tol)`` records a check that passes when
    ``value <= tol``; ``add_min`` records one that passes when
    ``value >= tol`` (e.g. a strictly-positive eigenvalue bound).
    """

    def __init__(self, rows=None):
        self.rows = list(rows or [])

    def add(self, check, value, tol):
        value = float(value)
        ok = bool(math.isfinite(value) and value <= tol)
        self.rows.append({"check": check, "value": value, "tol": float(tol), "pass": ok})
        return ok

    def add_min(self, check, value, bound):
        value = float(value)
        ok = bool(math.isfinite(value) and value >= bound)
        self.rows.append({"check": check, "value": value, "tol": float(bound),
                          "pass": ok, "kind": "min"})
        return ok

    def add_flag(self, check, ok, value=0.0):
        self.rows.append({"check": check, "value": float(value), "tol": 0.0,
                          "pass": bool(ok), "kind": "flag"})
        return bool(ok)

    def extend(self, other, prefix=""):
        for r in other.rows:
            r = dict(r)
            r["check"] = prefix + r["check"]
            self.rows.append(r)
        return self

    @property
    def passed(self):
        return all(r["pass"] for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r["pass"]]

    def get(self, check):
        for r in self.rows:
            if r["check"] == check:
                return r
        raise KeyError(check)

    def worst(self, prefix):
        vals = [r["value"] for r in self.rows if r["check"].startswith(prefix)]
        return max(vals) if vals else 0.0

    def to_list(self):
        return [{k: r[k] for k in ("check", "value", "tol", "pass")} for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __repr__(self):
        bad = len(self.failures())
        return f"ResidualTable({len(self.rows)} checks, {bad} failing)"
