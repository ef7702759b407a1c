"""Exception hierarchy shared by the simulator modules."""


class EdramCapError(Exception):
    """Base class for all simulator errors."""


class NetlistError(EdramCapError, ValueError):
    """Malformed netlist, unknown node, or incomplete signal assignment."""


class SourceConflictError(NetlistError):
    """Two active sources at different voltages ended up in one connected component."""

    def __init__(self, conflicts):
        self.conflicts = tuple(conflicts)
        parts = []
        for c in self.conflicts:
            drives = ", ".join(f"{name}={v:g} V" for name, v in c.sources)
            parts.append(f"[{drives}] shorted through nodes {', '.join(c.node_names)}")
        super().__init__("source conflict: " + "; ".join(parts))


class ScheduleError(EdramCapError, ValueError):
    """Phase schedule inconsistent with the array or out-of-bounds target."""


class CalibrationError(EdramCapError):
    """Abacus construction failed (non-monotone sweep, missing step coverage)."""


class FingerprintMismatch(CalibrationError):
    """An abacus was used with converter/parasitic settings it was not built for."""


class ConfigError(EdramCapError, ValueError):
    """Invalid run configuration."""
