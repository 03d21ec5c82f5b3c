from .format import (TraceDefinitions, TraceEvent, TraceFormatError, canonical, read_trace,
                     write_trace)
from .profile import ProfileReport, format_report, profile
from .sink import TraceOrderError, TraceSink
from .validate import Violation, validate_trace

__all__ = [
    "TraceDefinitions", "TraceEvent", "TraceFormatError", "TraceOrderError", "TraceSink",
    "ProfileReport", "Violation", "canonical", "format_report", "profile", "read_trace",
    "validate_trace", "write_trace",
]
