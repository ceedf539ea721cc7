"""MiniScript concolic tester driven by a baseline-tier micro-op tracer."""

__version__ = "0.1.0"
TRACE_FORMAT_VERSION = 1
IR_FORMAT_VERSION = 1
