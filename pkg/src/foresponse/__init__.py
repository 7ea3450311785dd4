"""Measurement toolkit for the involuntary voice fundamental-frequency
response to frequency-modulated auditory stimulation."""

__version__ = "0.1.0"
