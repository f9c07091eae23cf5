"""Haptic exploration, curve prediction and open-loop squeeze dispensing."""

__version__ = "0.1.0"
