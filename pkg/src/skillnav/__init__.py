"""Skill-space navigation: high-level controller, 2D course simulator, harness."""

__version__ = "0.1.0"
