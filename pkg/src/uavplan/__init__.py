"""Energy-aware trajectory and communication planning for a rotary-wing UAV serving ground nodes."""

__version__ = "0.1.0"
