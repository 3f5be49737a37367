"""Energy-trajectory analysis of empathetic-listening dialogues."""

__version__ = "0.1.0"
