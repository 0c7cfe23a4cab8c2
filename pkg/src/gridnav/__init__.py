"""Grid-world exploration into a scene graph, then cached deployment over it."""

__version__ = "0.1.0"
