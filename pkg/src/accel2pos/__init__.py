"""CNC axis position reconstruction from spindle-mounted accelerometer signals."""

__version__ = "0.1.0"
