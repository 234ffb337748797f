"""Shor's algorithm: spectral mathematics, classical postprocessing, and
nearest-neighbor circuit constructors."""

from . import core, lnn
