"""trimode - spectrum, readout and fitting toolkit for a three-mode superconducting qubit."""

__version__ = "0.1.0"
__author__ = "trimode developers"
