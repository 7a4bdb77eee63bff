"""Spontaneous four-wave mixing toolkit for birefringent and few-mode fibers.

Covers fiber dispersion, phasematching contours, joint spectral amplitudes,
Schmidt and entanglement metrics, source design searches and simulated
characterization of the resulting photon pairs.
"""

__version__ = "0.1.0"
