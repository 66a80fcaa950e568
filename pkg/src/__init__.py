"""
MERA Tomography Toolkit
Layer-by-layer MERA reconstruction of 1D critical states from local Pauli
measurements, with measurement-budget optimization and error certificates
"""

__version__ = "1.0.0"
