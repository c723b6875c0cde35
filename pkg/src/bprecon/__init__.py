"""Patch-wise unrolled reconstruction of undersampled multi-coil k-space.

The full k-space grid is split into overlapping bandpass-windowed patches,
each patch is reconstructed by an unrolled network with hard data
consistency, and the patches are recombined by window-weighted averaging.
"""

__version__ = "0.1.0"
