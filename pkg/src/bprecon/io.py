"""GridFile container and volume slicing.

GridFile layout::

    BPGRID 1\\n
    dims=<d0>,<d1>,...\\n          (C order, at least one axis)
    dtype=<complex64|complex128|float32|float64>\\n
    axes=<label0>,<label1>,...\\n  (optional, one label per dim)
    <key>=<value>\\n               (any further provenance, e.g. seed=3)
    end\\n
    <payload>

The payload is little-endian IEEE: complex values as interleaved
``(re, im)`` pairs, real values plain, exactly ``prod(dims)`` elements.
"""

import numpy as np

MAGIC = "BPGRID 1"
_DTYPES = {
    "complex64": np.dtype("<c8"),
    "complex128": np.dtype("<c16"),
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
}


class GridFormatError(ValueError):
    pass


def write_grid(path, array, axes=None, **meta):
    array = np.asarray(array)
    if array.ndim == 0 or 0 in array.shape:
        raise GridFormatError(f"cannot store empty dims {array.shape}")
    if np.iscomplexobj(array):
        name = "complex64" if array.dtype == np.complex64 else "complex128"
    else:
        name = "float32" if array.dtype == np.float32 else "float64"
    lines = [MAGIC, "dims=" + ",".join(str(d) for d in array.shape), f"dtype={name}"]
    if axes is not None:
        if len(axes) != array.ndim:
            raise GridFormatError(f"{len(axes)} axis labels for {array.ndim} dims")
        lines.append("axes=" + ",".join(axes))
    for key, value in meta.items():
        if "\n" in str(value) or "=" in key:
            raise GridFormatError(f"metadata {key!r} not representable")
        lines.append(f"{key}={value}")
    lines.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        f.write(np.ascontiguousarray(array, dtype=_DTYPES[name]).tobytes())


def read_grid(path):
    """Return ``(array, meta)``; ``meta`` holds every header field as a string."""
    with open(path, "rb") as f:
        raw = f.read()
    meta = {}
    pos = 0
    first = True
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise GridFormatError("header not terminated by 'end'")
        line = raw[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if first:
            if line != MAGIC:
                raise GridFormatError(f"bad magic line {line!r}")
            first = False
            continue
        if line == "end":
            break
        if "=" not in line:
            raise GridFormatError(f"malformed header line {line!r}")
        key, value = line.split("=", 1)
        meta[key] = value
    try:
        dims = tuple(int(d) for d in meta["dims"].split(","))
        dtype = _DTYPES[meta["dtype"]]
    except (KeyError, ValueError) as exc:
        raise GridFormatError(f"missing or invalid dims/dtype: {exc}") from exc
    if not dims or min(dims) < 1:
        raise GridFormatError(f"invalid dims {dims}")
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - pos != expected:
        raise GridFormatError(
            f"payload has {len(raw) - pos} bytes, header dims {dims} ({meta['dtype']}) need {expected}"
        )
    array = np.frombuffer(raw, dtype, offset=pos).reshape(dims)
    return array.astype(dtype.newbyteorder("="), copy=True), meta


def slice_volume(volume, readout_axis=1):
    """Split volumetric k-space into per-x 2-D examples.

    ``volume`` is ``(nc, nkx, nky, nkz)`` by default; the fully sampled readout
    axis is inverse transformed (centered, unitary) into hybrid (x, ky, kz)
    space and each x position becomes one ``(nc, nky, nkz)`` example.
    """
    volume = np.asarray(volume)
    hybrid = np.fft.ifft(np.fft.ifftshift(volume, axes=readout_axis), axis=readout_axis, norm="ortho")
    hybrid = np.moveaxis(hybrid, readout_axis, 0)
    return [np.ascontiguousarray(s) for s in hybrid]


def stack_slices(slices, readout_axis=1):
    """Inverse of :func:`slice_volume`."""
    hybrid = np.moveaxis(np.stack(slices), 0, readout_axis)
    return np.fft.fftshift(np.fft.fft(hybrid, axis=readout_axis, norm="ortho"), axes=readout_axis)
