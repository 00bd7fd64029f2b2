"""ASCII raster grids (``ncols``/``nrows``/``cellsize``/``nodata`` header)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_KEYS = ("ncols", "nrows", "cellsize", "nodata")


@dataclass
class AsciiGrid:
    data: np.ndarray
    cellsize: float = 100.0
    nodata: float = -9999.0


def read_ascii_grid(path, dtype=np.float64) -> AsciiGrid:
    path = Path(path)
    header = {}
    with path.open() as fh:
        for _ in _KEYS:
            key, value = fh.readline().split()
            header[key.lower()] = value
        missing = set(_KEYS) - set(header)
        if missing:
            raise ValueError(f"{path}: header lacks {sorted(missing)}")
        ncols, nrows = int(header["ncols"]), int(header["nrows"])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (nrows, ncols):
        raise ValueError(f"{path}: expected {nrows}x{ncols} values, found {data.shape}")
    return AsciiGrid(data.astype(dtype), float(header["cellsize"]), float(header["nodata"]))


def write_ascii_grid(path, data, cellsize=100.0, nodata=-9999.0) -> None:
    data = np.asarray(data)
    nrows, ncols = data.shape
    fmt = "%d" if np.issubdtype(data.dtype, np.integer) or data.dtype == bool else "%.17g"
    with Path(path).open("w") as fh:
        fh.write(f"ncols {ncols}\nnrows {nrows}\ncellsize {cellsize:g}\nnodata {nodata:g}\n")
        np.savetxt(fh, data.astype(np.int64) if data.dtype == bool else data, fmt=fmt)
