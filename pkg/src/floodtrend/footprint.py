"""Event footprints: 100-year hazard zone intersected with affected regions."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class FootprintError(ValueError):
    pass


@dataclass(frozen=True)
class Footprint:
    event_id: str
    cells: np.ndarray  # (k, 2) row-major sorted (row, col)

    @property
    def empty(self) -> bool:
        return len(self.cells) == 0

    def __len__(self):
        return len(self.cells)

    def area_km2(self, cellsize_m: float) -> float:
        return len(self.cells) * cellsize_m ** 2 / 1e6

    def cell_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.cells}


def hazard_mask_for(flood_type: str, river: np.ndarray, coastal: np.ndarray) -> np.ndarray:
    """River and flash floods use the river zone, coastal the coastal one, compound both."""
    if flood_type in ("river", "flash"):
        return river
    if flood_type == "coastal":
        return coastal
    if flood_type == "compound":
        return np.logical_or(river, coastal)
    raise FootprintError(f"unknown flood type {flood_type!r}")


def resolve_regions(codes: Iterable[str], region_values: Mapping[str, int] | None,
                    present: set[int]) -> list[int]:
    """Translate event region codes to region-grid values.

    Without an explicit mapping the codes must be the integer grid values.
    """
    out = []
    for code in codes:
        if region_values is not None:
            if code not in region_values:
                raise FootprintError(f"region code {code!r} not in the region index")
            value = int(region_values[code])
        else:
            try:
                value = int(code)
            except ValueError:
                raise FootprintError(f"region code {code!r} is not a grid value") from None
        if value not in present:
            raise FootprintError(f"region code {code!r} absent from the region grid")
        out.append(value)
    return out


def build_footprint(event, mask: np.ndarray, regions: np.ndarray,
                    region_values: Mapping[str, int] | None = None,
                    present: set[int] | None = None) -> Footprint:
    """Cells inside `mask` whose region is one of the event's regions."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != regions.shape:
        raise FootprintError("hazard mask and region grid are not aligned")
    if present is None:
        present = set(int(v) for v in np.unique(regions))
    wanted = resolve_regions(event.regions, region_values, present)
    hit = mask & np.isin(regions, wanted)
    return Footprint(event.id, np.argwhere(hit).astype(np.int64))


def build_footprints(events, river, coastal, regions, region_values=None) -> dict[str, Footprint]:
    present = set(int(v) for v in np.unique(regions))
    out = {}
    for ev in events:
        mask = hazard_mask_for(ev.flood_type, river, coastal)
        out[ev.id] = build_footprint(ev, mask, regions, region_values, present)
    return out


def write_footprints(footprints: Iterable[Footprint], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("event_id", "row", "col"))
        for fp in footprints:
            for r, c in fp.cells:
                writer.writerow((fp.event_id, int(r), int(c)))


def read_footprints(path, event_ids: Iterable[str] = ()) -> dict[str, Footprint]:
    cells: dict[str, list] = {eid: [] for eid in event_ids}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            cells.setdefault(row["event_id"], []).append((int(row["row"]), int(row["col"])))
    return {eid: Footprint(eid, np.asarray(sorted(c), dtype=np.int64).reshape(-1, 2))
            for eid, c in cells.items()}
