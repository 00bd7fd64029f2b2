"""Annual series container and its CSV form."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

STAGES = ("reported", "normalized", "gap_filled", "underreporting_corrected")


@dataclass
class AnnualSeries:
    start_year: int
    end_year: int
    values: np.ndarray
    variable: str = "events"
    stage: str = "reported"
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.end_year < self.start_year:
            raise ValueError("end_year precedes start_year")
        if self.values.shape != (self.end_year - self.start_year + 1,):
            raise ValueError("series length does not match its year span")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite and nonnegative")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.end_year + 1)

    def __len__(self):
        return self.values.size

    def window(self, start: int, end: int | None = None) -> "AnnualSeries":
        end = self.end_year if end is None else end
        if start < self.start_year or end > self.end_year:
            raise ValueError(f"{start}-{end} outside {self.start_year}-{self.end_year}")
        i, j = start - self.start_year, end - self.start_year + 1
        return AnnualSeries(start, end, self.values[i:j].copy(), self.variable, self.stage,
                            self.units)

    def scaled(self, k: float) -> "AnnualSeries":
        return AnnualSeries(self.start_year, self.end_year, self.values * k, self.variable,
                            self.stage, self.units)

    def to_csv(self, path) -> None:
        with Path(path).open("w") as fh:
            fh.write(f"# variable: {self.variable}\n# stage: {self.stage}\n"
                     f"# units: {self.units or 'count'}\n")
            fh.write("year,value\n")
            for y, v in zip(self.years, self.values):
                fh.write(f"{int(y)},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "AnnualSeries":
        meta, years, values = {}, [], []
        with Path(path).open() as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("#"):
                    key, _, val = line[1:].partition(":")
                    meta[key.strip()] = val.strip()
                elif line and line != "year,value":
                    y, v = line.split(",")
                    years.append(int(y))
                    values.append(float(v))
        return cls(years[0], years[-1], np.array(values), meta.get("variable", ""),
                   meta.get("stage", "reported"), meta.get("units", ""))
