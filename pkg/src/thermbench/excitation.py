"""Periodogram spectra and persistence-of-excitation order bookkeeping.

A signal's spectral lines are counted on the one-sided periodogram with a
relative power threshold; adjacent super-threshold bins are merged into one
line so that leakage around a peak is not double counted.  The excitation
order of a line spectrum is twice the number of distinct frequencies, minus
one when one of them is DC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .regressors import RegressorSpec
from .simulator import TimeSeriesDataset

DEFAULT_THRESHOLD = 1.0e-4  # fraction of peak power that counts as a line


@dataclass(frozen=True)
class SpectralLine:
    freq: float   # cycles/sample, peak bin of the merged run
    power: float  # peak power within the run


@dataclass
class SpectrumReport:
    freq: np.ndarray    # cycles/sample, one-sided grid [0, 0.5]
    power: np.ndarray   # sums to sum(signal**2) (rectangular window)
    lines: list[SpectralLine]
    dc_present: bool
    threshold: float

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    def to_csv(self, path, epsilon_hours: float | None = None) -> None:
        """Frequency grid in cycles/sample and, when the sampling period is
        known, in 1/hours."""
        with open(path, "w", encoding="utf-8") as fh:
            if epsilon_hours:
                fh.write("freq_cycles_per_sample,freq_per_hour,power\n")
                for f, p in zip(self.freq, self.power):
                    fh.write(f"{f:.9g},{f / epsilon_hours:.9g},{p:.9g}\n")
            else:
                fh.write("freq_cycles_per_sample,power\n")
                for f, p in zip(self.freq, self.power):
                    fh.write(f"{f:.9g},{p:.9g}\n")


def spectrum(signal, threshold: float = DEFAULT_THRESHOLD) -> SpectrumReport:
    """One-sided rectangular-window periodogram with line detection.

    The DC bin is tested against the global peak.  Positive-frequency lines
    are referenced to the strongest positive-frequency bin (as on a plot of
    the positive spectrum), provided that bin itself clears the global
    threshold; adjacent super-threshold bins merge into one line so leakage
    around a peak is not double counted.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if n < 8:
        raise ShapeError(f"need at least 8 samples for a spectrum, got {n}")
    spec = np.fft.rfft(x)
    power = np.abs(spec) ** 2 / n
    # one-sided weights so that total power equals sum(x**2)
    weights = np.full(len(power), 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    power = power * weights
    freq = np.arange(len(power)) / n

    lines: list[SpectralLine] = []
    dc_present = False
    peak = power.max()
    if peak > 0.0:
        if power[0] > threshold * peak:
            dc_present = True
            lines.append(SpectralLine(freq=0.0, power=float(power[0])))
        pos_peak = power[1:].max() if len(power) > 1 else 0.0
        if pos_peak > threshold * peak:
            mask = power > threshold * pos_peak
            i = 1
            while i < len(mask):
                if mask[i]:
                    j = i
                    while j + 1 < len(mask) and mask[j + 1]:
                        j += 1
                    run = slice(i, j + 1)
                    top = i + int(np.argmax(power[run]))
                    lines.append(SpectralLine(freq=float(freq[top]),
                                              power=float(power[top])))
                    i = j + 1
                else:
                    i += 1
    return SpectrumReport(freq=freq, power=power, lines=lines,
                          dc_present=dc_present, threshold=threshold)


def pe_order(report: SpectrumReport) -> int:
    """Excitation order supported by the detected line set."""
    if report.n_lines == 0:
        return 0
    return 2 * report.n_lines - (1 if report.dc_present else 0)


#: dataset columns treated as inputs/disturbances of the zone
def excitation_columns(n_neighbors: int) -> list[str]:
    return [f"T_rj_{j}" for j in range(1, n_neighbors + 1)] + \
        ["Tw_in", "Ta_in", "Vw", "Va", "Qext"]


@dataclass(frozen=True)
class ColumnExcitation:
    column: str
    order: int
    required: int
    dc_present: bool

    @property
    def passed(self) -> bool:
        # a DC line lowers the required order by one
        return self.order >= self.required - (1 if self.dc_present else 0)


@dataclass
class InformativityReport:
    required_order: int
    entries: list[ColumnExcitation]

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def summary(self) -> str:
        lines = [f"required excitation order: {self.required_order} "
                 f"(one less with a DC line)"]
        for e in self.entries:
            verdict = "pass" if e.passed else "FAIL"
            dc = " +DC" if e.dc_present else ""
            lines.append(f"  {e.column:<8s} order {e.order:>3d}{dc:>4s}  {verdict}")
        lines.append(f"overall: {'pass' if self.all_pass else 'FAIL'}")
        return "\n".join(lines)


def informativity_check(dataset: TimeSeriesDataset, spec: RegressorSpec,
                        threshold: float = DEFAULT_THRESHOLD) -> InformativityReport:
    """Check that every input/disturbance column is persistently exciting of
    order 2*(n_neighbors + 2), or one less when its spectrum has a DC line."""
    required = 2 * (spec.n_neighbors + 2)
    entries = []
    for col in excitation_columns(dataset.n_neighbors):
        rep = spectrum(dataset.columns[col], threshold)
        entries.append(ColumnExcitation(column=col, order=pe_order(rep),
                                        required=required,
                                        dc_present=rep.dc_present))
    return InformativityReport(required_order=required, entries=entries)
