"""
Measurement tables: one CSV row per subject, header row of measurement names
"""
import csv
import io
from pathlib import Path
from typing import List, Optional, Sequence, TextIO, Union

import numpy as np

from ..errors import InputFormatError
from .specs import MeasurementProfile, MeasurementVector


def format_number(value: float) -> str:
    """Shortest text that parses back to the same double"""
    return repr(float(value))


Rows = Sequence[Union[MeasurementVector, Sequence[float]]]


def _write_rows(f: TextIO, names: Sequence[str], rows: Rows) -> None:
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(list(names))
    if not names:
        return
    for row in rows:
        values = row.values if isinstance(row, MeasurementVector) else row
        if len(values) != len(names):
            raise InputFormatError(f"row has {len(values)} values for {len(names)} columns")
        writer.writerow([format_number(v) for v in values])


def write_measurement_table(path: Union[str, Path], names: Sequence[str], rows: Rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        _write_rows(f, names, rows)


def measurement_table_text(names: Sequence[str], rows: Rows) -> str:
    buffer = io.StringIO()
    _write_rows(buffer, names, rows)
    return buffer.getvalue()


def read_measurement_table(path: Union[str, Path],
                           profile: Optional[MeasurementProfile] = None
                           ) -> List[MeasurementVector]:
    """Read every data row; with a profile, columns are re-ordered to profile order by name"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputFormatError(f"{path}: empty measurement table")
        vectors = []
        for line_no, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputFormatError(
                    f"{path}:{line_no}: {len(row)} values for {len(header)} columns")
            try:
                values = np.array([float(v) for v in row])
            except ValueError:
                raise InputFormatError(f"{path}:{line_no}: non-numeric measurement")
            vector = MeasurementVector(values, tuple(header))
            vectors.append(vector.aligned_to(profile) if profile is not None else vector)
    return vectors


def read_measurement_row(path: Union[str, Path], profile: MeasurementProfile,
                         row: int = 0) -> MeasurementVector:
    vectors = read_measurement_table(path, profile)
    if not 0 <= row < len(vectors):
        raise InputFormatError(f"{path}: row {row} out of range ({len(vectors)} data rows)")
    return vectors[row]
