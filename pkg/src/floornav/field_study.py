"""Recorded results from the original building-scale field deployment.

These tables are fixed measurement data, kept as regression fixtures for the
ordering metric: 17 test locations localized against databases thinned by
frame rate (columns of the first table), by slice rate (second table), and
the mean direction errors over the rate grid (third table, None where some
locations returned no direction).  Location cells are feet, direction cells
degrees.  Do not edit cells; the expected column-order probabilities below
are locked to them.
"""

from __future__ import annotations

import numpy as np

from .evaluation import ErrorTable

FRAME_COUNT = 4258
SLICES_PER_FRAME = 18
SLICE_STEP_DEG = 20.0
SLICE_FOV_DEG = 75.0
TEST_POINT_COUNT = 17

FRAME_RATES = (1, 5, 10, 15, 20, 25, 30, 40, 50)
SLICE_RATES = (1, 2, 3, 4, 5, 6)

# location error (ft) per test point, database thinned by frame rate
_LOCATION_BY_FRAME_RATE = [
    [3.1, 3.1, 2.5, 2.4, 2.6, 2.6, 2.7, 3.1, 3.8],
    [0.9, 1.6, 1.6, 1.7, 1.5, 2.4, 1.1, 1.4, 1.4],
    [1.8, 2.3, 2.1, 3.7, 3.2, 9.2, 3.4, 2.0, 7.3],
    [4.8, 4.2, 3.1, 4.9, 1.2, 5.1, 4.6, 5.1, 5.7],
    [5.0, 3.3, 4.3, 5.9, 3.4, 7.2, 5.9, 11.1, 7.1],
    [8.1, 9.1, 10.7, 5.3, 10.4, 8.1, 10.7, 4.9, 8.6],
    [3.6, 4.3, 4.5, 4.1, 5.3, 4.2, 14.4, 4.7, 20.2],
    [5.4, 5.4, 5.4, 5.4, 11.8, 53.0, 6.0, 8.5, 6.5],
    [1.5, 3.0, 1.8, 5.5, 17.4, 2.7, 17.3, 17.1, 14.2],
    [1.8, 3.3, 3.3, 1.6, 24.6, 4.1, 22.9, 22.3, 18.9],
    [2.7, 1.9, 3.0, 3.0, 3.2, 3.0, 3.0, 3.2, 3.0],
    [0.5, 0.7, 0.7, 4.6, 0.7, 4.8, 53.2, 0.7, 11.6],
    [6.2, 3.7, 3.7, 8.3, 8.6, 10.2, 8.3, 8.6, 10.2],
    [4.0, 17.7, 5.4, 8.4, 5.8, 5.0, 4.6, 3.4, 8.0],
    [2.5, 2.3, 3.1, 3.7, 2.8, 1.9, 3.7, 12.7, 4.5],
    [0.9, 1.2, 2.5, 10.1, 2.5, 14.2, 45.6, 2.5, 12.1],
    [4.6, 3.7, 5.4, 5.1, 6.2, 17.0, 5.8, 4.8, 20.1],
]

# location error (ft) per test point, database thinned by slice rate
_LOCATION_BY_SLICE_RATE = [
    [3.1, 2.8, 2.8, 3.0, 4.1, 4.5],
    [0.9, 0.9, 1.8, 3.0, 3.8, 3.8],
    [1.8, 3.4, 3.4, 3.8, 7.1, 2.7],
    [4.8, 5.3, 4.0, 2.6, 4.2, 5.2],
    [5.0, 5.4, 5.0, 7.5, 1.3, 8.0],
    [8.1, 7.9, 8.1, 9.3, 8.1, 9.1],
    [3.6, 4.1, 5.3, 4.0, 7.9, 1.5],
    [5.4, 2.1, 5.4, 5.4, 5.4, 112.3],
    [1.5, 2.1, 1.8, 1.7, 1.4, 1.7],
    [1.8, 2.1, 1.8, 2.1, 1.1, 1.1],
    [2.7, 2.7, 2.1, 2.7, 2.1, 2.1],
    [0.5, 0.5, 0.7, 3.0, 0.6, 39.6],
    [6.2, 4.3, 4.6, 0.8, 7.3, 5.8],
    [4.0, 3.9, 3.7, 17.7, 17.7, 15.9],
    [2.5, 3.1, 2.9, 2.7, 2.5, 1.8],
    [0.9, 0.9, 0.9, 0.9, 0.9, 0.9],
    [4.6, 5.8, 5.4, 5.1, 5.7, 5.2],
]

# mean direction error (deg): rows = frame rates, cols = slice rates;
# None where some locations returned no direction at that density
_DIRECTION_BY_RATES = [
    [2, 3, 3, 2, 2, 13],
    [2, 2, 2, 2, 3, 3],
    [2, 2, 2, 2, 2, 2],
    [3, 3, None, 3, 3, None],
    [2, 3, 2, 3, 3, 3],
    [4, 3, 3, 4, 4, 14],
    [3, 3, None, 3, 3, None],
    [2, 3, 2, 3, 2, None],
    [4, 3, None, None, 4, None],
]

# column-order probabilities the published study reported for these tables
EXPECTED_P_FRAME_RATE = 0.72
EXPECTED_P_SLICE_RATE = 0.65


def _to_cells(rows) -> np.ndarray:
    return np.array(
        [[np.nan if cell is None else float(cell) for cell in row] for row in rows]
    )


def location_by_frame_rate() -> ErrorTable:
    return ErrorTable(
        row_labels=tuple(range(TEST_POINT_COUNT)),
        col_labels=FRAME_RATES,
        cells=_to_cells(_LOCATION_BY_FRAME_RATE),
        unit="ft",
    )


def location_by_slice_rate() -> ErrorTable:
    return ErrorTable(
        row_labels=tuple(range(TEST_POINT_COUNT)),
        col_labels=SLICE_RATES,
        cells=_to_cells(_LOCATION_BY_SLICE_RATE),
        unit="ft",
    )


def direction_by_rates() -> ErrorTable:
    return ErrorTable(
        row_labels=FRAME_RATES,
        col_labels=SLICE_RATES,
        cells=_to_cells(_DIRECTION_BY_RATES),
        unit="deg",
    )
