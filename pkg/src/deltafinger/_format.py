"""Fixed 9-decimal number formatting shared by every text output."""

import numpy as np


def fixed(v: float) -> str:
    # Rounding first keeps tiny negatives from printing as "-0.000000000".
    return f"{round(float(v), 9) + 0.0:.9f}"


def fixed_rows(rows) -> np.ndarray:
    return np.round(np.asarray(rows, dtype=float), 9) + 0.0
