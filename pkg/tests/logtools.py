import csv

import numpy as np


def read_log(path):
    """Jump log CSV as a dict of numpy columns."""
    with open(path) as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float)
    return {c: data[:, i] for i, c in enumerate(rows[0])}
