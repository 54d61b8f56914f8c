import numpy as np
import numba as nb


def dict_add(d1, d2):
    """Add two dicts together without overwriting any values in the first dict. Returns a new dict without modifying
    the input dicts.

    Parameters
    ----------
    d1 : dict
        Main dictionary
    d2 : dict
        Dictionary of values to try to add

    Returns
    -------
    dict
        Combined dictionary, containing the elements of d1 and d2, except in the case where a key in d2 was the same
        as in d1, in which case only the value in d1 is used.
    """
    d = d1.copy()
    d.update({k: v for k, v in d2.items() if k not in d1})
    return d


def geometric_grid(hi, n, lo=None):
    """Geometric grid of n points in (0, hi], finest near zero. This is where the average functions of interest vary
    the most (power kinds are singular at 0).

    Parameters
    ----------
    hi : float
        Right endpoint, included
    n : int
        Number of points, at least 2
    lo : float, optional
        Smallest grid point. Defaults to hi*1e-8.

    Returns
    -------
    np.ndarray
        Increasing grid
    """
    if n < 2:
        raise ValueError(f'Grid needs at least 2 points, got {n}')
    lo = hi*1e-8 if lo is None else lo
    return np.geomspace(lo, hi, n)


@nb.jit(nopython=True)
def count_decreases(values, rtol):
    """Count the places where a sampled sequence decreases by more than rtol relative to the local magnitude."""
    n = 0
    for i in range(values.size - 1):
        scale = max(abs(values[i]), abs(values[i+1]))
        if values[i+1] < values[i] - rtol*scale:
            n += 1
    return n


@nb.jit(nopython=True)
def sign_changes(values):
    """Locate the roots of a sampled function: exact zeros, and sign flips between neighbouring nonzero samples.

    Parameters
    ----------
    values : np.ndarray
        Function values on an increasing grid

    Returns
    -------
    np.ndarray
        Indices i of the samples at (or just right of) each root
    """
    out = np.empty(values.size, dtype=np.int64)
    n = 0
    last = -1
    for i in range(values.size):
        v = values[i]
        if v == 0.0:
            out[n] = i
            n += 1
        else:
            # A zero between two nonzero samples has already been counted
            if last == i - 1 and last >= 0 and (values[last] < 0) != (v < 0):
                out[n] = i
                n += 1
            last = i
    return out[:n]
