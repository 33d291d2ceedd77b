"""Natural cubic spline bases for calendar time and temperature smooths."""

import numpy as np


class SplineError(ValueError):
    pass


class SplineBasis:
    """A natural cubic spline basis on fixed knots.

    The basis has ``df`` columns (the intercept is excluded: column one is
    the identity, the rest are the natural truncated-power differences).
    Between knots every column is a cubic polynomial, C2-continuous at
    the knots, and linear beyond the boundary knots.
    """

    def __init__(self, knots, boundary, df, basis, x):
        self.knots = np.asarray(knots, dtype=float)       # interior knots
        self.boundary = (float(boundary[0]), float(boundary[1]))
        self.df = int(df)
        self.basis = basis                                # n x df
        self.x = np.asarray(x, dtype=float)

    @property
    def all_knots(self):
        return np.concatenate(([self.boundary[0]], self.knots, [self.boundary[1]]))

    def evaluate(self, x_new):
        """Evaluate the basis columns at arbitrary points."""
        return _ncs_columns(np.asarray(x_new, dtype=float), self.all_knots)


def _ncs_columns(x, all_knots):
    # Truncated power construction: N_1 = x, N_{j+1} = d_j(x) - d_{K-1}(x),
    # with d_j(x) = [(x - k_j)_+^3 - (x - k_K)_+^3] / (k_K - k_j).
    k = all_knots
    n_knots = len(k)
    cub_last = np.maximum(x - k[-1], 0.0) ** 3

    def d(j):
        return (np.maximum(x - k[j], 0.0) ** 3 - cub_last) / (k[-1] - k[j])

    cols = [x]
    if n_knots >= 3:
        d_pen = d(n_knots - 2)
        for j in range(n_knots - 2):
            cols.append(d(j) - d_pen)
    return np.column_stack(cols)


def ncs_basis(x, df):
    """Natural cubic spline basis with ``df`` columns.

    Interior knots sit at equally spaced quantiles of the distinct values
    of ``x``; boundary knots at the min and max.
    """
    x = np.asarray(x, dtype=float)
    if df < 1:
        raise SplineError(f"df must be >= 1, got {df}")
    distinct = np.unique(x)
    if len(distinct) < df + 2:
        raise SplineError(
            f"need at least df + 2 = {df + 2} distinct values, got {len(distinct)}"
        )
    boundary = (distinct[0], distinct[-1])
    if df == 1:
        interior = np.empty(0)
    else:
        probs = np.arange(1, df) / df
        interior = np.quantile(distinct, probs)
        all_k = np.concatenate(([boundary[0]], interior, [boundary[1]]))
        if np.any(np.diff(all_k) <= 0):
            raise SplineError("tied knots: not enough distinct values for df")
    all_knots = np.concatenate(([boundary[0]], interior, [boundary[1]]))
    basis = _ncs_columns(x, all_knots)
    return SplineBasis(interior, boundary, df, basis, x)


def second_derivative_jumps(basis, h=1e-3):
    """Finite-difference second-derivative discontinuity at each interior knot.

    Returns an array of shape (n_interior_knots, df); entries should be
    numerically zero for a valid natural cubic spline basis.
    """
    if len(basis.knots) == 0:
        return np.zeros((0, basis.df))

    def second_deriv(x0):
        pts = np.array([x0 - h, x0, x0 + h])
        vals = basis.evaluate(pts)
        return (vals[0] - 2.0 * vals[1] + vals[2]) / h**2

    jumps = []
    for knot in basis.knots:
        # one-sided limits by linear extrapolation to the knot, so the
        # smooth variation of the second derivative does not register
        left = 2.0 * second_deriv(knot - 3.0 * h) - second_deriv(knot - 6.0 * h)
        right = 2.0 * second_deriv(knot + 3.0 * h) - second_deriv(knot + 6.0 * h)
        jumps.append(np.abs(right - left))
    return np.vstack(jumps)
