# Multiple contrast tests for right-censored survival data
# Copyright (C) 2024 survcontrasts developers

# This program is free software; you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation; either version 2 of the License, or (at your option) any later
# version.

# This program is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or
# FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more
# details.

# You should have received a copy of the GNU General Public License along with
# this program; if not, see https://www.gnu.org/licenses/gpl-2.0.html


"""
Numerical kernels: pseudoinverse, chi-square tails, maxima of correlated
normal vectors, and seeded random streams
"""

import math

import numpy as np
import scipy.linalg
import scipy.stats as stats

DEFAULT_MC_SAMPLES = 100000


class RngStream:
    """Reproducible random stream identified by a master seed and a substream

    Streams are derived with :class:`numpy.random.SeedSequence` so that
    the same (seed, substream path) gives the same sequence on every
    platform and different substreams are statistically independent.
    The underlying generator is PCG64.
    """

    def __init__(self, seed, substream=0, parent_key=()):
        """Create the stream

        :param seed: Master seed (non-negative integer) or None for entropy
        :param substream: Index of this substream under its parent
        :param parent_key: Substream path of the parent stream
        """
        self.seed = seed
        self.substream = substream
        self.key = tuple(parent_key) + (int(substream),)
        sequence = np.random.SeedSequence(seed, spawn_key=self.key)
        if seed is None:
            # keep the drawn entropy so that children follow the same root
            self.seed = sequence.entropy
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, index):
        """Return an independent child stream with the given index"""
        return RngStream(self.seed, substream=index, parent_key=self.key)

    def random(self, size=None):
        """Uniform numbers on [0, 1)"""
        return self.generator.random(size)

    def standard_normal(self, size=None):
        """Standard normal numbers"""
        return self.generator.standard_normal(size)

    def integers(self, low, high=None, size=None):
        """Integers from low (inclusive) to high (exclusive)"""
        return self.generator.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        """Uniform numbers on [low, high)"""
        return self.generator.uniform(low, high, size)

    def __repr__(self):
        return "RngStream(seed={self.seed}, key={self.key})".format(**locals())


def as_rng_stream(seed):
    """Return an RngStream for a seed, an existing stream, or None"""
    if isinstance(seed, RngStream):
        return seed
    return RngStream(seed)


def _symmetric_matrix(matrix):
    """Validate a square finite matrix and return it as a float array"""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(
            "Square matrix required, got shape {shape}".format(shape=matrix.shape)
        )
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix contains non-finite entries")
    return matrix


def auto_tolerance(eigenvalues, dim):
    """Rank tolerance: largest absolute eigenvalue x dim x epsilon x 10"""
    if not len(eigenvalues):
        return 0.0
    return float(np.max(np.abs(eigenvalues))) * dim * np.finfo(float).eps * 10


def moore_penrose(matrix, tol=None):
    """Moore-Penrose pseudoinverse of a symmetric matrix and its numerical rank

    Uses the symmetric eigendecomposition. Eigenvalues with absolute value
    not above *tol* are treated as zero. When *tol* is None (auto), it is
    the largest absolute eigenvalue times dimension times machine epsilon
    times 10.

    :returns: Tuple (pseudoinverse, rank)
    """
    matrix = _symmetric_matrix(matrix)
    dim = matrix.shape[0]
    if dim == 0:
        return np.zeros((0, 0)), 0
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    if tol is None:
        tol = auto_tolerance(eigenvalues, dim)
    keep = np.abs(eigenvalues) > tol
    rank = int(np.count_nonzero(keep))
    if not rank:
        return np.zeros_like(matrix), 0
    kept = eigenvectors[:, keep]
    pseudoinverse = (kept / eigenvalues[keep]) @ kept.T
    # exact symmetry for downstream quadratic forms
    pseudoinverse = (pseudoinverse + pseudoinverse.T) / 2
    return pseudoinverse, rank


def floor_to_psd(matrix):
    """Symmetrize and clip negative eigenvalues to zero

    The matrix is returned untouched (apart from symmetrization) when all
    eigenvalues are already non-negative.
    """
    matrix = _symmetric_matrix(matrix)
    matrix = (matrix + matrix.T) / 2
    if not matrix.size:
        return matrix
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    if eigenvalues.min() >= 0:
        return matrix
    eigenvalues = np.clip(eigenvalues, 0, None)
    floored = (eigenvectors * eigenvalues) @ eigenvectors.T
    return (floored + floored.T) / 2


def chi_square_upper_tail(x, df):
    """Probability that a chi-square variable with *df* degrees exceeds *x*

    A zero-df statistic is degenerate and gets p-value 1.
    """
    if df == 0:
        return 1.0
    if df < 0:
        raise ValueError("Degrees of freedom must be non-negative, got {df}".format(df=df))
    if x < 0:
        raise ValueError("Chi-square statistic must be non-negative, got {x}".format(x=x))
    return float(stats.chi2.sf(x, df))


def _validate_correlation(corr):
    """Check a correlation matrix and return it as a float array"""
    corr = _symmetric_matrix(np.atleast_2d(corr))
    if not np.allclose(np.diag(corr), 1.0, rtol=0, atol=1e-8):
        raise ValueError("Correlation matrix must have unit diagonal")
    return corr


def spectral_factor(corr):
    """Matrix L with L L' equal to *corr* after flooring eigenvalues at zero"""
    eigenvalues, eigenvectors = scipy.linalg.eigh((corr + corr.T) / 2)
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0, None))


def simulate_max_statistic(corr, samples, rng, two_sided=True):
    """Sorted Monte Carlo draws of max_i |Z_i| (or max_i Z_i) for Z ~ N(0, corr)

    Sampling uses the spectral factor, which tolerates singular correlation
    matrices.
    """
    corr = _validate_correlation(corr)
    rng = as_rng_stream(rng)
    factor = spectral_factor(corr)
    draws = rng.standard_normal((int(samples), corr.shape[0])) @ factor.T
    if two_sided:
        draws = np.abs(draws)
    maxima = draws.max(axis=1)
    maxima.sort()
    return maxima


def empirical_quantile(sorted_values, probability):
    """Type-1 empirical quantile: order statistic at ceil(probability * B)"""
    count = len(sorted_values)
    index = max(int(math.ceil(probability * count)) - 1, 0)
    return float(sorted_values[min(index, count - 1)])


def add_one_critical_value(sorted_values, alpha):
    """Threshold c with (1 + #{values >= x}) / (B + 1) <= alpha iff x > c

    The order statistic at B - K with K = floor(alpha (B + 1)) - 1 allowed
    exceedances, or infinity when not even K = 0 is allowed.
    """
    count = len(sorted_values)
    allowed = int(math.floor(alpha * (count + 1) + 1e-9)) - 1
    if allowed < 0:
        return math.inf
    return float(sorted_values[count - allowed - 1])


def exceedance_fraction(sorted_values, observed):
    """Fraction of the values which are greater than or equal to *observed*"""
    count = len(sorted_values)
    below = np.searchsorted(sorted_values, observed, side="left")
    return float(count - below) / count


def equicoordinate_quantile(corr, alpha, samples=DEFAULT_MC_SAMPLES, rng=None, two_sided=True):
    """Monte Carlo equicoordinate (1 - alpha) quantile of N(0, corr)

    The result is the smallest c with P(max_i |Z_i| <= c) >= 1 - alpha in the
    empirical distribution of *samples* draws.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1), got {alpha}".format(alpha=alpha))
    maxima = simulate_max_statistic(corr, samples, rng, two_sided=two_sided)
    return empirical_quantile(maxima, 1 - alpha)


def max_abs_mvn_pvalue(corr, observed, samples=DEFAULT_MC_SAMPLES, rng=None, two_sided=True):
    """Monte Carlo probability that max_i |Z_i| is at least *observed*"""
    maxima = simulate_max_statistic(corr, samples, rng, two_sided=two_sided)
    return exceedance_fraction(maxima, observed)
