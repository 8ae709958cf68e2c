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
Weighted log-rank statistics for pairwise contrasts

Two constructions are provided. The *pairwise* one uses only the data of
the two compared groups (pooled Kaplan-Meier of the pair, denominator
Y_j1 + Y_j2). The *pooled* one uses the Kaplan-Meier estimate of all groups
and the total number at risk Y. Both go through :class:`ContrastKernel` so
that they coincide exactly for two groups.

Vectors over several contrasts and weights are ordered contrast-major,
weight-minor: entry ``a * m + p`` belongs to contrast a and weight p.
"""

import numpy as np

from .design import ConfigError, eval_weight
from .estimators import (
    _safe_ratio,
    hazard_increments,
    pooled_counts,
    pooled_distribution_before,
    variation_increments,
)
from .numerics import floor_to_psd, moore_penrose
from .survdata import as_risk_table


class ContrastKernel:
    """Ingredients of the weighted log-rank statistics of one group pair

    :param rt: Risk table
    :param j1: First group of the contrast (1-based, weight -1)
    :param j2: Second group of the contrast (1-based, weight +1)
    :param weights: List of weight functions
    :param pooled: Use all groups for the distribution estimate and
        the number at risk instead of the two compared groups
    """

    # pylint: disable=too-many-instance-attributes

    def __init__(self, rt, j1, j2, weights, pooled=False):
        if j1 == j2:
            raise ValueError("Contrast needs two different groups, got {j1} twice".format(j1=j1))
        self.rt = rt
        self.j1 = j1
        self.j2 = j2
        self.pooled = pooled
        first, second = rt.columns([j1, j2])
        if pooled:
            subset = range(1, rt.k + 1)
        else:
            subset = sorted((j1, j2))
        self.subset = subset
        self.distribution_before = pooled_distribution_before(rt, subset)
        self.pool_events, self.pool_at_risk = pooled_counts(rt, subset)
        at_risk = rt.at_risk.astype(float)
        self.kernel = _safe_ratio(at_risk[:, first] * at_risk[:, second], self.pool_at_risk)
        sizes = rt.group_sizes
        self.scale = float(np.sqrt(rt.n / (float(sizes[first]) * float(sizes[second]))))
        self.weight_values = np.array(
            [eval_weight(weight, self.distribution_before) for weight in weights], dtype=float
        ).reshape(len(weights), -1)
        self._columns = (first, second)

    @property
    def m(self):
        """Number of weights"""
        return self.weight_values.shape[0]

    def statistic(self, increments=None):
        """Weighted log-rank statistics for all weights

        :param increments: Nelson-Aalen increments of all groups, shape
            (times, k), or a stack of bootstrap replicates (B, times, k).
            Defaults to the observed increments.
        :returns: Array of shape (m,) or (B, m)
        """
        if increments is None:
            increments = hazard_increments(self.rt)
        first, second = self._columns
        difference = increments[..., second] - increments[..., first]
        return self.scale * ((difference * self.kernel) @ self.weight_values.T)

    def covariance(self):
        """Covariance estimate of :meth:`statistic` (m x m)"""
        variation = self.kernel * _safe_ratio(self.pool_events, self.pool_at_risk)
        covariance = self.scale**2 * ((self.weight_values * variation) @ self.weight_values.T)
        return (covariance + covariance.T) / 2

    def group_loadings(self, group):
        """Integrand of the statistics against the martingale of one group

        Rows are weights, columns event times. Zero for groups outside the pair.
        """
        if group == self.j2:
            sign = 1.0
        elif group == self.j1:
            sign = -1.0
        else:
            return np.zeros_like(self.weight_values)
        return sign * self.scale * self.weight_values * self.kernel


def quadratic_form(statistics, covariance):
    """Studentized quadratic form T' V^+ T and the rank of V

    A zero rank means the statistic is degenerate and the form is 0.
    """
    pseudoinverse, rank = moore_penrose(covariance)
    if not rank:
        return 0.0, 0
    value = float(statistics @ pseudoinverse @ statistics)
    return max(value, 0.0), rank


def quadratic_forms(replicates, pseudoinverse):
    """Quadratic forms for a stack of statistic vectors (B, m) with a fixed inverse"""
    values = np.einsum("bi,ij,bj->b", replicates, pseudoinverse, replicates)
    return np.clip(values, 0, None)


def pairwise_wlr(rt, j1, j2, weight):
    """Weighted log-rank statistic of groups j1 and j2 from their pooled data"""
    rt = as_risk_table(rt)
    return float(ContrastKernel(rt, j1, j2, [weight]).statistic()[0])


def pairwise_covariance(rt, j1, j2, weights):
    """Covariance matrix (m x m) of the pairwise statistics for several weights"""
    rt = as_risk_table(rt)
    return ContrastKernel(rt, j1, j2, weights).covariance()


def mdir_statistic(rt, j1, j2, weights):
    """Quadratic form of the pairwise statistics with its degrees of freedom

    :returns: Tuple (statistic, df), df = 0 for a degenerate contrast
    """
    rt = as_risk_table(rt)
    kernel = ContrastKernel(rt, j1, j2, weights)
    return quadratic_form(kernel.statistic(), kernel.covariance())


def pooled_wlr(rt, j1, j2, weight):
    """Weighted log-rank statistic of groups j1 and j2 with all-groups pooling"""
    rt = as_risk_table(rt)
    return float(ContrastKernel(rt, j1, j2, [weight], pooled=True).statistic()[0])


def pooled_covariance(rt, j1, j2, weights):
    """Covariance matrix (m x m) of the all-groups pooled statistics"""
    rt = as_risk_table(rt)
    return ContrastKernel(rt, j1, j2, weights, pooled=True).covariance()


def casanova_statistic(rt, j1, j2, weights):
    """Quadratic form of the pooled statistics with its degrees of freedom"""
    rt = as_risk_table(rt)
    kernel = ContrastKernel(rt, j1, j2, weights, pooled=True)
    return quadratic_form(kernel.statistic(), kernel.covariance())


def statistic_vector(rt, contrasts, weights, pooled=False):
    """All statistics for all contrasts and weights (length q * m)"""
    rt = as_risk_table(rt)
    return np.concatenate(
        [ContrastKernel(rt, j1, j2, weights, pooled=pooled).statistic() for j1, j2 in contrasts]
    )


def joint_covariance(rt, contrasts, weights, within="groupwise"):
    """Joint covariance (mq x mq) of the pairwise statistics of all contrasts

    Entries come from the group-wise optional variation dN_j / Y_j^2 of the
    groups shared by two contrasts, for all blocks by default. With
    ``within="pooled"`` the diagonal block of each contrast is replaced by
    :func:`pairwise_covariance`, as the max test uses it.
    The result is floored to positive semidefinite.
    """
    if within not in ("pooled", "groupwise"):
        raise ConfigError("Unknown joint covariance variant: {within}".format(**locals()))
    rt = as_risk_table(rt)
    kernels = [ContrastKernel(rt, j1, j2, weights) for j1, j2 in contrasts]
    m = len(weights)
    dimension = m * len(kernels)
    variation = variation_increments(rt)
    covariance = np.zeros((dimension, dimension))
    for group in range(1, rt.k + 1):
        loadings = np.concatenate([kernel.group_loadings(group) for kernel in kernels])
        covariance += (loadings * variation[:, group - 1]) @ loadings.T
    if within == "pooled":
        for index, kernel in enumerate(kernels):
            block = slice(index * m, (index + 1) * m)
            covariance[block, block] = kernel.covariance()
    return floor_to_psd(covariance)
