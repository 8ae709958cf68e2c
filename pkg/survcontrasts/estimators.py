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
Counting-process estimators: Nelson-Aalen, pooled Kaplan-Meier,
and the wild bootstrap Nelson-Aalen

Functions ending in ``_increments`` work on the whole event-time grid of a
risk table and are what the test statistics use. The step-function
variants are built on top of them.
"""

import numpy as np
import scipy.sparse
import scipy.stats as stats


class StepFunction:
    """Right-continuous piecewise-constant function

    The function equals *initial* before the first jump time and
    ``values[i]`` on ``[jump_times[i], jump_times[i + 1])``.
    """

    def __init__(self, jump_times, values, initial=0.0):
        jump_times = np.asarray(jump_times, dtype=float)
        values = np.asarray(values, dtype=float)
        if jump_times.shape != values.shape:
            raise ValueError("Jump times and values must have the same length")
        if np.any(np.diff(jump_times) <= 0):
            raise ValueError("Jump times must be strictly increasing")
        self.jump_times = jump_times
        self.values = values
        self.initial = float(initial)

    def _lookup(self, t, side):
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.jump_times, t, side=side) - 1
        padded = np.concatenate(([self.initial], self.values))
        result = padded[index + 1]
        if result.ndim == 0:
            return float(result)
        return result

    def value_at(self, t):
        """Value at t (right-continuous)"""
        return self._lookup(t, side="right")

    def value_before(self, t):
        """Left limit at t"""
        return self._lookup(t, side="left")

    @property
    def jumps(self):
        """Size of the jump at each jump time"""
        return np.diff(np.concatenate(([self.initial], self.values)))

    def to_frame(self, value_name="value"):
        """Return the function as a pandas DataFrame with time and value columns"""
        # We don't want a special dependency to fail import of this file
        # in case this function is not used.
        import pandas as pd  # pylint: disable=import-outside-toplevel

        return pd.DataFrame({"time": self.jump_times, value_name: self.values})

    def __repr__(self):
        return "StepFunction(jumps={count})".format(count=len(self.jump_times))


def _safe_ratio(numerator, denominator):
    """Elementwise numerator / denominator with 0 where the denominator is 0"""
    numerator = np.asarray(numerator, dtype=float)
    denominator = np.asarray(denominator, dtype=float)
    out = np.zeros(np.broadcast(numerator, denominator).shape)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def hazard_increments(rt):
    """Nelson-Aalen increments dN_j / Y_j for every group (times x k)"""
    return _safe_ratio(rt.events, rt.at_risk)


def variation_increments(rt):
    """Optional-variation increments dN_j / Y_j^2 for every group (times x k)"""
    at_risk = rt.at_risk.astype(float)
    return _safe_ratio(rt.events, at_risk * at_risk)


def pooled_counts(rt, subset):
    """Events and at-risk counts summed over a subset of groups"""
    columns = rt.columns(subset)
    events = rt.events[:, columns].sum(axis=1)
    at_risk = rt.at_risk[:, columns].sum(axis=1)
    return events, at_risk


def pooled_distribution(rt, subset):
    """Kaplan-Meier distribution estimate 1 - S(t) at each event time of *rt*"""
    events, at_risk = pooled_counts(rt, subset)
    factors = 1 - _safe_ratio(events, at_risk)
    return 1 - np.cumprod(factors)


def pooled_distribution_before(rt, subset):
    """Left limit F(t-) of the pooled Kaplan-Meier distribution at each event time"""
    distribution = pooled_distribution(rt, subset)
    return np.concatenate(([0.0], distribution[:-1]))


def nelson_aalen(rt, group):
    """Nelson-Aalen estimate of the cumulative hazard of one group

    :param rt: Risk table
    :param group: Group index (1-based)
    """
    column = rt.columns([group])[0]
    increments = hazard_increments(rt)[:, column]
    jumps = rt.events[:, column] > 0
    return StepFunction(rt.times[jumps], np.cumsum(increments)[jumps])


def kaplan_meier_pooled(rt, subset):
    """Kaplan-Meier distribution function F = 1 - S of the pooled subset

    :param rt: Risk table
    :param subset: Non-empty collection of group indexes (1-based)
    """
    subset = list(subset)
    if not subset:
        raise ValueError("Subset of groups must not be empty")
    events, unused_at_risk = pooled_counts(rt, subset)
    distribution = pooled_distribution(rt, subset)
    jumps = events > 0
    return StepFunction(rt.times[jumps], distribution[jumps])


def event_incidence(rt):
    """Sparse subject x (event time, group) incidence matrix of observed events

    Row i has a single one at column ``time_index * k + group_column`` when
    subject i had an event, and is empty for censored subjects.
    """
    subjects = np.flatnonzero(rt.subject_event_index >= 0)
    columns = rt.subject_event_index[subjects] * rt.k + rt.subject_groups[subjects] - 1
    return scipy.sparse.csr_matrix(
        (np.ones(subjects.shape[0]), (subjects, columns)),
        shape=(rt.n, rt.times.shape[0] * rt.k),
    )


def wild_bootstrap_increments(rt, multipliers, incidence=None):
    """Wild bootstrap Nelson-Aalen increments for all groups

    :param rt: Risk table
    :param multipliers: One multiplier per subject in sample order (n,),
        or one row of multipliers per replicate (B, n)
    :param incidence: Precomputed :func:`event_incidence` (optional)
    :returns: Increments of shape (times, k), or (B, times, k) for a matrix
    """
    multipliers = np.asarray(multipliers, dtype=float)
    if multipliers.shape[-1] != rt.n:
        raise ValueError(
            "Expected {n} multipliers (one per subject), got {count}".format(
                n=rt.n, count=multipliers.shape[-1]
            )
        )
    if incidence is None:
        incidence = event_incidence(rt)
    replicates = np.atleast_2d(multipliers)
    weighted_events = np.asarray((incidence.T @ replicates.T).T)
    weighted_events = weighted_events.reshape(replicates.shape[0], rt.times.shape[0], rt.k)
    increments = _safe_ratio(weighted_events, rt.at_risk[np.newaxis, :, :])
    if multipliers.ndim == 1:
        return increments[0]
    return increments


def wild_bootstrap_nelson_aalen(rt, group, multipliers):
    """Wild bootstrap version of the Nelson-Aalen estimate of one group

    At each event time the jump is the sum of the multipliers of subjects
    with an event at that time, divided by the number at risk. The result
    is signed, not monotone.

    :param rt: Risk table
    :param group: Group index (1-based)
    :param multipliers: One multiplier per subject of the group, in input order
    """
    column = rt.columns([group])[0]
    multipliers = np.asarray(multipliers, dtype=float)
    members = np.flatnonzero(rt.subject_groups == group)
    if multipliers.shape != members.shape:
        raise ValueError(
            "Expected {expected} multipliers for group {group}, got {count}".format(
                expected=members.shape[0], group=group, count=multipliers.size
            )
        )
    full = np.zeros(rt.n)
    full[members] = multipliers
    increments = wild_bootstrap_increments(rt, full)[:, column]
    jumps = rt.events[:, column] > 0
    return StepFunction(rt.times[jumps], np.cumsum(increments)[jumps])


# P(Poisson(1) > 30) is below 1e-32, far under double precision of uniforms
_POISSON_CDF = stats.poisson.cdf(np.arange(31), 1.0)


def draw_rademacher(count, rng):
    """Multipliers -1 or +1 with probability 1/2 each"""
    return rng.integers(0, 2, size=count).astype(float) * 2 - 1


def draw_centered_poisson(count, rng):
    """Poisson(1) - 1 multipliers drawn by inversion of uniforms"""
    uniforms = rng.random(count)
    values = np.searchsorted(_POISSON_CDF, uniforms, side="right")
    return np.minimum(values, _POISSON_CDF.shape[0] - 1).astype(float) - 1


MULTIPLIER_LAWS = {
    "rademacher": draw_rademacher,
    "centered_poisson": draw_centered_poisson,
}


def draw_multipliers(dist, count, rng):
    """Draw wild bootstrap multipliers with mean 0 and variance 1

    :param dist: ``rademacher`` or ``centered_poisson``
    :param count: Number of multipliers
    :param rng: :class:`~survcontrasts.numerics.RngStream`
    """
    if count < 0:
        raise ValueError("Count must be non-negative, got {count}".format(count=count))
    try:
        draw = MULTIPLIER_LAWS[dist]
    except KeyError:
        raise ValueError("Unknown multiplier distribution: {dist}".format(dist=dist))
    return draw(count, rng)
