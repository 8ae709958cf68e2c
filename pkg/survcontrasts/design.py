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
Weight functions on [0, 1] and pairwise contrast matrices
"""

import itertools

import numpy as np

from .numerics import moore_penrose


class ConfigError(ValueError):
    """Invalid user configuration (weights, contrasts, test parameters)"""


class WeightSpec:
    """Weight function evaluated at the pooled distribution estimate F(t-)

    Kinds are ``fleming_harrington`` (u^r (1 - u)^g), ``crossing``
    (1 - 2u), and ``tabulated`` (piecewise linear through given points).
    """

    def __init__(self, kind, r=0, g=0, points=None, label=None):
        if kind == "fleming_harrington":
            if int(r) != r or int(g) != g or r < 0 or g < 0:
                raise ConfigError(
                    "Fleming-Harrington exponents must be non-negative integers,"
                    " got r={r}, g={g}".format(**locals())
                )
            r = int(r)
            g = int(g)
            default_label = "fh:{r}:{g}".format(**locals())
        elif kind == "crossing":
            default_label = "cross"
        elif kind == "tabulated":
            points = sorted((float(u), float(value)) for u, value in points or [])
            if len(points) < 2:
                raise ConfigError("Tabulated weight needs at least two points")
            knots = [u for u, unused_value in points]
            if knots[0] != 0 or knots[-1] != 1 or len(set(knots)) != len(knots):
                raise ConfigError(
                    "Tabulated weight points must have distinct u from 0 to 1"
                )
            if not np.all(np.isfinite([value for unused_u, value in points])):
                raise ConfigError("Tabulated weight values must be finite")
            default_label = "tab:" + ";".join(
                "{u:g}/{value:g}".format(u=u, value=value) for u, value in points
            )
        else:
            raise ConfigError("Unknown weight kind: {kind}".format(**locals()))
        self.kind = kind
        self.r = r
        self.g = g
        self.points = tuple(points) if points else None
        self.label = label or default_label

    def __call__(self, u):
        """Evaluate for values in [0, 1] (no range check, vectorized)"""
        u = np.asarray(u, dtype=float)
        if self.kind == "fleming_harrington":
            return u**self.r * (1 - u) ** self.g
        if self.kind == "crossing":
            return 1 - 2 * u
        knots, values = zip(*self.points)
        return np.interp(u, knots, values)

    def __eq__(self, other):
        return isinstance(other, WeightSpec) and (
            (self.kind, self.r, self.g, self.points)
            == (other.kind, other.r, other.g, other.points)
        )

    def __hash__(self):
        return hash((self.kind, self.r, self.g, self.points))

    def __repr__(self):
        return "WeightSpec({label})".format(label=self.label)


def fleming_harrington(r=0, g=0):
    """Fleming-Harrington weight u^r (1 - u)^g; r = g = 0 is the log-rank weight"""
    return WeightSpec("fleming_harrington", r=r, g=g)


def crossing():
    """Crossing-hazards weight 1 - 2u"""
    return WeightSpec("crossing")


def tabulated(points):
    """Piecewise-linear weight through (u, value) points covering [0, 1]"""
    return WeightSpec("tabulated", points=points)


def default_weights():
    """Log-rank weight combined with the crossing weight"""
    return [fleming_harrington(0, 0), crossing()]


def eval_weight(weight, u):
    """Evaluate a weight at u in [0, 1]"""
    u_array = np.asarray(u, dtype=float)
    if np.any(u_array < 0) or np.any(u_array > 1) or np.any(np.isnan(u_array)):
        raise ValueError("Weight argument must be in [0, 1], got {u}".format(u=u))
    value = weight(u_array)
    if np.ndim(value) == 0:
        return float(value)
    return value


def weight_rank(weights, grid_size=1001, tol=1e-10):
    """Numerical rank of a weight list on an equidistant grid of [0, 1]

    The Gram matrix of the evaluations is normalized to unit diagonal before
    eigenvalues below *tol* are discarded. Zero weights do not add rank.
    """
    grid = np.linspace(0, 1, grid_size)
    values = np.array([weight(grid) for weight in weights], dtype=float)
    norms = np.sqrt((values**2).sum(axis=1))
    nonzero = norms > 0
    if not np.any(nonzero):
        return 0
    normalized = values[nonzero] / norms[nonzero, np.newaxis]
    unused_inverse, rank = moore_penrose(normalized @ normalized.T, tol=tol)
    return rank


def check_weights(weights):
    """Raise ConfigError unless weights are non-empty and linearly independent"""
    if not weights:
        raise ConfigError("At least one weight is required")
    rank = weight_rank(weights)
    if rank < len(weights):
        raise ConfigError(
            "Weights are not linearly independent (rank {rank} of {count}): {labels}".format(
                rank=rank,
                count=len(weights),
                labels=", ".join(weight.label for weight in weights),
            )
        )


def parse_weight(text):
    """Parse one weight: ``fh:r:g``, ``cross``, or ``tab:u/v;u/v;...``"""
    text = text.strip()
    parts = text.split(":")
    if parts[0] == "cross" and len(parts) == 1:
        return crossing()
    if parts[0] == "fh" and len(parts) == 3:
        try:
            return fleming_harrington(int(parts[1]), int(parts[2]))
        except ValueError:
            pass
    if parts[0] == "tab" and len(parts) == 2:
        try:
            points = [
                tuple(float(number) for number in point.split("/"))
                for point in parts[1].split(";")
            ]
        except ValueError:
            points = None
        if points and all(len(point) == 2 for point in points):
            return tabulated(points)
    raise ConfigError(
        "Unknown weight '{text}' (use fh:r:g, cross, or tab:u/v;u/v)".format(**locals())
    )


def parse_weights(text):
    """Parse a comma-separated list of weights"""
    return [parse_weight(item) for item in text.split(",") if item.strip()]


class ContrastMatrix:
    """Pairwise contrasts h_{j1,j2} with -1 at j1 and +1 at j2

    Pairs use 1-based group indexes with j1 < j2.
    """

    def __init__(self, k, pairs, name="custom"):
        k = int(k)
        if k < 2:
            raise ConfigError("Contrasts need at least two groups, got k={k}".format(k=k))
        pairs = [(int(j1), int(j2)) for j1, j2 in pairs]
        if not pairs:
            raise ConfigError("At least one contrast is required")
        seen = set()
        for j1, j2 in pairs:
            if not 1 <= j1 < j2 <= k:
                raise ConfigError(
                    "Invalid contrast pair ({j1}, {j2}) for k={k},"
                    " pairs must satisfy 1 <= j1 < j2 <= k".format(**locals())
                )
            if (j1, j2) in seen:
                raise ConfigError("Duplicate contrast pair ({j1}, {j2})".format(**locals()))
            seen.add((j1, j2))
        self.k = k
        self.pairs = tuple(pairs)
        self.name = name

    @property
    def q(self):
        """Number of contrasts"""
        return len(self.pairs)

    @property
    def rows(self):
        """Contrast matrix H as a q x k array"""
        matrix = np.zeros((self.q, self.k))
        for row, (j1, j2) in enumerate(self.pairs):
            matrix[row, j1 - 1] = -1
            matrix[row, j2 - 1] = 1
        return matrix

    def labels(self, group_labels=None):
        """Display labels "j2 - j1" using group labels when given"""
        if group_labels is None:
            group_labels = [str(j) for j in range(1, self.k + 1)]
        return [
            "{second} - {first}".format(
                second=group_labels[j2 - 1], first=group_labels[j1 - 1]
            )
            for j1, j2 in self.pairs
        ]

    def __len__(self):
        return self.q

    def __iter__(self):
        return iter(self.pairs)

    def __repr__(self):
        return "ContrastMatrix({name}, k={k}, q={q})".format(
            name=self.name, k=self.k, q=self.q
        )


def dunnett(k):
    """Many-to-one contrasts (1, 2), ..., (1, k)"""
    if k < 2:
        raise ConfigError("Dunnett contrasts need k >= 2, got {k}".format(k=k))
    return ContrastMatrix(k, [(1, j) for j in range(2, k + 1)], name="dunnett")


def tukey(k):
    """All-pairs contrasts (1, 2), ..., (1, k), (2, 3), ..., (k - 1, k)"""
    if k < 2:
        raise ConfigError("Tukey contrasts need k >= 2, got {k}".format(k=k))
    return ContrastMatrix(k, itertools.combinations(range(1, k + 1), 2), name="tukey")


def custom_contrasts(pairs, k=None):
    """Contrasts for the given pairs in the given order

    The number of groups defaults to the largest index used.
    """
    pairs = [tuple(pair) for pair in pairs]
    if k is None:
        k = max([max(pair) for pair in pairs] + [2])
    return ContrastMatrix(k, pairs)


def contrasts_from_matrix(matrix):
    """Build contrasts from H, accepting only rows with a single -1 and +1

    The -1 must come before the +1 so that the pair is (j1, j2) with j1 < j2.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(matrix.sum(axis=1) == 0):
        raise ConfigError("Contrast rows must sum to zero")
    pairs = []
    for row in matrix:
        minus = np.flatnonzero(row == -1)
        plus = np.flatnonzero(row == 1)
        if len(minus) != 1 or len(plus) != 1 or np.count_nonzero(row) != 2:
            raise ConfigError(
                "Only pairwise contrasts (one -1 and one +1) are supported,"
                " got row {row}".format(row=row.tolist())
            )
        pairs.append((int(minus[0]) + 1, int(plus[0]) + 1))
    return ContrastMatrix(matrix.shape[1], pairs)


def parse_contrasts(text, k):
    """Parse ``dunnett``, ``tukey``, or ``pairs:1-2,1-3`` for k groups"""
    text = text.strip()
    if text == "dunnett":
        return dunnett(k)
    if text == "tukey":
        return tukey(k)
    if text.startswith("pairs:"):
        pairs = []
        for item in text[len("pairs:") :].split(","):
            try:
                j1, j2 = item.split("-")
                pairs.append((int(j1), int(j2)))
            except ValueError:
                raise ConfigError("Invalid contrast pair '{item}'".format(**locals()))
        return ContrastMatrix(k, pairs)
    raise ConfigError(
        "Unknown contrast '{text}' (use dunnett, tukey, or pairs:1-2,1-3)".format(**locals())
    )
