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
Right-censored multi-group survival samples and their risk tables

Groups are numbered 1..k in the public interface (first appearance in the
input). Arrays indexed by group use column j - 1 for group j.
"""

import csv
import math

import numpy as np


class DataError(ValueError):
    """Input data cannot be used (missing column, bad row, no events)"""

    def __init__(self, message, line=None):
        if line is not None:
            message = "Line {line}: {message}".format(**locals())
        super().__init__(message)
        self.line = line


class SurvivalSample:
    """Observed times, event indicators, and group labels of k groups

    The sample is immutable after construction. Subjects keep their input
    order which also defines the order of subjects within a group.
    """

    def __init__(self, times, status, groups, labels=None):
        """Validate and store the observations

        :param times: Observed times (positive, finite)
        :param status: 1 for an observed event, 0 for right-censoring
        :param groups: Group index of each subject, 1..k
        :param labels: Display label of each group (defaults to "1".."k")
        """
        times = np.array(times, dtype=float)
        status = np.array(status, dtype=int)
        groups = np.array(groups, dtype=int)
        if not times.shape == status.shape == groups.shape or times.ndim != 1:
            raise DataError("Times, status, and groups must have the same length")
        if not times.size:
            raise DataError("Sample without observations")
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise DataError("All times must be positive and finite")
        if np.any((status != 0) & (status != 1)):
            raise DataError("Status must be 0 (censored) or 1 (event)")
        k = int(groups.max()) if groups.size else 0
        if labels is None:
            labels = [str(j) for j in range(1, k + 1)]
        labels = [str(label) for label in labels]
        k = len(labels)
        if k < 2:
            raise DataError("At least two groups are required, got {k}".format(k=k))
        if groups.min() < 1 or groups.max() > k:
            raise DataError("Group indices must be between 1 and {k}".format(k=k))
        sizes = np.bincount(groups, minlength=k + 1)[1:]
        if np.any(sizes == 0):
            empty = [labels[j] for j in np.flatnonzero(sizes == 0)]
            raise DataError("Groups without subjects: {empty}".format(**locals()))
        for array in (times, status, groups):
            array.flags.writeable = False
        self.times = times
        self.status = status
        self.groups = groups
        self.labels = labels
        self.group_sizes = sizes
        self.group_sizes.flags.writeable = False

    @property
    def k(self):
        """Number of groups"""
        return len(self.labels)

    @property
    def n(self):
        """Total number of subjects"""
        return int(self.times.shape[0])

    @property
    def num_events(self):
        """Total number of observed events"""
        return int(self.status.sum())

    def subjects(self, group):
        """Indexes of subjects in a group (1-based group index), in input order"""
        return np.flatnonzero(self.groups == group)

    def with_reference(self, label):
        """Return the same sample with the group *label* moved to index 1

        The relative order of the other groups is kept.
        """
        label = str(label)
        if label not in self.labels:
            raise DataError(
                "Unknown reference group: {label} (groups: {labels})".format(
                    label=label, labels=", ".join(self.labels)
                )
            )
        old_index = self.labels.index(label) + 1
        order = [old_index] + [j for j in range(1, self.k + 1) if j != old_index]
        new_index = np.zeros(self.k + 1, dtype=int)
        for new, old in enumerate(order, start=1):
            new_index[old] = new
        labels = [self.labels[old - 1] for old in order]
        return SurvivalSample(self.times, self.status, new_index[self.groups], labels)

    def __repr__(self):
        return "SurvivalSample(n={n}, k={k}, events={events})".format(
            n=self.n, k=self.k, events=self.num_events
        )


def parse_csv(stream, time_column="time", status_column="status", group_column="group"):
    """Read a survival sample from a CSV character stream

    The header row names the columns. Group labels get indices 1..k
    in order of their first appearance.

    :param stream: Text stream (file object or anything ``csv`` can read)
    :param time_column: Name of the column with observed times
    :param status_column: Name of the column with 0/1 event indicators
    :param group_column: Name of the column with group labels
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise DataError("Empty input, header row expected")
    fieldnames = [name.strip() for name in reader.fieldnames]
    reader.fieldnames = fieldnames
    for column in (time_column, status_column, group_column):
        if column not in fieldnames:
            raise DataError(
                "Missing column '{column}' (available: {available})".format(
                    column=column, available=", ".join(fieldnames)
                )
            )
    times = []
    status = []
    groups = []
    label_index = {}
    for row in reader:
        line = reader.line_num
        raw_time = (row[time_column] or "").strip()
        try:
            time = float(raw_time)
        except ValueError:
            raise DataError("Non-numeric time '{raw_time}'".format(**locals()), line)
        if not math.isfinite(time) or time <= 0:
            raise DataError(
                "Non-positive or non-finite time '{raw_time}'".format(**locals()), line
            )
        raw_status = (row[status_column] or "").strip()
        if raw_status not in ("0", "1"):
            raise DataError(
                "Status must be 0 or 1, got '{raw_status}'".format(**locals()), line
            )
        label = (row[group_column] or "").strip()
        if not label:
            raise DataError("Empty group label", line)
        if label not in label_index:
            label_index[label] = len(label_index) + 1
        times.append(time)
        status.append(int(raw_status))
        groups.append(label_index[label])
    if not times:
        raise DataError("No data rows")
    return SurvivalSample(times, status, groups, labels=list(label_index))


def load_sample(filename, time_column="time", status_column="status", group_column="group"):
    """Read a survival sample from a CSV file (UTF-8)

    See :func:`parse_csv` for the parameters.
    """
    try:
        with open(filename, newline="", encoding="utf-8") as file:
            return parse_csv(
                file,
                time_column=time_column,
                status_column=status_column,
                group_column=group_column,
            )
    except OSError as error:
        raise DataError("Cannot read {filename}: {error}".format(**locals()))


class RiskTable:
    """Counting-process summary of a sample at its distinct event times

    ``at_risk[i, j - 1]`` is Y_j just before ``times[i]`` and
    ``events[i, j - 1]`` is dN_j at ``times[i]``. Censorings tied with
    events are counted as still at risk.
    """

    # A table of arrays which mirror the sample, plenty of attributes is fine.
    # pylint: disable=too-many-instance-attributes

    def __init__(self, times, at_risk, events, group_sizes, subject_groups, subject_event_index):
        self.times = times
        self.at_risk = at_risk
        self.events = events
        self.group_sizes = group_sizes
        self.subject_groups = subject_groups
        # index into times for subjects with an event, -1 for censored subjects
        self.subject_event_index = subject_event_index
        for array in (times, at_risk, events, group_sizes, subject_groups, subject_event_index):
            array.flags.writeable = False

    @property
    def k(self):
        """Number of groups"""
        return self.at_risk.shape[1]

    @property
    def n(self):
        """Total number of subjects"""
        return int(self.group_sizes.sum())

    @property
    def total_at_risk(self):
        """Y(t) summed over all groups"""
        return self.at_risk.sum(axis=1)

    @property
    def total_events(self):
        """dN(t) summed over all groups"""
        return self.events.sum(axis=1)

    def columns(self, subset):
        """Column indexes for 1-based group indexes"""
        columns = [int(j) - 1 for j in subset]
        for column in columns:
            if not 0 <= column < self.k:
                raise ValueError(
                    "Group index {j} outside 1..{k}".format(j=column + 1, k=self.k)
                )
        return columns

    def __repr__(self):
        return "RiskTable(event_times={m}, k={k}, n={n})".format(
            m=len(self.times), k=self.k, n=self.n
        )


def build_risk_table(sample):
    """Reduce a sample to at-risk and event counts at distinct event times

    Y_j(t) counts subjects of group j with observed time >= t and
    dN_j(t) counts subjects of group j with an event at exactly t.
    """
    event_mask = sample.status == 1
    if not np.any(event_mask):
        raise DataError("No events in any group, hazard cannot be estimated")
    times = np.unique(sample.times[event_mask])
    k = sample.k
    at_risk = np.empty((times.shape[0], k), dtype=np.int64)
    for column in range(k):
        group_times = np.sort(sample.times[sample.groups == column + 1])
        at_risk[:, column] = group_times.shape[0] - np.searchsorted(
            group_times, times, side="left"
        )
    event_index = np.full(sample.n, -1, dtype=np.int64)
    event_index[event_mask] = np.searchsorted(times, sample.times[event_mask])
    events = np.zeros((times.shape[0], k), dtype=np.int64)
    np.add.at(events, (event_index[event_mask], sample.groups[event_mask] - 1), 1)
    return RiskTable(
        times=times,
        at_risk=at_risk,
        events=events,
        group_sizes=np.array(sample.group_sizes, dtype=np.int64),
        subject_groups=np.array(sample.groups, dtype=np.int64),
        subject_event_index=event_index,
    )


def as_risk_table(data):
    """Return a risk table for either a sample or an existing risk table"""
    if isinstance(data, RiskTable):
        return data
    return build_risk_table(data)
