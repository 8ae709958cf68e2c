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
Multiple contrast tests for right-censored survival data

Adjusted log-rank, adjusted mdir, maximum weighted log-rank, and
wild bootstrap multiple CASANOVA tests with a Monte Carlo study engine.
"""

__version__ = "0.1.0"
