from __future__ import annotations

import pytest

from tapcover import build_instance

# The 10-node demo tree used across the suite:
#
#          0 (root)
#         / \
#        1   4
#       / \   \
#      2   3   5
#             / \
#            6   7
#               / \
#              8   9
#
# Leaves: 2, 3, 6, 8, 9.  Named link ids below.
DEMO_EDGES = [(0, 1), (1, 2), (1, 3), (0, 4), (4, 5), (5, 6), (5, 7), (7, 8), (7, 9)]
DEMO_LINKS = [(2, 3), (8, 9), (8, 6), (2, 6), (5, 1), (9, 4)]
L_23, L_89, L_86, L_26, L_51, L_94 = range(6)


@pytest.fixture
def demo():
    return build_instance(DEMO_EDGES, 0, DEMO_LINKS)
