from typing import List


class UnionFind:
    """
    Disjoint-set forest over the elements 0..n-1 with path compression and union by rank.
    Keeps a running count of the sets so the number of connected components of a growing
    subgraph can be read at any time.

    Args:
        - n (int): number of elements, each starting in its own set
    """

    def __init__(self, n: int):
        self.parent: List[int] = list(range(n))
        self.rank: List[int] = [0] * n
        self.components = n

    def find(self, element: int) -> int:
        root = element
        while self.parent[root] != root:
            root = self.parent[root]

        # compress the path walked above
        while self.parent[element] != root:
            self.parent[element], element = root, self.parent[element]
        return root

    def union(self, first: int, second: int) -> bool:
        """
        Unites the sets holding first and second.

        Returns:
            True if two different sets got merged, False if both were already in the same set
        """
        rep_first = self.find(first)
        rep_second = self.find(second)

        if rep_first == rep_second:
            return False

        if self.rank[rep_first] == self.rank[rep_second]:
            self.rank[rep_first] += 1
            self.parent[rep_second] = rep_first
        elif self.rank[rep_first] > self.rank[rep_second]:
            self.parent[rep_second] = rep_first
        else:
            self.parent[rep_first] = rep_second

        self.components -= 1
        return True
