"""Strongly connected components (iterative Tarjan) and the species graph."""

from __future__ import annotations

from typing import Sequence

from .core import Network


def strongly_connected_components(n: int, successors: Sequence[Sequence[int]]) -> list[list[int]]:
    """SCCs of the digraph on ``range(n)``.

    Each component is sorted, and components are ordered by smallest member.
    """
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            succ = successors[v]
            if i < len(succ):
                work[-1] = (v, i + 1)
                w = succ[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    comps.sort(key=lambda c: c[0])
    return comps


def species_graph(network: Network) -> list[list[int]]:
    """Edge i -> j when some reaction consumes species i and produces species j."""
    succ: list[set[int]] = [set() for _ in range(network.n_species)]
    for r in network.reactions:
        for i, a in enumerate(r.nu):
            if a:
                for j, b in enumerate(r.nu_prime):
                    if b:
                        succ[i].add(j)
    return [sorted(s) for s in succ]


def closed_classes(n: int, successors: Sequence[Sequence[int]]) -> list[list[int]]:
    """Components with no edge leaving them."""
    comps = strongly_connected_components(n, successors)
    owner = {}
    for c, comp in enumerate(comps):
        for v in comp:
            owner[v] = c
    out = []
    for c, comp in enumerate(comps):
        if all(owner[w] == c for v in comp for w in successors[v]):
            out.append(comp)
    return out
