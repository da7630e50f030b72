"""Independent brute-force oracle for the flip automaton.

Deliberately naive: sites live in a dict keyed by coordinates, every pulse
recomputes every neighbor field from scratch, and pulses of a phase are
applied one field value at a time.  Shares no code with the package kernels
beyond the dense id convention (layer-major, row-major in (x, y)), which is
re-derived here by sorting.
"""

import numpy as np


class NaiveAutomaton:
    def __init__(self, L, boundary="embedded"):
        self.L = L
        self.boundary = boundary
        sites = [
            (x, y, z)
            for x in range(L)
            for y in range(L - x)
            for z in range(L - x - y)
        ]
        sites.sort(key=lambda s: (s[0] + s[1] + s[2], s[0], s[1]))
        self.sites = sites
        self.index = {s: i for i, s in enumerate(sites)}
        self.spins = {s: -1 for s in sites}
        self.neighbors = {}
        for x, y, z in sites:
            nbrs = []
            for dx, dy, dz in (
                (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
            ):
                cand = (x + dx, y + dy, z + dz)
                if cand in self.index:
                    nbrs.append(cand)
            self.neighbors[(x, y, z)] = nbrs

    def field(self, site):
        total = sum(self.spins[n] for n in self.neighbors[site])
        if self.boundary == "embedded" and sum(site) == self.L - 1:
            total -= 3
        return total

    def pulse(self, parity, field_value):
        """Flip every spin of the given coordinate parity whose field matches."""
        targets = [
            s
            for s in self.sites
            if sum(s) % 2 == parity and self.field(s) == field_value
        ]
        for s in targets:
            self.spins[s] = -self.spins[s]
        return len(targets)

    def phase(self, phase_index, fields=(-2, -1, 0)):
        """One species phase (B on even phase indices), one pulse per field."""
        parity = 1 if phase_index % 2 == 0 else 0
        return sum(self.pulse(parity, f) for f in fields)

    def values(self):
        """Dense +/-1 int8 array in id order."""
        return np.array([self.spins[s] for s in self.sites], dtype=np.int8)

    def seed_apex(self, value):
        self.spins[(0, 0, 0)] = value
