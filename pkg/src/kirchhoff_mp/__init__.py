"""Positive solutions of degenerate Kirchhoff problems -m(||u||^2) Lap u = f(u).

Pipeline: P1 discretization (:mod:`.mesh`), problem data and truncations
(:mod:`.model`), energies (:mod:`.energy`), alpha_k and the area condition
(:mod:`.area`), mountain pass search (:mod:`.solver`) and certificates
(:mod:`.verify`).
"""

__version__ = "0.1.0"
