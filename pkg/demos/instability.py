"""Hard assignment is unstable, soft assignment is not.

Two one-point diagrams straddling the bisector of two codewords land in
different PBoW bins however close they are, while the sPBoW change shrinks
with the distance between them.
"""

import numpy as np

from persistence_codebooks import GmmCodebook
from persistence_codebooks.stability import counterexample, distance_ratio, spbow_constant
from persistence_codebooks.diagram import PersistenceDiagram


def main():
    print("eps       W1        PBoW ratio   PVLAD ratio")
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        r = counterexample(eps, persistence=1.0)
        print(f"{eps:<9g} {r.w1:<9.2e} {r.pbow_ratio:<12.4g} {r.pvlad_ratio:.4g}")

    gmm = GmmCodebook(np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 1.0]]), np.full((2, 2), 0.05))
    print(f"\nsPBoW on the same pairs (bound C = {spbow_constant(gmm):.3f}):")
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        B = PersistenceDiagram([(0.5 - eps, 1.0)])
        Bp = PersistenceDiagram([(0.5 + eps, 1.0)])
        print(f"  eps={eps:<7g} ratio={distance_ratio(B, Bp, gmm, 'spbow'):.4f}")


if __name__ == "__main__":
    main()
