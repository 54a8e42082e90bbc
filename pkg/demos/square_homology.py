"""The one-dimensional hole of four points on a unit square.

The loop is born when the four sides enter the Rips filtration at radius 1
and is filled when the diagonals appear at sqrt(2).
"""

import numpy as np

from persistence_codebooks.homology import pd_from_cloud, reduce, vr_filtration


def main():
    square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    fc = vr_filtration(square)
    print("simplices per dimension:", np.bincount(fc.dims()))
    pairs = reduce(fc)
    h0, h1 = pairs[0], pairs[1]
    print("H0 (birth, death):", h0.tolist())
    print("H1 (birth, death):", h1.tolist())
    print("H1 diagram (birth, persistence):", pd_from_cloud(square).points.tolist())


if __name__ == "__main__":
    main()
