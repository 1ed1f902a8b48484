"""Print MFCF edge counts against the closed form for a range of clique sizes."""

from __future__ import annotations

import argparse

from ifnlogo.dependence import pearson_correlation
from ifnlogo.mfcf import build_mfcf
from ifnlogo.synthetic import make_rng


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", type=int, default=100)
    parser.add_argument("--q", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4, 10, 20, 100])
    args = parser.parse_args()
    corr = pearson_correlation(make_rng(args.seed).standard_normal((args.q, args.p)))
    print("R,n_edges,closed_form")
    for R in args.sizes:
        expected = R * (R - 1) // 2 + (args.p - R) * (R - 1)
        print(f"{R},{build_mfcf(corr, R).n_edges},{expected}")


if __name__ == "__main__":
    main()
