"""Locate the load k1 where the five-phase vacation queue starts beating M/M/1(c*mu)."""
import argparse

from vacation_qbd.analysis import find_crossover_k1


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=4)
    args = p.parse_args()
    res = find_crossover_k1(0.99, 0.98, 0.1, 100.0, args.step, refine=True, workers=args.workers)
    print(f"k1 (grid, interpolated) = {res.k1:.7f}")
    print(f"k1 (root refined)       = {res.k1_refined:.10f}")
    print(f"k1 (exact stationary)   = {res.k1_exact:.7f}")
    print(f"k2                      = {res.k2}")


if __name__ == "__main__":
    main()
