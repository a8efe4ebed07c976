"""E(L) of both systems over a (lambda, mu) grid, written as CSV.

The default 200 x 200 grid takes a few minutes; use --size for a quicker look.
"""
import argparse
import time

from vacation_qbd.cli import RunConfig, run


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--output", "-o", default="surface.csv")
    args = p.parse_args()
    span = (1, args.size, 1)
    cfg = RunConfig("surface", lambda_range=span, mu_range=span, workers=args.workers,
                    output=args.output)
    t0 = time.perf_counter()
    run(cfg)
    print(f"wrote {args.size ** 2} cells to {args.output} in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
