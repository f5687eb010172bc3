#!/usr/bin/env python3
"""Sweep the trust-attack confirmation depth and report expected times.

For each confirmation depth CD the script generates the blockchain
trust-attack Markov automaton, solves for the minimum expected time until
the attack succeeds, and prints one row per depth (minutes and days).
Depths whose expected time lands within ±20% of 2.5 days are flagged.
With --strategy it also prints the extracted optimal restart/continue
decision per fork state.
"""
import argparse

from qmv.casestudies import BitcoinParams, gen_bitcoin
from qmv.core import Direction, target_mask
from qmv.lang import explore, parse_model
from qmv.numeric import describe_scheduler, ma_expected_time

TARGET_MINUTES = 2.5 * 24 * 60


def main() -> None:
    ap = argparse.ArgumentParser(
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-m", "--hash-rate", type=float, default=0.2,
                    help="attacker's fraction of the global hash rate "
                         "(default 0.2)")
    ap.add_argument("--max-depth", type=int, default=8,
                    help="largest confirmation depth to sweep (default 8)")
    ap.add_argument("--strategy", action="store_true",
                    help="also print the optimal restart/continue table")
    args = ap.parse_args()

    print(f"attacker hash-rate fraction M = {args.hash_rate}")
    print(f"{'CD':>3}  {'states':>6}  {'E[min]':>12}  {'E[days]':>8}")
    for cd in range(1, args.max_depth + 1):
        case = gen_bitcoin(BitcoinParams(M=args.hash_rate, CD=cd))
        space = explore(parse_model(case.model))
        result = ma_expected_time(space, "goal", Direction.MIN)
        near = "  <- within 20% of 2.5 days" \
            if abs(result.value - TARGET_MINUTES) <= 0.2 * TARGET_MINUTES \
            else ""
        print(f"{cd:>3}  {space.n_states:>6}  {result.value:>12.2f}  "
              f"{result.value / (24 * 60):>8.3f}{near}")
        if args.strategy:
            goal = target_mask(space, "goal")
            for row in describe_scheduler(space, result.scheduler):
                if goal[row.state]:
                    continue
                print(f"      m_len={row.values['m_len']} "
                      f"m_diff={row.values['m_diff']:+d} -> {row.action}")


if __name__ == "__main__":
    main()
