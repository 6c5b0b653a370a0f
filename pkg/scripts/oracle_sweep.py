"""Compare model and diagram languages on many random models.

    python scripts/oracle_sweep.py --n 300 --seed 1
    python scripts/oracle_sweep.py --cyclic --max-len 8 --n 50
"""

import argparse
import random
import sys
import time
from collections import Counter

from powl2bpmn.dsl import print_model
from powl2bpmn.randgen import GenConfig, random_process
from powl2bpmn.semantics import languages_equal
from powl2bpmn.transform import prune, translate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--max-len", type=int, default=12)
    ap.add_argument("--max-traces", type=int, default=10_000)
    ap.add_argument("--cyclic", action="store_true", help="allow back edges in choice graphs")
    ap.add_argument("--unpruned", action="store_true", help="also check the fragment before pruning")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    cfg = GenConfig(cyclic=args.cyclic)
    verdicts: Counter = Counter()
    started = time.perf_counter()
    for k in range(args.n):
        model = random_process(rng, cfg, name=f"m{k}")
        fragment = translate(model)
        targets = [("pruned", prune(fragment))]
        if args.unpruned:
            targets.append(("unpruned", fragment))
        for what, frag in targets:
            result = languages_equal(model, frag, args.max_len, args.max_traces)
            verdicts[result.verdict] += 1
            if result.verdict == "unequal":
                print(f"# model {k} ({what}): witness {result.witness}")
                print(print_model(model))
    elapsed = time.perf_counter() - started
    print(f"models={args.n} " + " ".join(f"{v}={c}" for v, c in sorted(verdicts.items())))
    print(f"elapsed={elapsed:.1f}s")
    return 1 if verdicts["unequal"] else 0


if __name__ == "__main__":
    sys.exit(main())
