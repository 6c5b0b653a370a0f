"""Compile every corpus model and print a table of element counts.

    python scripts/compile_corpus.py [--out build/]
"""

import argparse
import sys
from pathlib import Path

from powl2bpmn import compile_text
from powl2bpmn.bpmn_xml import check_structure
from powl2bpmn.layout import check_diagram

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=ROOT / "corpus")
    ap.add_argument("--out", type=Path, help="directory for the .bpmn files")
    args = ap.parse_args()

    header = f"{'model':<22}{'act':>5}{'gw':>5}{'pools':>7}{'lanes':>7}{'msg':>5}  issues"
    print(header)
    print("-" * len(header))
    failed = 0
    for path in sorted(args.corpus.glob("*.powl")):
        compiled = compile_text(path.read_text(encoding="utf-8"))
        s = compiled.stats()
        issues = len(check_diagram(compiled.diagram, compiled.skeleton))
        issues += len(check_structure(compiled.xml).violations)
        failed += bool(issues)
        print(
            f"{path.stem:<22}{s['activities']:>5}{s['gateways']:>5}{s['pools']:>7}"
            f"{s['lanes']:>7}{s['messageFlows']:>5}  {issues}"
        )
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{path.stem}.bpmn").write_text(compiled.xml, encoding="utf-8")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
