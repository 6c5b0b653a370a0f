"""Rewrite tests/golden/*.bpmn from the current compiler output.

Run only after an intentional change to the output, then review the diff.
"""

from pathlib import Path

from powl2bpmn import compile_text

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    golden = ROOT / "tests" / "golden"
    golden.mkdir(parents=True, exist_ok=True)
    for path in sorted((ROOT / "corpus").glob("*.powl")):
        xml = compile_text(path.read_text(encoding="utf-8")).xml
        target = golden / f"{path.stem}.bpmn"
        changed = not target.exists() or target.read_text(encoding="utf-8") != xml
        target.write_text(xml, encoding="utf-8")
        print(f"{'updated' if changed else 'same   '} {target.relative_to(ROOT)}")
