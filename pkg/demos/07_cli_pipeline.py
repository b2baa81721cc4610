"""The whole pipeline through the command-line interface.

Runs in a temporary directory: write a tiny BRAT corpus, convert it to
JSONL, split, train a tagger, predict on held-out text, and score the
predictions. Every step is one `matie` subcommand.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

DOCS = {
    f"doc{i}": (
        f"Sample {i} of nickel was sintered. Hardness was measured at 750 K.",
        [
            ("T1", "Material", "nickel"),
            ("T2", "Operation", "sintered"),
            ("T3", "Property", "Hardness"),
            ("T4", "Number", "750"),
            ("T5", "Amount-Unit", "K"),
        ],
    )
    for i in range(6)
}


def run(*args, cwd):
    cmd = [sys.executable, "-m", "matie.cli", *args]
    print(f"\n$ matie {' '.join(args)}")
    proc = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)
    if proc.stderr.strip():
        print(proc.stderr.strip())
    if proc.returncode != 0:
        raise SystemExit(f"step failed with exit code {proc.returncode}")
    return proc.stdout


with tempfile.TemporaryDirectory() as tmp:
    work = Path(tmp)
    brat = work / "brat"
    brat.mkdir()
    for stem, (text, ents) in DOCS.items():
        (brat / f"{stem}.txt").write_text(text, encoding="utf-8")
        lines = []
        for tid, etype, surface in ents:
            start = text.find(surface)
            lines.append(f"{tid}\t{etype} {start} {start + len(surface)}\t{surface}")
        (brat / f"{stem}.ann").write_text("\n".join(lines) + "\n", encoding="utf-8")

    run("convert", "--brat", "brat", "--out", "corpus.jsonl", cwd=work)
    print(run("stats", "--in", "corpus.jsonl", "--format", "text", cwd=work))
    run("split", "--in", "corpus.jsonl", "--seed", "0", "--out-prefix", "c", cwd=work)
    run(
        "train-ner", "--train", "c.train.jsonl", "--dev", "c.dev.jsonl",
        "--out", "ner.json", "--dim", "8", "--lr", "0.05",
        "--max-epochs", "25", "--seed", "0", cwd=work,
    )
    run(
        "predict", "--in", "c.test.jsonl", "--ner-model", "ner.json",
        "--out", "pred.jsonl", cwd=work,
    )
    report = run(
        "eval", "--gold", "c.test.jsonl", "--pred", "pred.jsonl",
        "--regime", "exact", cwd=work,
    )
    print(json.dumps(json.loads(report), indent=2))
