"""The same workflow through the command line: generate runs, detect, report.

Everything lands in a temporary directory; every output embeds its run
manifest, and rerunning any command with identical arguments reproduces
identical bytes.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def cli(*args):
    cmd = [sys.executable, "-m", "rollstab.cli", *map(str, args)]
    print("$ rollstab " + " ".join(map(str, args)))
    subprocess.run(cmd, check=True)


with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)

    cli("synth", "--regime", "BLOWUP", "--delta", "0.1", "--onset-days", "150",
        "--horizon-days", "730", "--seed", "7", "--grid", "16x240",
        "-o", d / "run.rgf", "--labels", d / "labels.json")
    cli("synth", "--regime", "STABLE", "--horizon-days", "800", "--seed", "3",
        "--grid", "16x240", "-o", d / "reference.rgf")

    cli("report", "--prediction", d / "run.rgf",
        "--reference", d / "reference.rgf", "--name", "demo",
        "-o", d / "report.json", "--csv", d / "report.csv")

    labels = json.loads((d / "labels.json").read_text())
    report = json.loads((d / "report.json").read_text())
    print(f"\nlabel window: {labels['blowup_window']}")
    print(f"detected blow-up day: {report['blowup']['T2m']['day']}")
    print("\nreport.csv:")
    for line in (d / "report.csv").read_text().splitlines():
        if not line.startswith("#"):
            print("  " + line)

    cli("spectra", "--input", d / "run.rgf", "--variable", "T2m", "--daily",
        "-o", d / "bands.csv")
    rows = [l for l in (d / "bands.csv").read_text().splitlines()
            if not l.startswith("#")]
    print(f"\nspectra CSV: {len(rows) - 1} daily rows, header: {rows[0]}")
