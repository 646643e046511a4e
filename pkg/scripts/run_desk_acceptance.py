from __future__ import annotations

import argparse
import filecmp
import sys
from pathlib import Path

import pandas as pd

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from app.cli.main import configure_logging
from app.core.config import settings
from app.cli.main import main as gcinet
from app.services.experiment_config_service import load_experiment_config
from app.services.experiment_service import ExperimentRunner

CONFIG_TEMPLATE = """\
[experiment]
name = desk_acceptance
seed = {seed}

[corpus]
manifest = {manifest}

[noise]
source = white
snr_db = clean, 0, 10

[train]
epochs = {epochs}
batch_size = 256
seed = {seed}

[split]
mode = utterance
train_fraction = 0.10
seed = {seed}

[condition.baseline]
train_snr = clean
test_snrs = clean

[condition.matched_10]
train_snr = 10
test_snrs = 10

[condition.cross_snr]
train_snr = 0
test_snrs = 10, clean
"""


def _row(table: pd.DataFrame, condition: str, test_snr: str) -> pd.Series:
    match = table[(table["condition"] == condition) & (table["test_snr"] == test_snr)]
    if match.empty:
        raise SystemExit(f"missing results row {condition}/{test_snr}")
    return match.iloc[0]


def _same_tree(left: Path, right: Path, patterns: list[str]) -> list[str]:
    differences: list[str] = []
    for pattern in patterns:
        for a in sorted(left.glob(pattern)):
            b = right / a.relative_to(left)
            if not b.exists() or not filecmp.cmp(a, b, shallow=False):
                differences.append(str(a.relative_to(left)))
    return differences


def default_output_dir() -> Path:
    return Path(settings.GCINET_OUTPUT_ROOT) / "desk_acceptance"


def main() -> int:
    parser = argparse.ArgumentParser(
        description="Desk-scale end-to-end acceptance: synthetic corpus, baseline, cross-SNR, determinism."
    )
    parser.add_argument("--output-dir", type=Path, default=None, help="Defaults to <GCINET_OUTPUT_ROOT>/desk_acceptance.")
    parser.add_argument("--utterances", type=int, default=40, help="Synthetic utterances (1.5 s each).")
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=None, help="Defaults to GCINET_DEFAULT_SEED.")
    args = parser.parse_args()
    if args.output_dir is None:
        args.output_dir = default_output_dir()
    if args.seed is None:
        args.seed = settings.GCINET_DEFAULT_SEED
    configure_logging("INFO")

    out = args.output_dir.resolve()
    corpus = out / "corpus"
    code = gcinet(
        [
            "synth",
            "--output-dir", str(corpus),
            "--count", str(args.utterances),
            "--duration", "1.5",
            "--pitch-range", "4-16",
            "--seed", str(args.seed),
        ]
    )
    if code != 0:
        print(f"FAIL synth exit={code}")
        return 1

    config_path = out / "desk_acceptance.ini"
    config_path.write_text(
        CONFIG_TEMPLATE.format(manifest=corpus / "manifest.csv", epochs=args.epochs, seed=args.seed),
        encoding="utf-8",
    )
    config = load_experiment_config(config_path)
    table = ExperimentRunner(config, out / "run_a", jobs=1).run()

    checks: list[tuple[str, bool, str]] = []
    baseline = _row(table, "baseline", "clean")
    checks.append(("baseline IDR >= 95", baseline["idr"] >= 95.0, f"{baseline['idr']:.2f}"))
    checks.append(("baseline IDA <= 0.5 ms", baseline["ida_ms"] <= 0.5, f"{baseline['ida_ms']:.4f}"))
    checks.append(("baseline FAR <= 3", baseline["far"] <= 3.0, f"{baseline['far']:.2f}"))

    matched = _row(table, "matched_10", "10")
    cross_10 = _row(table, "cross_snr", "10")
    cross_clean = _row(table, "cross_snr", "clean")
    drop_10 = matched["idr"] - cross_10["idr"]
    drop_clean = baseline["idr"] - cross_clean["idr"]
    checks.append(("0 dB model at 10 dB loses <= 5 IDR points", drop_10 <= 5.0, f"{drop_10:.2f}"))
    checks.append(("0 dB model on clean loses <= 5 IDR points", drop_clean <= 5.0, f"{drop_clean:.2f}"))

    rerun = load_experiment_config(config_path)
    rerun = rerun.model_copy(update={"conditions": [c for c in rerun.conditions if c.name == "baseline"]})
    ExperimentRunner(rerun, out / "run_b", jobs=1).run()
    differences = _same_tree(
        out / "run_a" / "conditions" / "baseline",
        out / "run_b" / "conditions" / "baseline",
        ["model.gcic", "loss.csv", "eval_*.csv", "detected/**/*.txt"],
    )
    checks.append(("baseline rerun is byte-identical", not differences, ", ".join(differences) or "identical"))

    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
    return 0 if all(passed for _, passed, _ in checks) else 1


if __name__ == "__main__":
    raise SystemExit(main())
