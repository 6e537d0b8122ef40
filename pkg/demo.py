#!/usr/bin/env python3
"""
EEGScribe Demo
Synthesizes a small corpus, trains every model at desk scale and compares
random against pretrained initialization
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

from config import resolve_config  # noqa: E402
from experiment import Workspace, run_all  # noqa: E402


def main(out_dir: str = 'output/demo', seed: int = 0):
    print("=" * 80)
    print("🧠 EEGSCRIBE - DEMO")
    print("=" * 80)

    cfg = resolve_config("desk", overrides={"seed": seed})
    ws = Workspace(Path(out_dir))
    print(f"\nSeed {seed}, {cfg.synth_subjects} subjects x {cfg.synth_sentences} sentences x "
          f"{cfg.synth_repetitions} repetitions, {cfg.condition} condition\n")

    results = run_all(cfg, ws)

    # Summary
    print("\n" + "=" * 80)
    print("📊 SUMMARY")
    print("=" * 80)

    pretrain = results['pretrain']
    print(f"Regression MSE: {pretrain.initial_loss:.4f} -> {pretrain.losses[-1]:.4f}")

    artic = results['articulatory'].metrics
    print(f"Articulatory TCN: average RMSE {artic['average_rmse']:.3f}, "
          f"average NRMSE {artic['average_nrmse']:.3f} (mean predictor {artic['baseline_average_nrmse']:.3f})")

    for init in ('random', 'pretrained'):
        report = results[f'eval_{init}']
        status = "✓" if report.corpus_wer < 100 else "✗"
        print(f"{status} WER {init} init + LM: {report.corpus_wer:.2f}%")
        for note in report.notes:
            print(f"   {note}")

    print(f"\n✅ Reports in {ws.reports_dir}/")


if __name__ == "__main__":
    main()
