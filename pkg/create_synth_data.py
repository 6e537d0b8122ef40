#!/usr/bin/env python3
"""
Create small synthetic EEG/speech datasets
A clean one for demo runs and a "messy" copy with missing files that the
dataset checker should flag
"""
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

from synth import DEFAULT_SENTENCES, SynthSpec, synth_dataset  # noqa: E402


def create_synth_datasets(output_dir: Path = Path('synth_data'), seed: int = 0):
    """Write synth_data/clean and synth_data/messy"""
    clean_dir = output_dir / 'clean' / 'data'
    messy_dir = output_dir / 'messy' / 'data'

    print("Creating synthetic datasets...\n")

    spec = SynthSpec(sentences=DEFAULT_SENTENCES[:3], subjects=2, repetitions=2)
    records = synth_dataset(spec, seed, clean_dir)
    print(f"✓ clean: {len(records)} utterances in {clean_dir}")

    if messy_dir.exists():
        shutil.rmtree(messy_dir)
    shutil.copytree(clean_dir, messy_dir)

    # Missing EEG recording (error)
    (messy_dir / records[0].eeg_path).unlink()
    print(f"✗ messy: removed {records[0].eeg_path}")

    # Missing articulatory targets (warning)
    (messy_dir / records[1].artic_path).unlink()
    print(f"✗ messy: removed {records[1].artic_path}")

    print(f"\n✅ Created datasets in {output_dir}/")
    print("   Check them with:")
    print(f"   python src/main.py --out {output_dir}/clean check")
    print(f"   python src/main.py --out {output_dir}/messy check")


if __name__ == "__main__":
    create_synth_datasets()
