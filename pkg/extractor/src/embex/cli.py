"""Command line: encode WAV files into a window-embedding corpus."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import ExtractorJob, run_job
from .windows import WindowConfig


def collect_audio(paths) -> list[Path]:
    files = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("*.wav")))
        else:
            files.append(p)
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embex", description="Extract window embeddings from audio"
    )
    parser.add_argument("audio", nargs="+", help="WAV files or directories of them")
    parser.add_argument("--out", required=True, help="output corpus directory")
    parser.add_argument("--model", default="logmel",
                        choices=["logmel", "wav2vec2", "wavlm", "whisper"])
    parser.add_argument("--layer", type=int, default=None,
                        help="encoder layer override (defaults per model)")
    parser.add_argument("--length", type=float, default=0.75, help="window length, seconds")
    parser.add_argument("--stride", type=float, default=0.1, help="window stride, seconds")
    parser.add_argument("--labels", default=None,
                        help="JSON file: clip_id -> {speaker_id, weak_labels}")
    args = parser.parse_args(argv)

    files = collect_audio(args.audio)
    if not files:
        print("error: no audio files found", file=sys.stderr)
        return 2
    try:
        window = WindowConfig(length_s=args.length, stride_s=args.stride)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    job = ExtractorJob(
        audio_paths=tuple(files),
        output_dir=Path(args.out),
        encoder_name=args.model,
        layer=args.layer,
        window=window,
        labels_path=Path(args.labels) if args.labels else None,
    )
    try:
        outcomes = run_job(job)
    except Exception as exc:  # encoder construction failures and the like
        print(f"error: {exc}", file=sys.stderr)
        return 2

    failures = [o for o in outcomes if not o.ok]
    for outcome in failures:
        print(f"{outcome.clip_id}: {outcome.error}", file=sys.stderr)
    print(f"encoded {len(outcomes) - len(failures)}/{len(outcomes)} clips -> {args.out}",
          file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
