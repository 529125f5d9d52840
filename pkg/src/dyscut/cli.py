"""Command-line front end: synth, train-oracle, segment, evaluate, ablate.

Exit codes: 0 on success, 1 when some clips failed but the run continued,
2 for invalid input or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .evaluation import evaluate_corpus
from .oracle import TrainConfig, init_model, load_model, save_model, train_oracle
from .pipeline import PHI_MODES, VARIANTS, clip_rng, segment_clip, weak_label_targets
from .segments import read_segment_records, write_segment_records
from .store import read_corpus_clip, read_corpus_index
from .synthetic import SynthConfig, generate_corpus, write_corpus
from .windows import WindowConfig

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2

_CONFIG_KEYS = {
    "variant": str,
    "tau": float,
    "floor_value": float,
    "eta_s": float,
    "phi_mode": str,
    "mc_passes": int,
    "seed": int,
    "length_s": float,
    "stride_s": float,
    "merge_before_filter": lambda v: v.lower() in ("1", "true", "yes"),
}


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def parse_config_file(path) -> dict:
    """Flat key=value configuration; blank lines and # comments are skipped."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown configuration key {key!r}")
        values[key] = _CONFIG_KEYS[key](raw.strip())
    return values


def _pipeline_settings(args) -> dict:
    """Config file values overridden by explicitly set command-line flags."""
    settings = {
        "variant": "full",
        "tau": 0.25,
        "floor_value": 1e-5,
        "eta_s": 0.2,
        "phi_mode": "sign",
        "mc_passes": 100,
        "seed": 0,
        "merge_before_filter": True,
        "length_s": None,
        "stride_s": None,
    }
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for key in settings:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    if settings["variant"] not in VARIANTS:
        raise ValueError(f"unknown variant {settings['variant']!r}; expected one of {VARIANTS}")
    if settings["phi_mode"] not in PHI_MODES:
        raise ValueError(f"unknown phi mode {settings['phi_mode']!r}; expected one of {PHI_MODES}")
    return settings


def _load_corpus(directory, split):
    index = read_corpus_index(directory)
    entries = index.entries(split)
    if not entries:
        raise ValueError(f"corpus {directory} has no clips in split {split!r}")
    return index, entries


def _check_window_override(settings, manifest) -> None:
    for key, actual in (("length_s", manifest.window_config.length_s),
                        ("stride_s", manifest.window_config.stride_s)):
        wanted = settings[key]
        if wanted is not None and wanted != actual:
            raise ValueError(
                f"clip {manifest.clip_id} was extracted with {key}={actual}, "
                f"configuration demands {wanted}"
            )


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        clip_count=args.clips,
        clip_duration_s=args.duration,
        embedding_dim=args.dim,
        class_count=args.classes,
        cluster_separation=args.separation,
        noise_sigma=args.noise,
        dysfluency_rate=args.rate,
        speakers=args.speakers,
        seed=args.seed,
    )
    wcfg = WindowConfig(length_s=args.length, stride_s=args.stride)
    items = generate_corpus(cfg, wcfg)
    write_corpus(items, args.out, cfg.class_names)
    dysfluent = sum(1 for _, m in items if m.weak_labels)
    _log(
        f"wrote {len(items)} clips ({dysfluent} dysfluent) for {cfg.speakers} speakers "
        f"to {args.out}"
    )
    return EXIT_OK


def cmd_train_oracle(args) -> int:
    index, entries = _load_corpus(args.corpus, args.split)
    eval_speakers = set(index.speakers("eval"))
    split_speakers = set(index.speakers(args.split))
    if args.split != "eval" and eval_speakers & split_speakers:
        raise ValueError(
            f"speakers {sorted(eval_speakers & split_speakers)} appear in both the "
            f"{args.split!r} and 'eval' splits; training would leak evaluation speakers"
        )

    speakers = sorted(split_speakers)
    rng = np.random.default_rng(args.seed)
    shuffled = list(rng.permutation(speakers))
    n_val = max(1, round(args.val_fraction * len(speakers)))
    if n_val >= len(speakers):
        raise ValueError(
            f"cannot hold out {n_val} of {len(speakers)} speakers for validation"
        )
    val_speakers = set(shuffled[:n_val])

    blocks = {"train": ([], [], []), "val": ([], [], [])}
    for entry in entries:
        emb, manifest = read_corpus_clip(args.corpus, entry)
        side = "val" if manifest.speaker_id in val_speakers else "train"
        xs, ys, spk = blocks[side]
        xs.append(np.asarray(emb, dtype=np.float64))
        ys.append(weak_label_targets(manifest, index.classes, len(emb)))
        spk.extend([manifest.speaker_id] * len(emb))

    x_tr, y_tr, spk_tr = (np.vstack(blocks["train"][0]), np.vstack(blocks["train"][1]),
                          blocks["train"][2])
    x_va, y_va, spk_va = (np.vstack(blocks["val"][0]), np.vstack(blocks["val"][1]),
                          blocks["val"][2])

    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        focal_gamma=args.gamma,
        seed=args.seed,
        lr_halving_patience_epochs=args.patience,
    )
    model = init_model(
        x_tr.shape[1], len(index.classes) + 1, hidden_dim=args.hidden,
        dropout_rate=args.dropout, rng=np.random.default_rng(args.seed),
    )
    model, history = train_oracle(
        model, x_tr, y_tr, x_va, y_va, cfg,
        train_speakers=spk_tr, val_speakers=spk_va,
    )
    save_model(model, args.out)

    log_lines = [
        f"epoch={h['epoch']} train_loss={h['train_loss']:.6f} "
        f"val_loss={h['val_loss']:.6f} lr={h['lr']:.3g}"
        for h in history
    ]
    Path(str(args.out) + ".log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    if history:
        _log(f"trained {args.epochs} epochs; final val loss {history[-1]['val_loss']:.6f}")
    _log(f"checkpoint written to {args.out}")
    return EXIT_OK


def _segment_corpus(args, settings, index, entries, model, audit_dir=None):
    """Run the pipeline over a corpus; returns (records, failures)."""

    def run_one(entry):
        emb, manifest = read_corpus_clip(args.corpus, entry)
        _check_window_override(settings, manifest)
        return manifest, segment_clip(
            np.asarray(emb, dtype=np.float64),
            model,
            rng=clip_rng(settings["seed"], manifest.clip_id),
            window_config=manifest.window_config,
            class_names=index.classes,
            variant=settings["variant"],
            tau=settings["tau"],
            floor_value=settings["floor_value"],
            eta_s=settings["eta_s"],
            merge_before_filter=settings["merge_before_filter"],
            phi_mode=settings["phi_mode"],
            mc_passes=settings["mc_passes"],
            collect_aux=audit_dir is not None,
        )

    records = []
    failures = []
    workers = max(1, getattr(args, "workers", 1))
    if workers == 1:
        outcomes = []
        for entry in entries:
            try:
                outcomes.append((entry, run_one(entry)))
            except Exception as exc:  # noqa: BLE001 - per-clip isolation is the contract
                failures.append((entry["clip_id"], exc))
    else:
        def guarded(entry):
            try:
                return entry, run_one(entry)
            except Exception as exc:  # noqa: BLE001
                return entry, exc

        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(guarded, entries))
        outcomes = []
        for entry, result in raw:
            if isinstance(result, Exception):
                failures.append((entry["clip_id"], result))
            else:
                outcomes.append((entry, result))

    for entry, (manifest, result) in outcomes:
        for seg in result.segments:
            records.append((manifest.clip_id, seg))
        if audit_dir is not None:
            audit_dir.mkdir(parents=True, exist_ok=True)
            np.savez(
                audit_dir / f"{manifest.clip_id}.npz",
                window_labels=result.window_labels,
                **{k: v for k, v in result.aux.items()},
            )
    records.sort(key=lambda r: (r[0], r[1].start_s))
    return records, failures


def cmd_segment(args) -> int:
    settings = _pipeline_settings(args)
    index, entries = _load_corpus(args.corpus, args.split)
    model = load_model(args.checkpoint)
    if model.class_count != len(index.classes) + 1:
        raise ValueError(
            f"checkpoint expects {model.class_count - 1} dysfluency classes, "
            f"corpus defines {len(index.classes)}"
        )
    audit_dir = Path(args.audit) if args.audit else None
    records, failures = _segment_corpus(args, settings, index, entries, model, audit_dir)
    write_segment_records(args.out, records)
    for clip_id, exc in failures:
        _log(f"clip {clip_id} failed: {exc}")
    _log(
        f"segmented {len(entries) - len(failures)}/{len(entries)} clips, "
        f"{len(records)} segments -> {args.out}"
    )
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    index, entries = _load_corpus(args.corpus, args.split)
    manifests = [read_corpus_clip(args.corpus, e)[1] for e in entries]
    predictions = read_segment_records(args.pred)
    report = evaluate_corpus(predictions, manifests, index.classes)

    table = report.format_table()
    print(table)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.json").write_text(
        json.dumps(report.to_dict(), indent=1), encoding="utf-8"
    )
    Path(f"{prefix}.txt").write_text(table + "\n", encoding="utf-8")
    if args.audit:
        lines = [
            f"{a.clip_id}\t{a.class_name}\ttp={a.pair_count}\tfp={a.fp}\tfn={a.fn}"
            for a in report.audits
        ]
        Path(f"{prefix}.matches.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    settings = _pipeline_settings(args)
    index, entries = _load_corpus(args.corpus, args.split)
    manifests = [read_corpus_clip(args.corpus, e)[1] for e in entries]
    model = load_model(args.checkpoint)

    variants = args.variants.split(",") if args.variants else list(VARIANTS)
    phi_modes = args.phi_modes.split(",") if args.phi_modes else list(PHI_MODES)
    etas = [float(v) for v in args.eta_grid.split(",")] if args.eta_grid else [settings["eta_s"]]
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    for p in phi_modes:
        if p not in PHI_MODES:
            raise ValueError(f"unknown phi mode {p!r}")

    rows = []
    total_failures = 0
    for variant in variants:
        modes = phi_modes if variant not in ("kmeans", "fuzzy_cmeans") else [None]
        for phi in modes:
            for eta in etas:
                run = dict(settings, variant=variant, eta_s=eta)
                if phi is not None:
                    run["phi_mode"] = phi
                records, failures = _segment_corpus(args, run, index, entries, model)
                total_failures += len(failures)
                predictions: dict = {}
                for clip_id, seg in records:
                    predictions.setdefault(clip_id, []).append(seg)
                report = evaluate_corpus(predictions, manifests, index.classes)
                rows.append({
                    "variant": variant,
                    "phi": phi or "-",
                    "eta_s": eta,
                    "t_f1": report.overall.t_f1,
                    "t_recall": report.overall.t_recall,
                    "onset_error_s": report.overall.onset_error,
                })

    rows.sort(key=lambda r: -r["t_f1"])
    header = f"{'variant':<14}{'phi':<6}{'eta':<6}{'t-F1':>8}{'t-recall':>10}{'onset(s)':>10}"
    lines = [header]
    for r in rows:
        onset = f"{r['onset_error_s']:.3f}" if r["onset_error_s"] is not None else "-"
        lines.append(
            f"{r['variant']:<14}{r['phi']:<6}{r['eta_s']:<6.2f}"
            f"{r['t_f1']:>8.3f}{r['t_recall']:>10.3f}{onset:>10}"
        )
    table = "\n".join(lines)
    print(table)
    Path(args.out).write_text(table + "\n", encoding="utf-8")
    return EXIT_PARTIAL if total_failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyscut", description="Dysfluency segmentation from weak labels"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=50)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=0.35)
    p.add_argument("--speakers", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=float, default=0.75)
    p.add_argument("--stride", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-oracle", help="train the weak-label classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--val-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_oracle)

    def add_pipeline_flags(p):
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument("--variant", default=None, choices=VARIANTS)
        p.add_argument("--phi-mode", dest="phi_mode", default=None, choices=PHI_MODES)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--floor", dest="floor_value", type=float, default=None)
        p.add_argument("--eta", dest="eta_s", type=float, default=None)
        p.add_argument("--passes", dest="mc_passes", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--length", dest="length_s", type=float, default=None)
        p.add_argument("--stride", dest="stride_s", type=float, default=None)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("segment", help="segment a corpus with a trained checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--audit", default=None, help="directory for intermediate matrices")
    add_pipeline_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--audit", action="store_true", help="also write per-clip match counts")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="compare variants on one corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--variants", default=None, help="comma-separated subset of variants")
    p.add_argument("--phi-modes", dest="phi_modes", default=None)
    p.add_argument("--eta-grid", dest="eta_grid", default=None, help="comma-separated eta sweep")
    add_pipeline_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
