"""Command line front-end.

Subcommands:
  generate   sample a dataset manifest and materialize WAV + F0 CSV files
  synth      render one F0 CSV to a WAV file
  features   compute a time-frequency image for one input, save as PFT1
  track      extract a pitch contour from a WAV file
  classify   fit contour families to F0 CSVs or WAVs, emit JSON or CSV
  eval       run a full experiment (tracker_eval, fitter_eval, clip_classify)
  export     bulk-export tensors / contours for downstream model training

Exit codes: 0 success, 2 validation error, 1 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .contours import hz_to_cents, read_f0_csv
from .datasetio import ingest_labeled_clips, load_clip, materialize_dataset, patch_clip
from .experiments import (
    prepare_out_dir,
    run_clip_classify,
    run_fitter_eval,
    run_tracker_eval,
)
from .features import (
    binary_pitch_image,
    cqt_logmag,
    mel_logmag,
    stft_logmag,
    to_model_input,
)
from .fitter import classify_contour
from .sampling import Manifest, SamplerConfig, build_manifest
from .synth import max_partials, synthesize
from .tensorio import write_tensor
from .tracker import TrackerConfig, track_pitch
from .wavio import read_wav, write_wav

__all__ = ["main", "build_parser"]

_FEATURE_FNS = {"stft": stft_logmag, "mel": mel_logmag, "cqt": cqt_logmag}
_REPRS = ("stft", "mel", "cqt", "pitch")


def _manifest_path(arg):
    """Accept either a dataset directory or a manifest.json path."""
    arg = os.fspath(arg)
    if os.path.isdir(arg):
        return os.path.join(arg, "manifest.json"), arg
    return arg, os.path.dirname(arg) or "."


def _input_contour(path, config=TrackerConfig()):
    """F0 contour from either an F0 CSV or a WAV file (tracked)."""
    if os.fspath(path).lower().endswith(".csv"):
        return read_f0_csv(path)
    return track_pitch(read_wav(path), config).to_pitch_contour()


def _feature_image(path, repr_kind):
    if repr_kind == "pitch":
        return binary_pitch_image(_input_contour(path))
    if os.fspath(path).lower().endswith(".csv"):
        raise ValueError(f"--repr {repr_kind} needs audio input, got {path}")
    return _FEATURE_FNS[repr_kind](read_wav(path))


def _image_sidecar(image):
    return {
        "kind": image.kind,
        "bin_freqs": [float(v) for v in image.bin_freqs],
        "hop": image.hop_s,
        "log_floor": image.log_floor_db,
    }


def _export_tensor(path, image, model_input):
    if model_input:
        mi = to_model_input(image)
        write_tensor(path, mi.tensor,
                     {"kind": mi.source_kind, "model_input": True})
    else:
        write_tensor(path, image.matrix, _image_sidecar(image))


def _write_tracked_csv(path, tracked):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "f0_hz", "voiced", "strength"])
        times = np.arange(len(tracked)) / tracked.frame_rate
        for i in range(len(tracked)):
            writer.writerow([f"{times[i]:.6f}", f"{tracked.f0[i]:.4f}",
                             int(tracked.voicing[i]),
                             f"{tracked.strength[i]:.6f}"])


def _cmd_generate(args):
    config = SamplerConfig(global_seed=args.seed,
                           clips_per_type=args.clips_per_type)
    manifest = build_manifest(config)
    existing = os.path.join(args.out, "manifest.json")
    if os.path.exists(existing) and not args.force:
        if Manifest.load(existing).to_json() != manifest.to_json():
            raise ValueError(
                f"{existing} was generated with different settings "
                "(use --force to overwrite)")
    report = materialize_dataset(manifest, args.out)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_synth(args):
    contour = read_f0_csv(args.input)
    k = args.num_partials
    if k is None:
        k = max_partials(float(contour.values.max()))
    write_wav(args.out, synthesize(contour, num_partials=k))
    return 0


def _cmd_track(args):
    tracked = track_pitch(read_wav(args.input), TrackerConfig())
    _write_tracked_csv(args.out, tracked)
    return 0


def _cmd_features(args):
    image = _feature_image(args.input, args.repr)
    _export_tensor(args.out, image, args.model_input)
    return 0


def _cmd_classify(args):
    rows = []
    for path in args.inputs:
        contour = _input_contour(path)
        fit = classify_contour(contour)
        p = fit.params
        rows.append({
            "id": os.path.splitext(os.path.basename(path))[0],
            "predicted_type": fit.kind.value,
            "f_b_hz": p.base_hz,
            "f_b_cent": hz_to_cents(p.base_hz),
            "delta_f_cents": p.extent_cents,
            "f_m_hz": p.mod_hz,
            "phi": p.phase,
            "reversed": p.reversed,
            "residual_cents": fit.residual_cents,
        })
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump(rows, out, indent=2)
            out.write("\n")
        else:
            writer = csv.DictWriter(out, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: int(v) if isinstance(v, bool) else v
                                 for k, v in row.items()})
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_eval(args):
    if args.pipeline == "clip_classify":
        if not args.index:
            raise ValueError("clip_classify needs --index")
        clip_set = ingest_labeled_clips(args.index, patch_len=args.patch_len)
        summary = run_clip_classify(clip_set, out_dir=args.out,
                                    force=args.force)
    else:
        if not args.manifest:
            raise ValueError(f"{args.pipeline} needs --manifest")
        _, dataset_dir = _manifest_path(args.manifest)
        runner = {"tracker_eval": run_tracker_eval,
                  "fitter_eval": run_fitter_eval}[args.pipeline]
        summary = runner(dataset_dir, split=args.split, out_dir=args.out,
                         force=args.force)
    summary = {k: v for k, v in summary.items() if k != "rows"}
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _export_manifest(args):
    manifest_file, dataset_dir = _manifest_path(args.manifest)
    manifest = Manifest.load(manifest_file)
    out = prepare_out_dir(args.out, args.force)
    tensor_dir = os.path.join(out, "tensors")
    os.makedirs(tensor_dir, exist_ok=True)
    entries = [e for e in manifest.entries
               if args.split == "both" or e.split == args.split]
    if not entries:
        raise ValueError(f"no entries in split {args.split!r}")
    index = []
    for entry in entries:
        if args.repr == "pitch":
            image = binary_pitch_image(
                read_f0_csv(os.path.join(dataset_dir, entry.f0_path)))
        else:
            image = _FEATURE_FNS[args.repr](
                read_wav(os.path.join(dataset_dir, entry.wav_path)))
        tensor_path = os.path.join(tensor_dir, f"{entry.entry_id}.pft1")
        _export_tensor(tensor_path, image, args.model_input)
        index.append({"id": entry.entry_id, "split": entry.split,
                      "tensor": os.path.relpath(tensor_path, out)})
    doc = {
        "format_version": "1",
        "repr": args.repr,
        "model_input": args.model_input,
        "sample_rate": manifest.sample_rate,
        "source_manifest": os.path.abspath(manifest_file),
        "entries": index,
    }
    with open(os.path.join(out, "export.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    json.dump({"entries": len(index), "out": out}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _export_labeled(args):
    clip_set = ingest_labeled_clips(args.index, patch_len=args.patch_len)
    out = prepare_out_dir(args.out, args.force)
    item_dir = os.path.join(out, "patches")
    os.makedirs(item_dir, exist_ok=True)
    config = TrackerConfig()
    rows, patches = [], 0
    for item in clip_set.clips:
        audio = load_clip(item.path, clip_set.sample_rate)
        stem = os.path.splitext(os.path.basename(item.path))[0]
        for i, patch in enumerate(patch_clip(audio, clip_set.patch_len)):
            name = f"{stem}_p{i:03d}"
            if args.repr == "pitch":
                rel = os.path.join("patches", f"{name}.csv")
                _write_tracked_csv(os.path.join(out, rel),
                                   track_pitch(patch, config))
            else:
                rel = os.path.join("patches", f"{name}.pft1")
                image = _FEATURE_FNS[args.repr](patch)
                _export_tensor(os.path.join(out, rel), image,
                               args.model_input)
            rows.append((rel, item.label, item.split, stem))
            patches += 1
    with open(os.path.join(out, "export_index.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "split", "clip"])
        writer.writerows(rows)
    json.dump({"clips": len(clip_set.clips), "patches": patches,
               "skipped": list(clip_set.skipped), "out": out}, sys.stdout,
              indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_export(args):
    if bool(args.manifest) == bool(args.index):
        raise ValueError("export needs exactly one of --manifest / --index")
    if args.manifest:
        return _export_manifest(args)
    return _export_labeled(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spc",
        description="Synthetic pitch contour dataset and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample and materialize a dataset")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--clips-per-type", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("synth", help="render an F0 CSV to WAV")
    p.add_argument("input", help="F0 contour CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--num-partials", type=int, default=None)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("track", help="extract a pitch contour from audio")
    p.add_argument("input", help="WAV file")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_track)

    p = sub.add_parser("features", help="compute one feature image")
    p.add_argument("input", help="WAV file (or F0 CSV for --repr pitch)")
    p.add_argument("--repr", choices=_REPRS, default="cqt")
    p.add_argument("--out", required=True)
    p.add_argument("--model-input", action="store_true",
                   help="resize/stack to a 224x224x3 tensor in [-1, 1]")
    p.set_defaults(fn=_cmd_features)

    p = sub.add_parser("classify", help="fit contour families to inputs")
    p.add_argument("inputs", nargs="+", help="F0 CSVs or WAV files")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("eval", help="run an experiment pipeline")
    p.add_argument("--pipeline", required=True,
                   choices=("tracker_eval", "fitter_eval", "clip_classify"))
    p.add_argument("--manifest", default=None,
                   help="dataset dir or manifest.json")
    p.add_argument("--index", default=None,
                   help="labeled clips: index CSV or class-per-dir root")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--patch-len", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("export", help="bulk-export tensors or contours")
    p.add_argument("--manifest", default=None,
                   help="dataset dir or manifest.json")
    p.add_argument("--index", default=None,
                   help="labeled clips: index CSV or class-per-dir root")
    p.add_argument("--repr", choices=_REPRS, default="cqt")
    p.add_argument("--model-input", action="store_true")
    p.add_argument("--split", choices=("train", "test", "both"),
                   default="both")
    p.add_argument("--patch-len", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
