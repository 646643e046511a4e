from __future__ import annotations

import argparse
from pathlib import Path

from app.core.config import settings
from app.core.errors import EXIT_OK
from app.schemas.detection import ClusterConfig
from app.schemas.framing import FramingConfig
from app.services.checkpoint_service import check_geometry, load_checkpoint
from app.services.detection_service import detect_with_candidates, write_candidates
from app.services.signal_io_service import read_wav, write_labels


def run(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    speech = read_wav(args.wav)
    if args.wd_ms is not None or args.context_ms is not None:
        framing = FramingConfig(
            wd_ms=args.wd_ms if args.wd_ms is not None else FramingConfig().wd_ms,
            context_ms=args.context_ms if args.context_ms is not None else FramingConfig().context_ms,
        )
        geometry = framing.geometry(speech.sample_rate)
        check_geometry(
            model.config,
            geometry.wd if args.wd_ms is not None else None,
            geometry.wi if args.context_ms is not None else None,
        )

    cluster = ClusterConfig(
        bin_size=args.bin_size,
        threshold=args.threshold,
        inference_shift=args.shift,
        min_group_mass=args.min_group_mass,
    )
    labels, cands = detect_with_candidates(
        model, speech, cluster, batch_size=settings.GCINET_INFERENCE_BATCH_SIZE
    )
    write_labels(labels, args.out)
    if args.candidates is not None:
        write_candidates(cands, args.candidates)
    print(f"{len(labels)} GCIs from {len(cands)} candidates -> {args.out}")
    return EXIT_OK


def register(subparsers) -> None:
    defaults = ClusterConfig()
    parser = subparsers.add_parser("detect", help="Detect GCIs in a WAV file with a trained checkpoint.")
    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--wav", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True, help="Label file to write.")
    parser.add_argument("--candidates", type=Path, default=None, help="Also dump `location probability` per candidate.")
    parser.add_argument("--bin-size", type=int, default=defaults.bin_size)
    parser.add_argument("--threshold", type=float, default=defaults.threshold)
    parser.add_argument("--shift", type=int, default=defaults.inference_shift, help="Inference frame shift in samples.")
    parser.add_argument("--min-group-mass", type=float, default=None, help="Drop groups lighter than this.")
    parser.add_argument("--wd-ms", type=float, default=None, help="Must match the checkpoint if given.")
    parser.add_argument("--context-ms", type=float, default=None, help="Must match the checkpoint if given.")
    parser.set_defaults(handler=run)
