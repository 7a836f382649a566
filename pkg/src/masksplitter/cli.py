"""Command-line entry point: ``masksplitter <command> ...``.

Exit status: 0 on success, 1 on I/O or validation failure, 2 on usage
errors (unknown command or flag).
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from masksplitter import dataset, head, metrics, pnm
from masksplitter.errors import MaskSplitterError
from masksplitter.masks import binarize_scores, connected_components
from masksplitter.splitter import split_masks

log = logging.getLogger("masksplitter")

GRAD_CHECK_TOLERANCE = 1e-5
CURVE_COLUMNS = ["step", "l_gs", "l_good", "l_badcows", "l_badpreds", "total"]


@dataclass(frozen=True)
class ManifestRecord:
    image: Path
    pred: Path
    gt: Path
    score: Path | None = None


def read_manifest(path) -> list[ManifestRecord]:
    """CSV rows of ``image,pred,gt[,score]``; an optional header row starts with ``image``.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    records, seen = [], set()
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [cell.strip() for cell in row]
            if not row or not any(row):
                continue
            if lineno == 1 and row[0].lower() == "image":
                continue
            if len(row) not in (3, 4) or not all(row[:3]):
                raise MaskSplitterError(f"{path}:{lineno}: expected image,pred,gt[,score]")
            if row[0] in seen:
                raise MaskSplitterError(f"{path}:{lineno}: duplicate image path {row[0]}")
            seen.add(row[0])
            score = base / row[3] if len(row) == 4 and row[3] else None
            records.append(ManifestRecord(base / row[0], base / row[1], base / row[2], score))
    if not records:
        raise MaskSplitterError(f"{path}: manifest has no records")
    return records


def _load_detections(record: ManifestRecord, connectivity):
    arr, maxval = pnm.read_pgm(record.pred)
    scores = None
    if record.score is not None:
        scores = [float(line) for line in record.score.read_text().split()]
    if maxval == 65535:
        return metrics.detections_from_labels(pnm.read_labels(record.pred), scores)
    return metrics.detections_from_mask(arr != 0, connectivity, scores)


def _parse_size(text):
    try:
        h, w = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H,W, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return h, w


def _parse_thresholds(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if item == "sweep":
            out.append("sweep")
            continue
        try:
            value = float(item)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad threshold {item!r}") from None
        if not 0 < value <= 1:
            raise argparse.ArgumentTypeError(f"threshold {value} outside (0, 1]")
        out.append(value)
    return out


def _column_name(t):
    return "AP@0.5:0.95" if t == "sweep" else f"AP@{t:g}"


def cmd_split(args):
    preds = connected_components(pnm.read_mask(args.pred), args.connectivity)
    gt = pnm.read_labels(args.gt)
    result = split_masks(preds, gt, args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, mask in zip(("good", "bad1", "bad2"), result.masks):
        pnm.write_mask(out / f"{name}.pgm", mask)
    counts = {
        "n_good": result.n_good,
        "n_bad_type1": result.n_bad_type1,
        "n_bad_type2": result.n_bad_type2,
    }
    (out / "counts.json").write_text(json.dumps(counts, indent=2) + "\n")
    print(json.dumps(counts))
    return 0


def cmd_eval(args):
    names = args.name or []
    if names and len(names) != len(args.manifest):
        raise MaskSplitterError("give one --name per --manifest")
    columns = args.thresholds
    rows = []
    for i, manifest in enumerate(args.manifest):
        records = read_manifest(manifest)
        dets = [_load_detections(r, args.connectivity) for r in records]
        gts = [pnm.read_labels(r.gt) for r in records]
        extra = [t for t in columns if t != "sweep"]
        report = metrics.ap_sweep(dets, gts, extra_thresholds=extra)
        values = [report.mean if t == "sweep" else report.ap[round(t, 4)] for t in columns]
        rows.append((names[i] if names else Path(manifest).stem, values))

    header = ["run"] + [_column_name(t) for t in columns]
    width = max(len(header[0]), *(len(name) for name, _ in rows))
    print("  ".join([header[0].ljust(width)] + [h.rjust(11) for h in header[1:]]))
    for name, values in rows:
        print("  ".join([name.ljust(width)] + [f"{v:.3f}".rjust(11) for v in values]))

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for name, values in rows:
            writer.writerow([name] + [f"{v:.6f}" for v in values])
    return 0


def _toy_problem(args):
    h, w = args.size
    scores, gt = dataset.synth_scene(w, h, args.n, args.occlusion, args.seed)
    preds = connected_components(binarize_scores(scores), args.connectivity)
    split = split_masks(preds, gt)
    params = head.HeadParams.random(h, w, seed=args.seed, scale=0.1)
    return scores, gt, split, params


def cmd_train_toy(args):
    scores, gt, split, params = _toy_problem(args)
    log.info("scene: %d instances, split counts %s", gt.count, split.counts)
    status = 0
    if args.grad_check:
        err = head.gradient_check(scores, gt, split, params, bad_targets=args.bad_targets)
        print(f"max relative gradient error: {err:.3e}")
        if not err < GRAD_CHECK_TOLERANCE:
            print(f"gradient check failed (tolerance {GRAD_CHECK_TOLERANCE:g})", file=sys.stderr)
            status = 1
    if args.iters > 0 or args.out:
        params, history = head.train_head(
            scores, gt, split, params, args.iters, args.lr, bad_targets=args.bad_targets
        )
        print(f"loss: {history[0].total:.6g} -> {history[-1].total:.6g} after {args.iters} steps")
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CURVE_COLUMNS)
                for step, loss in enumerate(history):
                    writer.writerow([step] + [repr(float(v)) for v in loss.as_row()])
    return status


def cmd_isodata(args):
    print(dataset.isodata_threshold(pnm.read_image(args.image)))
    return 0


def cmd_crop(args):
    frame = pnm.read_image(args.frame)
    labels = pnm.read_labels(args.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for inst in range(1, labels.count + 1):
        img, lab = dataset.crop_around_instance(frame, labels, inst, args.size)
        pnm.write_image(out / f"crop_{inst:05d}.pgm", img)
        pnm.write_labels(out / f"crop_{inst:05d}_labels.pgm", lab)
    print(f"wrote {labels.count} crops to {out}")
    return 0


def cmd_synth(args):
    h, w = args.size
    scores, gt = dataset.synth_scene(w, h, args.n, args.occlusion, args.seed, noise=args.noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pnm.write_pfm(out / "object.pfm", scores.object_scores)
    pnm.write_pfm(out / "background.pfm", scores.background_scores)
    pnm.write_labels(out / "labels.pgm", gt)
    pnm.write_mask(out / "pred.pgm", binarize_scores(scores))
    pnm.write_image(out / "frame.pgm", dataset.render_frame(gt, args.seed))
    print(f"wrote {gt.count}-instance scene to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="masksplitter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="classify prediction blobs into good / bad1 / bad2")
    p.add_argument("--pred", required=True, help="binary prediction mask (P5, maxval 255)")
    p.add_argument("--gt", required=True, help="ground-truth label map (P5, maxval 65535)")
    p.add_argument("--threshold", type=float, default=0.0, help="overlap means IoU > this")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("eval", help="mask AP over one or more manifests")
    p.add_argument("--manifest", required=True, action="append")
    p.add_argument("--name", action="append", help="row name per manifest")
    p.add_argument("--thresholds", type=_parse_thresholds, default=[0.5, 0.7, "sweep"])
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--out", default="report.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-toy", help="train the count head on one synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_parse_size, default=(16, 16), help="H,W")
    p.add_argument("--iters", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--n", type=int, default=3, help="instances in the scene")
    p.add_argument("--occlusion", type=float, default=0.5)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--bad-targets", choices=head.BAD_TARGET_MODES, default="counts")
    p.add_argument("--out", help="loss-curve CSV")
    p.add_argument("--grad-check", action="store_true")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("isodata", help="print the ISODATA threshold of an 8-bit image")
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_isodata)

    p = sub.add_parser("crop", help="one fixed-size crop per instance")
    p.add_argument("--frame", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--size", type=int, default=250)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("synth", help="write a synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--occlusion", type=float, default=0.0)
    p.add_argument("--size", type=_parse_size, default=(64, 64), help="H,W")
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (MaskSplitterError, ValueError, RuntimeError, OSError) as exc:
        print(f"masksplitter {args.command}: error: {exc}", file=sys.stderr)
        return 1


def run_cli(argv) -> int:
    """Like :func:`main` but returns argparse's usage-error status instead of exiting."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
