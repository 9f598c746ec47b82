"""``irisbind`` command line.

Every command prints one JSON record per line on stdout (CSV for ``roc``
and ``histogram`` when no output file is given). Exit codes: 0 success or
accept, 1 reject, 2 bad input, 3 pipeline failure.
"""
import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, run_pipeline
from .encoding import IrisTemplate, histogram, read_template, write_template
from .errors import (DegenerateInputError, DimensionError, FormatError, GeometryError,
                     IncomparableError, IrisError, KeyReleaseError, LookupFailure,
                     NoEdgesError, ParameterError, PipelineError, RegistrationError,
                     SegmentationError, UnwrapError)
from .imgcore import read_image, write_image
from .keybind import align_probe, lock, unlock
from .matching import decide, error_rates, match, score_pairs
from .normalization import register_similarity, unwrap
from .segmentation import overlay, segment
from .store import EnrollmentStore
from .synth import random_eye_spec, render, rerender_variant, variant_spec

EXIT_OK, EXIT_REJECT, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2, 3

_PIPELINE_ERRORS = (PipelineError, SegmentationError, NoEdgesError, UnwrapError,
                    RegistrationError, IncomparableError, DegenerateInputError)
_INPUT_ERRORS = (FormatError, ParameterError, DimensionError, GeometryError, LookupFailure,
                 OSError)

logger = logging.getLogger("irisbind")


def _emit(record, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(record, sort_keys=True) + "\n")


def _circle(c):
    return None if c is None else c.to_dict()


# -- commands ---------------------------------------------------------------

def cmd_synth(args, cfg):
    out = Path(args.out)
    width = args.width or cfg.synth.width
    height = args.height or cfg.synth.height
    spec = random_eye_spec(args.seed, width, height, args.coverage, args.noise)
    is_variant = args.rotation != 0 or args.dilation != 1 or args.noise_seed is not None
    if is_variant:
        noise_seed = 1 if args.noise_seed is None else args.noise_seed
        img = rerender_variant(spec, width, height, args.rotation, args.dilation,
                               noise_seed=noise_seed)
        truth = variant_spec(spec, args.rotation, args.dilation)
    else:
        noise_seed = 0
        img = render(spec, width, height)
        truth = spec
    write_image(out, img)
    upper, lower = spec.eyelids()
    sidecar = {
        "seed": int(args.seed),
        "width": width,
        "height": height,
        "spec": spec.to_dict(),
        "rotation_deg": float(args.rotation),
        "pupil_dilation": float(args.dilation),
        "noise_seed": int(noise_seed),
        "pupil": truth.pupil.to_dict(),
        "iris": truth.iris.to_dict(),
        "upper_eyelid": None if upper is None else upper.to_dict(),
        "lower_eyelid": None if lower is None else lower.to_dict(),
    }
    side = out.with_suffix(".json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    _emit({"command": "synth", "image": str(out), "sidecar": str(side)})
    return EXIT_OK


def cmd_segment(args, cfg):
    img = read_image(args.image)
    seg = _stage("segment", segment, img, cfg.segmentation)
    if args.mask:
        write_image(args.mask, seg.noise_mask.astype(np.float64))
    if args.overlay:
        write_image(args.overlay, overlay(img, seg))
    _emit({"command": "segment", "image": str(args.image), **seg.to_dict(),
           "mask_fraction": float(seg.noise_mask.mean())})
    return EXIT_OK


def cmd_unwrap(args, cfg):
    img = read_image(args.image)
    seg = _stage("segment", segment, img, cfg.segmentation)
    polar = _stage("unwrap", unwrap, img, seg, cfg.normalization.radial_res,
                   cfg.normalization.angular_res)
    write_image(args.polar, np.clip(polar.samples, 0.0, 1.0))
    if args.mask:
        write_image(args.mask, polar.mask.astype(np.float64))
    _emit({"command": "unwrap", "image": str(args.image), "polar": str(args.polar),
           "mask": None if args.mask is None else str(args.mask),
           "radial_res": polar.radial_res, "angular_res": polar.angular_res,
           "valid_fraction": float(polar.mask.mean())})
    return EXIT_OK


def cmd_register(args, cfg):
    a, b = read_image(args.moving), read_image(args.reference)
    if args.polar:
        n = cfg.normalization
        a = _stage("unwrap", lambda im: unwrap(im, segment(im, cfg.segmentation),
                                               n.radial_res, n.angular_res), a)
        b = _stage("unwrap", lambda im: unwrap(im, segment(im, cfg.segmentation),
                                               n.radial_res, n.angular_res), b)
    params = _stage("register", register_similarity, a, b)
    _emit({"command": "register", "domain": "polar" if args.polar else "image",
           **params.to_dict()})
    return EXIT_OK


def cmd_encode(args, cfg):
    img = read_image(args.image)
    out = run_pipeline(img, cfg)
    folder = Path(args.out_dir)
    folder.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    paths = {
        "template": folder / f"{stem}.irt",
        "overlay": folder / f"{stem}_overlay.pgm",
        "polar": folder / f"{stem}_polar.pgm",
        "polar_mask": folder / f"{stem}_polar_mask.pgm",
        "histogram": folder / f"{stem}_histogram.csv",
        "segmentation": folder / f"{stem}_segmentation.json",
    }
    write_template(paths["template"], out.template)
    write_image(paths["overlay"], overlay(img, out.segmentation))
    write_image(paths["polar"], np.clip(out.polar.samples, 0.0, 1.0))
    write_image(paths["polar_mask"], out.polar.mask.astype(np.float64))
    paths["histogram"].write_text(_histogram_csv(out.template, 2))
    paths["segmentation"].write_text(json.dumps(out.segmentation.to_dict(), indent=2,
                                                sort_keys=True) + "\n")
    t = out.template
    _emit({"command": "encode", "image": str(args.image),
           "artifacts": {k: str(v) for k, v in paths.items()},
           "bits": len(t), "valid_fraction": t.valid_fraction(),
           "radial_res": t.radial_res, "angular_res": t.angular_res, "n_filters": t.n_filters})
    return EXIT_OK


def cmd_match(args, cfg):
    a, b = read_template(args.template_a), read_template(args.template_b)
    mc = cfg.matching
    threshold = mc.threshold if args.threshold is None else args.threshold
    max_shift = mc.max_shift if args.max_shift is None else args.max_shift
    score = match(a, b, max_shift)
    decision = decide(score, threshold, len(a), mc.min_evidence)
    _emit({"command": "match", **score.to_dict(), "decision": decision,
           "threshold": threshold})
    return EXIT_OK if decision == "accept" else EXIT_REJECT


def _parse_key(text, scheme, seed):
    if text == "auto":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x4B3])))
        return rng.integers(0, 2, scheme.key_bits).astype(np.uint8), True
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise ParameterError(f"--bind-key must be hex or 'auto': {exc}") from exc
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits.size != scheme.key_bits:
        raise ParameterError(f"key must be {scheme.key_bits} bits ({scheme.key_bits // 4} hex digits)")
    return bits, False


def _key_hex(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def cmd_enroll(args, cfg):
    store = EnrollmentStore(args.store).init()
    img = read_image(args.image)
    tmpl = run_pipeline(img, cfg).template
    commitment, generated = None, None
    if args.bind_key:
        key, auto = _parse_key(args.bind_key, cfg.keybind, args.seed)
        commitment = _stage("lock", lock, key, tmpl, cfg.keybind)
        generated = _key_hex(key) if auto else None
    rec = store.add(args.identity, tmpl, commitment)
    record = {"command": "enroll", "identity": rec.identity, "template": rec.template,
              "commitment": rec.commitment, "created": rec.created}
    if generated is not None:
        record["key"] = generated
    _emit(record)
    return EXIT_OK


def cmd_verify(args, cfg):
    store = EnrollmentStore(args.store)
    records = store.records(args.identity)
    probe = run_pipeline(read_image(args.image), cfg).template
    mc = cfg.matching
    best, best_rec = None, None
    for rec in records:
        try:
            score = match(store.load_template(rec), probe, mc.max_shift)
        except IncomparableError:
            continue
        if best is None or score.hd < best.hd:
            best, best_rec = score, rec
    if best is None:
        raise IncomparableError("probe shares no valid bits with any enrolled sample")
    decision = decide(best, mc.threshold, len(probe), mc.min_evidence)
    released, key = False, None
    commitment = store.load_commitment(best_rec)
    if commitment is not None and decision == "accept":
        aligned = probe.shifted(-best.best_shift)
        try:
            key = unlock(commitment, aligned)
            released = True
        except KeyReleaseError as exc:
            logger.info("key not released: %s", exc.reason)
    record = {"command": "verify", "identity": args.identity, **best.to_dict(),
              "decision": decision, "key_released": released,
              "has_commitment": commitment is not None}
    if released and args.show_key:
        record["key"] = _key_hex(key)
    _emit(record)
    return EXIT_OK if decision == "accept" else EXIT_REJECT


def _collect_templates(source):
    source = Path(source)
    store = EnrollmentStore(source)
    if store.exists():
        return store.all_templates()
    labels, templates = [], []
    for sub in sorted(p for p in source.iterdir() if p.is_dir()):
        for f in sorted(sub.glob("*.irt")):
            labels.append(sub.name)
            templates.append(read_template(f))
    return labels, templates


def cmd_roc(args, cfg):
    labels, templates = _collect_templates(args.source)
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    if sum(1 for c in counts.values() if c >= 2) < 2:
        raise ParameterError("roc needs at least 2 identities with at least 2 samples each")
    if args.shuffle_labels:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(args.seed), 0x50C])))
        labels = [labels[i] for i in rng.permutation(len(labels))]
    max_shift = cfg.matching.max_shift if args.max_shift is None else args.max_shift
    genuine, impostor = score_pairs(labels, templates, max_shift)
    n_steps = int(round(1.0 / args.step))
    thresholds = np.round(np.arange(n_steps + 1) * args.step, 10)
    far, frr = error_rates(genuine, impostor, thresholds)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "false_accept_rate", "false_reject_rate"])
    for t, fa, fr in zip(thresholds, far, frr):
        writer.writerow([f"{t:.4f}", f"{fa:.6f}", f"{fr:.6f}"])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
        return EXIT_OK
    Path(args.out).write_text(buf.getvalue())
    zero = thresholds[(far == 0) & (frr == 0)]
    _emit({"command": "roc", "csv": str(args.out), "identities": len(counts),
           "samples": len(labels), "genuine_pairs": int(genuine.size),
           "impostor_pairs": int(impostor.size),
           "genuine_max": float(genuine.max()), "impostor_min": float(impostor.min()),
           "zero_error_thresholds": [float(zero.min()), float(zero.max())] if zero.size else None})
    return EXIT_OK


def _histogram_csv(values, n_bins):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_low", "bin_high", "count"])
    counts = histogram(values, n_bins)
    if isinstance(values, IrisTemplate):
        for bit, c in enumerate(counts):
            writer.writerow([bit, bit, int(c)])
    else:
        arr = np.asarray(values, dtype=np.float64)
        lo, hi = float(arr.min()), float(arr.max())
        edges = np.linspace(lo, hi, len(counts) + 1) if hi > lo else np.full(len(counts) + 1, lo)
        for i, c in enumerate(counts):
            writer.writerow([f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}", int(c)])
    return buf.getvalue()


def cmd_histogram(args, cfg):
    path = Path(args.input)
    if path.read_bytes()[:4] == b"IRT1":
        values = read_template(path)
    else:
        values = read_image(path)
    text = _histogram_csv(values, args.bins)
    if args.out:
        Path(args.out).write_text(text)
        _emit({"command": "histogram", "input": str(path), "csv": str(args.out)})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except _PIPELINE_ERRORS as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(name, exc) from exc


# -- argument parsing ------------------------------------------------------

def _global_options(parser, defaults):
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    parser.add_argument("--config", help="JSON file overriding module defaults",
                        **({"default": None} if defaults else kw))
    parser.add_argument("--seed", type=int, help="seed for synthetic data and generated keys",
                        **({"default": 0} if defaults else kw))


def build_parser():
    parser = argparse.ArgumentParser(prog="irisbind", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_options(parser, True)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=fn)
        return p

    p = add("synth", cmd_synth, "render a synthetic eye image with ground-truth sidecar")
    p.add_argument("out", help="output PGM path; the sidecar goes next to it as .json")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--coverage", type=float, default=0.0, help="eyelid coverage in [0, 0.4]")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    p.add_argument("--rotation", type=float, default=0.0, help="variant rotation, degrees")
    p.add_argument("--dilation", type=float, default=1.0, help="variant pupil scale")
    p.add_argument("--noise-seed", type=int, help="variant noise realization")

    p = add("segment", cmd_segment, "locate pupil, iris and eyelids")
    p.add_argument("image")
    p.add_argument("--mask", help="write the noise mask as PGM")
    p.add_argument("--overlay", help="write an annotated overlay PGM")

    p = add("unwrap", cmd_unwrap, "segment and unwrap to a polar grid")
    p.add_argument("image")
    p.add_argument("--polar", required=True, help="polar samples PGM")
    p.add_argument("--mask", help="polar validity mask PGM")

    p = add("register", cmd_register, "estimate scale, rotation and shift between two images")
    p.add_argument("moving")
    p.add_argument("reference")
    p.add_argument("--polar", action="store_true", help="register unwrapped irises instead")

    p = add("encode", cmd_encode, "run segment, unwrap and encode; write template and artifacts")
    p.add_argument("image")
    p.add_argument("--out-dir", required=True)

    p = add("match", cmd_match, "compare two template files")
    p.add_argument("template_a")
    p.add_argument("template_b")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-shift", type=int)

    p = add("enroll", cmd_enroll, "add an image to the enrollment store")
    p.add_argument("identity")
    p.add_argument("image")
    p.add_argument("--store", required=True)
    p.add_argument("--bind-key", help="hex key to bind, or 'auto' to generate one from --seed")

    p = add("verify", cmd_verify, "verify an image against an enrolled identity")
    p.add_argument("identity")
    p.add_argument("image")
    p.add_argument("--store", required=True)
    p.add_argument("--show-key", action="store_true", help="print a released key")

    p = add("roc", cmd_roc, "false accept / reject rates over a template corpus")
    p.add_argument("source", help="enrollment store, or a directory of per-identity folders")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--max-shift", type=int)
    p.add_argument("--shuffle-labels", action="store_true", help="permutation control")

    p = add("histogram", cmd_histogram, "histogram of an image or of template bits")
    p.add_argument("input")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.load(args.config) if args.config else Config()
        return args.func(args, cfg)
    except _PIPELINE_ERRORS as exc:
        stage = getattr(exc, "stage", None)
        _emit({"error": str(exc), "type": type(getattr(exc, "cause", exc)).__name__,
               "stage": stage}, sys.stderr)
        return EXIT_PIPELINE
    except (*_INPUT_ERRORS, IrisError) as exc:
        _emit({"error": str(exc), "type": type(exc).__name__, "stage": None}, sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
