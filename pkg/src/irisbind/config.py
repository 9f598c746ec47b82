"""Pipeline configuration and the segment -> unwrap -> encode runner."""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .encoding import AMPLITUDE_FLOOR, DEFAULT_BANK, DEFAULT_KERNEL_SIZE, GaborParams, encode
from .errors import IrisError, ParameterError, PipelineError
from .keybind import KeyScheme
from .matching import DEFAULT_MAX_SHIFT, DEFAULT_THRESHOLD, MIN_EVIDENCE
from .normalization import unwrap
from .segmentation import SegmentationConfig, segment


@dataclass
class NormalizationConfig:
    radial_res: int = 24
    angular_res: int = 240


@dataclass
class EncodingConfig:
    kernel_size: int = DEFAULT_KERNEL_SIZE
    amplitude_floor: float = AMPLITUDE_FLOOR
    bank: tuple = DEFAULT_BANK


@dataclass
class MatchingConfig:
    threshold: float = DEFAULT_THRESHOLD
    max_shift: int = DEFAULT_MAX_SHIFT
    min_evidence: float = MIN_EVIDENCE


@dataclass
class SynthConfig:
    width: int = 160
    height: int = 160


@dataclass
class Config:
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    keybind: KeyScheme = field(default_factory=KeyScheme)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def to_dict(self):
        out = {}
        for f in fields(self):
            section = asdict(getattr(self, f.name))
            if f.name == "encoding":
                section["bank"] = [p.to_dict() for p in self.encoding.bank]
            out[f.name] = _jsonable(section)
        return out

    @classmethod
    def from_dict(cls, data):
        """Build a config from (possibly partial) nested dicts; unknown
        sections or keys are rejected."""
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        sections = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ParameterError(f"unknown config sections: {sorted(unknown)}")
        base = cls()
        built = {}
        for name in sections:
            current = getattr(base, name)
            overrides = data.get(name, {})
            if not isinstance(overrides, dict):
                raise ParameterError(f"config section {name!r} must be an object")
            bad = set(overrides) - {f.name for f in fields(current)}
            if bad:
                raise ParameterError(f"unknown keys in {name!r}: {sorted(bad)}")
            merged = {**asdict(current), **overrides}
            if name == "encoding":
                bank = overrides.get("bank", None)
                merged["bank"] = current.bank if bank is None else tuple(GaborParams(**b) for b in bank)
            if name == "segmentation":
                built[name] = SegmentationConfig.from_dict(merged)
            else:
                try:
                    built[name] = type(current)(**merged)
                except TypeError as exc:
                    raise ParameterError(f"bad config section {name!r}: {exc}") from exc
        return cls(**built)

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class PipelineOutput:
    segmentation: object
    polar: object
    template: object


def run_pipeline(img, cfg=None):
    """Segment, unwrap and encode one image.

    Any library error is re-raised as :class:`PipelineError` tagged with the
    stage that failed.
    """
    cfg = cfg or Config()
    stage = "segment"
    try:
        seg = segment(img, cfg.segmentation)
        stage = "unwrap"
        polar = unwrap(img, seg, cfg.normalization.radial_res, cfg.normalization.angular_res)
        stage = "encode"
        tmpl = encode(polar, cfg.encoding.bank, cfg.encoding.kernel_size,
                      cfg.encoding.amplitude_floor)
    except IrisError as exc:
        raise PipelineError(stage, exc) from exc
    return PipelineOutput(seg, polar, tmpl)
