"""Seeded contour-parameter sampling and dataset manifests.

Per-family parameter laws (dataset defaults):

=============  ==============  ====================  ==========  ==========
family         extent (cents)  mod rate (Hz)         phase       reversible
=============  ==============  ====================  ==========  ==========
stable         0               1 (fixed)             0 (fixed)   no
alternating    U(0, 1200)      log-U(1, 50)          U(0, 1)     no
vibrato        U(0, 1200)      log-U(5, 100)         U(0, 1)     no
glissando      U(0, 1200)      0.5 (fixed)           -0.25       coin
bend           U(0, 1200)      1 (fixed)             -0.25       no
sawtooth       U(0, 1200)      log-U(5, 100)         U(0, 1)     coin
triangle       U(0, 1200)      log-U(5, 100)         U(0, 1)     no
=============  ==============  ====================  ==========  ==========

``base_hz`` is log-uniform over [f_min, f_max] for every family, redrawn
jointly with the extent until the whole excursion
``base_hz * 2**(+-extent/1200)`` stays inside [f_min, f_max].

Each entry owns one PCG64 stream seeded by a splitmix64 chain over
(global_seed, family ordinal, index), so any entry can be regenerated alone,
in any order, and the draw order inside an entry is fixed: base/extent
rejection loop, mod rate, phase, reversal coin, partial count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .contours import ContourParams, ContourType
from .synth import DEFAULT_SAMPLE_RATE, max_partials

__all__ = [
    "CLASS_ORDER",
    "EXTENT_MAX_CENTS",
    "SamplerConfig",
    "ManifestEntry",
    "Manifest",
    "entry_seed",
    "entry_rng",
    "sample_params",
    "sample_entry",
    "build_manifest",
]

# Canonical family order; fixes type ordinals, class indices and entry ids.
CLASS_ORDER = list(ContourType)

EXTENT_MAX_CENTS = 1200.0

# (mod_hz law, phase law, reversible); None bounds mean a fixed value.
_FAMILY_LAWS = {
    ContourType.STABLE: ((1.0, None), (0.0, None), False),
    ContourType.ALTERNATING: ((1.0, 50.0), (0.0, 1.0), False),
    ContourType.VIBRATO: ((5.0, 100.0), (0.0, 1.0), False),
    ContourType.GLISSANDO: ((0.5, None), (-0.25, None), True),
    ContourType.BEND: ((1.0, None), (-0.25, None), False),
    ContourType.SAWTOOTH: ((5.0, 100.0), (0.0, 1.0), True),
    ContourType.TRIANGLE: ((5.0, 100.0), (0.0, 1.0), False),
}

_MASK64 = (1 << 64) - 1
_REJECTION_CAP = 1_000_000


def _splitmix64(state: int):
    """One splitmix64 step: returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def entry_seed(global_seed: int, kind: ContourType, index: int) -> int:
    """64-bit seed for one dataset entry.

    splitmix64 chain: mix the global seed, fold in the family ordinal, mix,
    fold in the index, mix. Distinct (seed, family, index) triples land on
    distinct streams for all practical purposes.
    """
    if index < 0:
        raise ValueError("index must be >= 0")
    state = int(global_seed) & _MASK64
    _, a = _splitmix64(state)
    _, b = _splitmix64(a ^ CLASS_ORDER.index(kind))
    _, c = _splitmix64(b ^ (int(index) & _MASK64))
    return c


def entry_rng(global_seed: int, kind: ContourType,
              index: int) -> np.random.Generator:
    """Fresh PCG64 generator for one entry."""
    return np.random.Generator(
        np.random.PCG64(entry_seed(global_seed, kind, index)))


@dataclass(frozen=True)
class SamplerConfig:
    """Dataset-level sampling configuration."""

    global_seed: int = 0
    clips_per_type: int = 500
    f_min_hz: float = 25.0
    f_max_hz: float = 10000.0
    duration: float = 1.0

    def validate(self, sample_rate: int = DEFAULT_SAMPLE_RATE):
        if self.clips_per_type < 1:
            raise ValueError("clips_per_type must be >= 1")
        if not (0.0 < self.f_min_hz < self.f_max_hz):
            raise ValueError("need 0 < f_min_hz < f_max_hz")
        if self.f_max_hz > sample_rate / 2.0:
            raise ValueError("f_max_hz above Nyquist for this sample rate")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        return self


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset clip: parameters plus file layout."""

    entry_id: str
    params: ContourParams
    num_partials: int
    split: str
    wav_path: str
    f0_path: str


@dataclass(frozen=True)
class Manifest:
    """Full dataset description; serializes to/from JSON."""

    config: SamplerConfig
    sample_rate: int
    entries: tuple = field(default_factory=tuple)

    FORMAT_VERSION = "1"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def split_entries(self, split: str):
        if split not in ("train", "test"):
            raise ValueError("split must be 'train' or 'test'")
        return [e for e in self.entries if e.split == split]

    def to_json(self) -> str:
        cfg = self.config
        doc = {
            "format_version": self.FORMAT_VERSION,
            "sample_rate": self.sample_rate,
            "config": {
                "global_seed": cfg.global_seed,
                "clips_per_type": cfg.clips_per_type,
                "f_min_hz": cfg.f_min_hz,
                "f_max_hz": cfg.f_max_hz,
                "duration_s": cfg.duration,
            },
            "entries": [
                {
                    "id": e.entry_id,
                    "type": e.params.kind.value,
                    "f_b_hz": e.params.base_hz,
                    "delta_f_cents": e.params.extent_cents,
                    "f_m_hz": e.params.mod_hz,
                    "phi": e.params.phase,
                    "duration_s": e.params.duration,
                    "reversed": e.params.reversed,
                    "num_partials": e.num_partials,
                    "split": e.split,
                    "wav_path": e.wav_path,
                    "f0_path": e.f0_path,
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"manifest is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "entries" not in doc:
            raise ValueError("manifest JSON missing 'entries'")
        if doc.get("format_version") != cls.FORMAT_VERSION:
            raise ValueError(
                f"unsupported manifest format_version: "
                f"{doc.get('format_version')!r}")
        cfg = doc.get("config", {})
        config = SamplerConfig(
            global_seed=int(cfg["global_seed"]),
            clips_per_type=int(cfg["clips_per_type"]),
            f_min_hz=float(cfg["f_min_hz"]),
            f_max_hz=float(cfg["f_max_hz"]),
            duration=float(cfg["duration_s"]),
        )
        by_value = {t.value: t for t in ContourType}
        entries = []
        for rec in doc["entries"]:
            try:
                kind = by_value[rec["type"]]
                params = ContourParams(
                    kind=kind,
                    base_hz=float(rec["f_b_hz"]),
                    extent_cents=float(rec["delta_f_cents"]),
                    mod_hz=float(rec["f_m_hz"]),
                    phase=float(rec["phi"]),
                    duration=float(rec["duration_s"]),
                    reversed=bool(rec["reversed"]),
                ).validate()
                entry = ManifestEntry(
                    entry_id=str(rec["id"]),
                    params=params,
                    num_partials=int(rec["num_partials"]),
                    split=str(rec["split"]),
                    wav_path=str(rec["wav_path"]),
                    f0_path=str(rec["f0_path"]),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"bad manifest entry: {exc}") from exc
            if entry.split not in ("train", "test"):
                raise ValueError(f"bad split {entry.split!r}")
            if entry.num_partials < 1:
                raise ValueError("num_partials must be >= 1")
            entries.append(entry)
        return cls(config=config, sample_rate=int(doc["sample_rate"]),
                   entries=tuple(entries))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _log_uniform(rng, lo, hi):
    if not (0.0 < lo <= hi):
        raise ValueError("log-uniform needs 0 < lo <= hi")
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_params(kind: ContourType, config: SamplerConfig,
                  rng: np.random.Generator) -> ContourParams:
    """Draw one parameter set per the family laws above."""
    config.validate()
    mod_law, phase_law, reversible = _FAMILY_LAWS[kind]

    # joint rejection keeps the whole excursion inside [f_min, f_max]
    for _ in range(_REJECTION_CAP):
        base = _log_uniform(rng, config.f_min_hz, config.f_max_hz)
        if kind is ContourType.STABLE:
            extent = 0.0
        else:
            extent = float(rng.uniform(0.0, EXTENT_MAX_CENTS))
        half = 2.0 ** (extent / 1200.0)
        if base * half <= config.f_max_hz and base / half >= config.f_min_hz:
            break
    else:
        raise RuntimeError("rejection sampling failed to terminate")

    if mod_law[1] is None:
        mod = mod_law[0]
    else:
        mod = _log_uniform(rng, mod_law[0], mod_law[1])
    if phase_law[1] is None:
        phase = phase_law[0]
    else:
        phase = float(rng.uniform(phase_law[0], phase_law[1]))
    rev = bool(rng.integers(0, 2)) if reversible else False

    return ContourParams(kind=kind, base_hz=base, extent_cents=extent,
                         mod_hz=mod, phase=phase, duration=config.duration,
                         reversed=rev).validate()


def sample_entry(config: SamplerConfig, kind: ContourType, index: int,
                 sample_rate: int = DEFAULT_SAMPLE_RATE) -> ManifestEntry:
    """Build one manifest entry; independent of every other entry."""
    config.validate(sample_rate)
    rng = entry_rng(config.global_seed, kind, index)
    params = sample_params(kind, config, rng)
    f0_sup = params.base_hz * 2.0 ** (params.extent_cents / 1200.0)
    k_max = max_partials(f0_sup, sample_rate)
    num_partials = int(rng.integers(1, k_max + 1))
    train_count = int(0.8 * config.clips_per_type)
    split = "train" if index < train_count else "test"
    entry_id = f"{kind.value}_{index:04d}"
    return ManifestEntry(
        entry_id=entry_id,
        params=params,
        num_partials=num_partials,
        split=split,
        wav_path=f"wav/{entry_id}.wav",
        f0_path=f"f0/{entry_id}.csv",
    )


def build_manifest(config: SamplerConfig,
                   sample_rate: int = DEFAULT_SAMPLE_RATE) -> Manifest:
    """Sample the full dataset manifest (no audio is rendered here)."""
    config.validate(sample_rate)
    entries = [
        sample_entry(config, kind, index, sample_rate)
        for kind in CLASS_ORDER
        for index in range(config.clips_per_type)
    ]
    return Manifest(config=config, sample_rate=sample_rate,
                    entries=tuple(entries))
