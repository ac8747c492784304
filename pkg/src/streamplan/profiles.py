"""Resource profiles learned from test runs.

A profile models one analysis program at one frame size on one device
(CPU-only or GPU-assisted) as per-resource utilization fractions of a
reference machine.  CPU and GPU compute scale linearly with the frame rate;
memory kinds default to rate-independent.  Profiles also carry the measured
single-stream frame-rate ceiling, which is latency-bound rather than
utilization-bound and therefore an independent input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError, ValidationError

CPU = "cpu"
MEMORY = "memory"
GPU = "gpu"
GPU_MEMORY = "gpu_memory"
KINDS = (CPU, MEMORY, GPU, GPU_MEMORY)

DEVICE_CPU = "cpu-only"
DEVICE_GPU = "gpu-assisted"
DEVICES = (DEVICE_CPU, DEVICE_GPU)

SCALE_LINEAR = "linear-in-rate"
SCALE_CONSTANT = "constant"

# CPU/GPU compute tracks the frame rate; memory kinds stay flat by default.
DEFAULT_SCALING = {
    CPU: SCALE_LINEAR,
    MEMORY: SCALE_CONSTANT,
    GPU: SCALE_LINEAR,
    GPU_MEMORY: SCALE_CONSTANT,
}


def _normalize_fractions(values, context: str) -> dict[str, float]:
    out = {k: 0.0 for k in KINDS}
    for key, value in (values or {}).items():
        if key not in KINDS:
            raise ValidationError(f"{context}: unknown resource kind '{key}'")
        v = float(value)
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{context}: {key} fraction {v} outside [0, 1]")
        out[key] = v
    return out


@dataclass(frozen=True)
class ReferenceMachine:
    """Hardware the utilization fractions were measured on; converts fractions
    to absolute resource units."""

    cpu_cores: float
    memory_gb: float
    gpu_cores: float = 0.0
    gpu_memory_gb: float = 0.0

    def __post_init__(self):
        if self.cpu_cores <= 0 or self.memory_gb <= 0:
            raise ValidationError("reference machine needs positive cpu_cores and memory_gb")
        if self.gpu_cores < 0 or self.gpu_memory_gb < 0:
            raise ValidationError("reference machine GPU capacities must be nonnegative")


@dataclass(frozen=True)
class TestRunSample:
    """One monitored execution: frame rate and observed utilization fractions."""

    __test__ = False  # not a pytest class, despite the name

    rate: float
    utilization: dict[str, float]
    duration: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValidationError(f"sample rate must be > 0, got {self.rate}")
        object.__setattr__(
            self, "utilization", _normalize_fractions(self.utilization, "sample")
        )


@dataclass(frozen=True)
class Profile:
    """Resource model for (program, frame size, device)."""

    program: str
    frame_size: tuple[int, int]
    device: str
    reference_rate: float
    reference_utilization: dict[str, float]
    reference_machine: ReferenceMachine
    max_rate: float | None = None
    scaling: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SCALING))

    def __post_init__(self):
        if self.device not in DEVICES:
            raise ValidationError(f"device must be one of {DEVICES}, got '{self.device}'")
        if self.reference_rate <= 0:
            raise ValidationError("reference_rate must be > 0")
        if self.max_rate is not None and self.max_rate <= 0:
            raise ValidationError("max_rate must be > 0 when present")
        util = _normalize_fractions(self.reference_utilization, self.key_str())
        if self.device == DEVICE_CPU and (util[GPU] > 0 or util[GPU_MEMORY] > 0):
            raise ValidationError(
                f"{self.key_str()}: cpu-only profile cannot use GPU resources"
            )
        scaling = dict(DEFAULT_SCALING)
        for kind, mode in (self.scaling or {}).items():
            if kind not in KINDS:
                raise ValidationError(f"{self.key_str()}: unknown scaling kind '{kind}'")
            if mode not in (SCALE_LINEAR, SCALE_CONSTANT):
                raise ValidationError(f"{self.key_str()}: unknown scaling mode '{mode}'")
            scaling[kind] = mode
        object.__setattr__(self, "frame_size", (int(self.frame_size[0]), int(self.frame_size[1])))
        object.__setattr__(self, "reference_utilization", util)
        object.__setattr__(self, "scaling", scaling)

    def key(self) -> tuple[str, tuple[int, int], str]:
        return (self.program, self.frame_size, self.device)

    def key_str(self) -> str:
        w, h = self.frame_size
        return f"{self.program}@{w}x{h}/{self.device}"


def fit_profile(
    samples: list[TestRunSample],
    device: str,
    frame_size: tuple[int, int],
    reference_machine: ReferenceMachine,
    *,
    program: str = "unnamed",
    max_rate: float | None = None,
    scaling: dict[str, str] | None = None,
) -> Profile:
    """Fit a profile from monitored test runs.

    Linearly scaled kinds get a least-squares slope through the origin
    (a single sample reduces to utilization/rate); constant kinds get the
    sample mean.  The reference rate is the mean sample rate and the
    reference utilization is evaluated from the fit at that rate.
    """
    if not samples:
        raise ValidationError("cannot fit a profile from an empty sample list")
    modes = dict(DEFAULT_SCALING)
    modes.update(scaling or {})
    reference_rate = sum(s.rate for s in samples) / len(samples)
    utilization: dict[str, float] = {}
    for kind in KINDS:
        values = [s.utilization[kind] for s in samples]
        if modes[kind] == SCALE_LINEAR:
            slope = sum(u * s.rate for u, s in zip(values, samples)) / sum(
                s.rate * s.rate for s in samples
            )
            utilization[kind] = slope * reference_rate
        else:
            utilization[kind] = sum(values) / len(values)
    return Profile(
        program=program,
        frame_size=frame_size,
        device=device,
        reference_rate=reference_rate,
        reference_utilization=utilization,
        reference_machine=reference_machine,
        max_rate=max_rate,
        scaling=modes,
    )


def demand_fraction(profile: Profile, rate: float) -> dict[str, float]:
    """Utilization fractions of the reference machine at the given frame rate.

    Linear kinds scale by rate/reference_rate; constant kinds do not move.
    Results may exceed 1; feasibility is the caller's concern.
    """
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    ratio = rate / profile.reference_rate
    out = {}
    for kind in KINDS:
        base = profile.reference_utilization[kind]
        out[kind] = base * ratio if profile.scaling[kind] == SCALE_LINEAR else base
    return out


def demand_vector(profile, rate, n_max, gpu_slot=None):
    """Absolute demand vector at a rate, with GPU demand at the given slot.

    CPU-only profiles take no slot; GPU-assisted profiles require one.
    """
    from .catalog import ResourceVector, gpu_core_dim, gpu_memory_dim, vector_length

    if profile.device == DEVICE_CPU and gpu_slot is not None:
        raise ValueError(f"{profile.key_str()}: cpu-only profile takes no GPU slot")
    if profile.device == DEVICE_GPU and gpu_slot is None:
        raise ValueError(f"{profile.key_str()}: gpu-assisted profile requires a GPU slot")
    if gpu_slot is not None and not 0 <= gpu_slot < n_max:
        raise ValueError(f"GPU slot {gpu_slot} out of range for n_max={n_max}")
    frac = demand_fraction(profile, rate)
    machine = profile.reference_machine
    values = [0.0] * vector_length(n_max)
    values[0] = frac[CPU] * machine.cpu_cores
    values[1] = frac[MEMORY] * machine.memory_gb
    if gpu_slot is not None:
        values[gpu_core_dim(gpu_slot)] = frac[GPU] * machine.gpu_cores
        values[gpu_memory_dim(gpu_slot)] = frac[GPU_MEMORY] * machine.gpu_memory_gb
    return ResourceVector(tuple(values))


def rate_feasible(profile: Profile, rate: float) -> bool:
    """False only when the profile has a measured ceiling below the rate."""
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    return profile.max_rate is None or rate <= profile.max_rate


def speedup(p_cpu: Profile, p_gpu: Profile) -> float:
    """Ratio of GPU to CPU maximum achievable frame rates."""
    if p_cpu.program != p_gpu.program or p_cpu.frame_size != p_gpu.frame_size:
        raise ValueError("speedup requires profiles of the same program and frame size")
    if p_cpu.max_rate is None or p_gpu.max_rate is None:
        raise ValidationError("speedup requires max_rate on both profiles")
    return p_gpu.max_rate / p_cpu.max_rate


class ProfileStore:
    """Profiles keyed by (program, frame size, device); read-mostly."""

    def __init__(self, profiles=()):
        self._profiles: dict = {}
        for p in profiles:
            self.add(p)

    def add(self, profile: Profile, replace: bool = False):
        key = profile.key()
        if key in self._profiles and not replace:
            raise ValidationError(f"duplicate profile for {profile.key_str()}")
        self._profiles[key] = profile

    def get(self, program: str, frame_size, device: str) -> Profile | None:
        return self._profiles.get((program, (int(frame_size[0]), int(frame_size[1])), device))

    def pair(self, program: str, frame_size):
        """(cpu-only, gpu-assisted) profiles for a program, either may be None."""
        return (
            self.get(program, frame_size, DEVICE_CPU),
            self.get(program, frame_size, DEVICE_GPU),
        )

    def __iter__(self):
        return iter(sorted(self._profiles.values(), key=lambda p: p.key()))

    def __len__(self):
        return len(self._profiles)


def _parse_frame_size(raw, context: str) -> tuple[int, int]:
    if not isinstance(raw, dict) or "w" not in raw or "h" not in raw:
        raise SchemaError(f"{context}: frame_size must be an object with 'w' and 'h'")
    return (int(raw["w"]), int(raw["h"]))


def parse_profiles(data) -> ProfileStore:
    if not isinstance(data, list):
        raise SchemaError("profile store document must be a JSON list")
    store = ProfileStore()
    for i, entry in enumerate(data):
        context = f"profile entry {i}"
        if not isinstance(entry, dict):
            raise SchemaError(f"{context}: expected an object")
        for key in ("program", "frame_size", "device", "reference_rate_fps", "utilization", "reference_machine"):
            if key not in entry:
                raise SchemaError(f"{context}: missing field '{key}'")
        machine_raw = entry["reference_machine"]
        if not isinstance(machine_raw, dict):
            raise SchemaError(f"{context}: reference_machine must be an object")
        machine = ReferenceMachine(
            cpu_cores=float(machine_raw.get("cpu_cores", 0)),
            memory_gb=float(machine_raw.get("memory_gb", 0)),
            gpu_cores=float(machine_raw.get("gpu_cores", 0)),
            gpu_memory_gb=float(machine_raw.get("gpu_memory_gb", 0)),
        )
        profile = Profile(
            program=entry["program"],
            frame_size=_parse_frame_size(entry["frame_size"], context),
            device=entry["device"],
            reference_rate=float(entry["reference_rate_fps"]),
            reference_utilization=entry["utilization"],
            reference_machine=machine,
            max_rate=float(entry["max_rate_fps"]) if entry.get("max_rate_fps") is not None else None,
            scaling=entry.get("scaling"),
        )
        store.add(profile)
    return store


def load_profiles(source) -> ProfileStore:
    """Load a profile store from a JSON file path or parsed document."""
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise SchemaError(f"{source}: no such file") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}: invalid JSON: {exc}") from None
        return parse_profiles(data)
    return parse_profiles(source)


def profile_to_doc(p: Profile) -> dict:
    doc = {
        "program": p.program,
        "frame_size": {"w": p.frame_size[0], "h": p.frame_size[1]},
        "device": p.device,
        "reference_rate_fps": p.reference_rate,
        "utilization": {k: p.reference_utilization[k] for k in KINDS},
        "reference_machine": {
            "cpu_cores": p.reference_machine.cpu_cores,
            "memory_gb": p.reference_machine.memory_gb,
            "gpu_cores": p.reference_machine.gpu_cores,
            "gpu_memory_gb": p.reference_machine.gpu_memory_gb,
        },
        "scaling": {k: p.scaling[k] for k in KINDS},
    }
    if p.max_rate is not None:
        doc["max_rate_fps"] = p.max_rate
    return doc


def save_profiles(store: ProfileStore, path) -> None:
    docs = [profile_to_doc(p) for p in store]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(docs, fh, indent=2, sort_keys=True)
        fh.write("\n")


def parse_samples(data) -> list[TestRunSample]:
    if not isinstance(data, list):
        raise SchemaError("sample document must be a JSON list")
    samples = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "rate_fps" not in entry or "utilization" not in entry:
            raise SchemaError(f"sample entry {i}: needs 'rate_fps' and 'utilization'")
        samples.append(
            TestRunSample(
                rate=float(entry["rate_fps"]),
                utilization=entry["utilization"],
                duration=float(entry.get("duration_s", 0.0)),
            )
        )
    return samples


def load_samples(source) -> list[TestRunSample]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}: invalid JSON: {exc}") from None
        return parse_samples(data)
    return parse_samples(source)


def samples_to_doc(samples: list[TestRunSample]) -> list[dict]:
    return [
        {
            "rate_fps": s.rate,
            "utilization": {k: s.utilization[k] for k in KINDS},
            "duration_s": s.duration,
        }
        for s in samples
    ]
