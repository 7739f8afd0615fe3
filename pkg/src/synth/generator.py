"""
Synthetic Flow Generator

Simulates one command-and-control star per class: infected hosts beacon to a
C2 server at the profile's period (normal jitter, clipped at zero) and each
beacon fans out to a Poisson number of secondary peers. Byte counts and
durations are log-normal.

Addresses:
    hosts   10.<class>.0.<i>
    C2      198.51.<family>.1
    peers   203.0.<family>.<j>

Every class draws from its own seeded stream, so adding a profile leaves the
flows of the others unchanged.
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from src.errors import ConfigError, MissingArtifactError, PreconditionError
from src.ingest import sort_flows
from src.models import ClassProfile, FlowDataset, FlowRecord
from src.utils import get_logger

logger = get_logger(__name__)

EPOCH_US = 1_600_000_000_000_000
MAX_CLASSES = 256
_PEER_PORTS = (22, 53, 80, 123, 443, 445, 3389, 8080)


# =============================================================================
# Profiles
# =============================================================================

def default_profiles(n_classes: int) -> List[ClassProfile]:
    """`n_classes` profiles whose beaconing, byte and fan-out behavior all differ."""
    profiles = []
    for i in range(n_classes):
        src_mean = 200.0 * (1 + i)
        profiles.append(
            ClassProfile(
                label=f"class_{i:02d}",
                n_hosts=2 + i % 4,
                n_peers=3 + i % 5,
                beacon_period_mean=5.0 + 4.0 * i,
                beacon_jitter=0.5 + 0.1 * i,
                src_bytes_mean=src_mean,
                dst_bytes_mean=src_mean * (1.5 + i % 3),
                fanout_mean=0.5 + 0.5 * (i % 4),
                duration_mean=0.5 + 0.3 * i,
                c2_port=(443, 8080, 53, 80, 8443)[i % 5],
            )
        )
    return profiles


def near_duplicate(source: ClassProfile, label: str, perturbation: float = 0.05) -> ClassProfile:
    """
    A variant of `source`: same family infrastructure, every rate and size
    parameter scaled by (1 + perturbation).
    """
    scaled = {
        name: value * (1.0 + perturbation)
        for name, value in source.behavior().items()
        if isinstance(value, float)
    }
    return source.model_copy(
        update={**scaled, "label": label, "family": source.family_key, "seed": None}
    )


def check_profiles(profiles: Sequence[ClassProfile]) -> None:
    """
    Raises:
        ConfigError: duplicate labels, identical behavior under two labels, or
            too many classes for the address plan
    """
    if len(profiles) > MAX_CLASSES:
        raise ConfigError(f"At most {MAX_CLASSES} profiles are supported, got {len(profiles)}")
    seen: Dict[str, ClassProfile] = {}
    for profile in profiles:
        if profile.label in seen:
            raise ConfigError(f"Duplicate profile label '{profile.label}'", label=profile.label)
        for other in seen.values():
            if other.behavior() == profile.behavior():
                raise ConfigError(
                    f"Profiles '{other.label}' and '{profile.label}' have identical parameters",
                    labels=[other.label, profile.label],
                )
        seen[profile.label] = profile


def load_profiles(path: Union[str, Path]) -> List[ClassProfile]:
    """
    Read a JSON list of profiles.

    An entry may name `near_duplicate_of` (an earlier label) and an optional
    `perturbation` instead of full parameters.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Profile file not found: {path}", path=str(path))
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Profile file {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError(f"Profile file {path} must hold a JSON list")

    profiles: List[ClassProfile] = []
    by_label: Dict[str, ClassProfile] = {}
    for position, entry in enumerate(entries):
        entry = dict(entry)
        source_label = entry.pop("near_duplicate_of", None)
        try:
            if source_label is not None:
                if source_label not in by_label:
                    raise ConfigError(
                        f"Profile {position}: near_duplicate_of '{source_label}' is not an earlier label"
                    )
                profile = near_duplicate(
                    by_label[source_label], entry["label"], entry.get("perturbation", 0.05)
                )
            else:
                profile = ClassProfile.model_validate(entry)
        except (ValidationError, KeyError) as exc:
            raise ConfigError(f"Profile {position} in {path} is invalid: {exc}") from exc
        profiles.append(profile)
        by_label[profile.label] = profile
    check_profiles(profiles)
    return profiles


def save_profiles(profiles: Sequence[ClassProfile], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [profile.model_dump(exclude_none=True) for profile in profiles]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


# =============================================================================
# Generation
# =============================================================================

def _lognormal(rng: np.random.Generator, mean: float, sigma: float) -> float:
    # mu chosen so the arithmetic mean equals `mean`
    return float(rng.lognormal(math.log(mean) - sigma ** 2 / 2.0, sigma))


def _class_flows(
    profile: ClassProfile,
    class_id: int,
    family_id: int,
    count: int,
    rng: np.random.Generator,
) -> List[FlowRecord]:
    hosts = [f"10.{class_id}.0.{i + 1}" for i in range(profile.n_hosts)]
    c2 = f"198.51.{family_id}.1"
    peers = [f"203.0.{family_id}.{j + 1}" for j in range(profile.n_peers)]

    def flow(t: float, src: str, dst: str, dst_port: int, up_mean: float, down_mean: float):
        return FlowRecord(
            timestamp=EPOCH_US + int(round(t * 1e6)),
            src_ip=src,
            dst_ip=dst,
            src_port=int(rng.integers(49152, 65536)),
            dst_port=dst_port,
            duration=round(_lognormal(rng, profile.duration_mean, profile.duration_sigma), 6),
            src_bytes=int(round(_lognormal(rng, up_mean, profile.src_bytes_sigma))),
            dst_bytes=int(round(_lognormal(rng, down_mean, profile.dst_bytes_sigma))),
            label=profile.label,
        )

    records: List[FlowRecord] = []
    t = 0.0
    while len(records) < count:
        t += max(0.0, float(rng.normal(profile.beacon_period_mean, profile.beacon_jitter)))
        host = hosts[int(rng.integers(len(hosts)))]
        records.append(
            flow(t, host, c2, profile.c2_port, profile.src_bytes_mean, profile.dst_bytes_mean)
        )
        for _ in range(int(rng.poisson(profile.fanout_mean))):
            peer = peers[int(rng.integers(len(peers)))]
            port = _PEER_PORTS[int(rng.integers(len(_PEER_PORTS)))]
            offset = float(rng.uniform(0.0, profile.beacon_period_mean / 2.0))
            # peer traffic reverses the byte asymmetry of the beacon
            records.append(
                flow(t + offset, host, peer, port, profile.dst_bytes_mean, profile.src_bytes_mean)
            )
    records.sort(key=FlowRecord.sort_key)
    return records[:count]


def generate_dataset(
    profiles: Sequence[ClassProfile],
    flows_per_class: int,
    seed: int = 7,
    beta: Optional[int] = None,
) -> FlowDataset:
    """
    Generate `flows_per_class` labeled flows per profile.

    Args:
        profiles: At least 2 class profiles
        flows_per_class: Records per class
        seed: Base seed; a profile's own seed overrides it for that class
        beta: Window size, only used to warn when a class is too short

    Returns:
        Time-ordered FlowDataset
    """
    if len(profiles) < 2:
        raise PreconditionError(f"generate_dataset needs at least 2 profiles, got {len(profiles)}")
    if flows_per_class < 1:
        raise PreconditionError(f"flows_per_class must be positive, got {flows_per_class}")
    check_profiles(profiles)
    if beta is not None and flows_per_class < beta:
        logger.warning(
            "flows_per_class_below_beta",
            flows_per_class=flows_per_class,
            beta=beta,
            note="classes will produce zero examples",
        )

    families: Dict[str, int] = {}
    for profile in profiles:
        families.setdefault(profile.family_key, len(families))

    records: List[FlowRecord] = []
    for class_id, profile in enumerate(profiles):
        class_seed = profile.seed if profile.seed is not None else seed
        rng = np.random.default_rng([class_seed, class_id])
        records.extend(
            _class_flows(profile, class_id, families[profile.family_key], flows_per_class, rng)
        )
    dataset = sort_flows(FlowDataset(records=tuple(records)))
    logger.info(
        "dataset_generated",
        classes=len(profiles),
        flows=len(dataset),
        families=len(families),
        seed=seed,
    )
    return dataset
