"""
Synthetic Class Profiles

Behavioral parameters for one synthetic malware class: a set of infected hosts
beaconing to a command-and-control server at a characteristic period, with
heavy-tailed byte counts and a fan-out to secondary peers.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class ClassProfile(BaseModel):
    """Generator parameters for one class."""

    model_config = ConfigDict(frozen=True)

    label: str = Field(min_length=1)
    n_hosts: int = Field(default=4, ge=1)
    n_peers: int = Field(default=6, ge=1)

    # Seconds between beacon bursts
    beacon_period_mean: float = Field(default=30.0, gt=0.0)
    beacon_jitter: float = Field(default=2.0, gt=0.0)

    # Byte counts are log-normal: *_mean is the arithmetic mean, *_sigma the log-space spread
    src_bytes_mean: float = Field(default=800.0, gt=0.0)
    src_bytes_sigma: float = Field(default=0.5, gt=0.0)
    dst_bytes_mean: float = Field(default=2400.0, gt=0.0)
    dst_bytes_sigma: float = Field(default=0.5, gt=0.0)

    # Extra peer connections per burst, Poisson
    fanout_mean: float = Field(default=1.0, gt=0.0)

    duration_mean: float = Field(default=1.5, gt=0.0)
    duration_sigma: float = Field(default=0.4, gt=0.0)

    c2_port: int = Field(default=443, ge=1, le=65535)
    seed: Optional[int] = None

    # Profiles sharing a family reuse the same C2 server and peer addresses
    family: Optional[str] = None

    @property
    def family_key(self) -> str:
        return self.family or self.label

    def behavior(self) -> dict:
        """Distribution parameters only (no label, family or seed)."""
        return self.model_dump(exclude={"label", "family", "seed"})
