"""Scenario parameters for a cache-aided MIMO downlink."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of one network scenario.

    A single transmitter with L spatial dimensions serves K users, each
    with G receive dimensions and a cache of M files out of a library of
    N equal-sized files.  The cumulative cache budget K*M/N must be an
    integer t: every file fragment is replicated at exactly t users.
    Power and noise are linear-scale quantities.
    """

    K: int
    L: int
    G: int
    N: int
    M: int
    file_size_bits: int = 8192
    P_T: float = 1.0
    N0: float = 1.0

    def __post_init__(self):
        for name in ("K", "L", "G", "N"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.M < 0:
            raise ConfigError(f"M must be non-negative, got {self.M}")
        if self.file_size_bits < 1:
            raise ConfigError(f"file_size_bits must be positive, got {self.file_size_bits}")
        if self.P_T <= 0:
            raise ConfigError(f"P_T must be positive, got {self.P_T}")
        if self.N0 <= 0:
            raise ConfigError(f"N0 must be positive, got {self.N0}")
        if (self.K * self.M) % self.N != 0:
            raise ConfigError(
                f"cache budget K*M/N = {self.K}*{self.M}/{self.N} is not an integer"
            )
        t = (self.K * self.M) // self.N
        if not 0 <= t < self.K:
            raise ConfigError(f"replication factor t = {t} must satisfy 0 <= t < K = {self.K}")

    @property
    def t(self) -> int:
        """Cache replication factor K*M/N (number of users holding each fragment)."""
        return (self.K * self.M) // self.N

    @property
    def snr_db(self) -> float:
        """Operating SNR implied by P_T and N0, in dB."""
        import math

        return 10.0 * math.log10(self.P_T / self.N0)
