"""Rectangular parameter grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform nu x nv grid on [u0, u1] x [v0, v1]; arrays are indexed [i, j] = (u_i, v_j)."""

    u0: float
    u1: float
    nu: int
    v0: float
    v1: float
    nv: int

    def __post_init__(self):
        if self.nu < 2 or self.nv < 2:
            raise ValueError("a grid needs at least two nodes per direction")
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise ValueError("grid bounds must satisfy u0 < u1 and v0 < v1")

    @classmethod
    def with_spacing(cls, u0, u1, v0, v1, h: float) -> "GridSpec":
        nu = int(round((u1 - u0) / h)) + 1
        nv = int(round((v1 - v0) / h)) + 1
        return cls(u0, u1, nu, v0, v1, nv)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse 'u0:u1:nu,v0:v1:nv'."""
        try:
            su, sv = text.split(",")
            u0, u1, nu = su.split(":")
            v0, v1, nv = sv.split(":")
            return cls(float(u0), float(u1), int(nu), float(v0), float(v1), int(nv))
        except ValueError as exc:
            raise ValueError(f"bad grid {text!r}, expected u0:u1:nu,v0:v1:nv") from exc

    def __str__(self) -> str:
        return f"{self.u0!r}:{self.u1!r}:{self.nu},{self.v0!r}:{self.v1!r}:{self.nv}"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nu, self.nv)

    @property
    def hu(self) -> float:
        return (self.u1 - self.u0) / (self.nu - 1)

    @property
    def hv(self) -> float:
        return (self.v1 - self.v0) / (self.nv - 1)

    @property
    def u(self) -> np.ndarray:
        return np.linspace(self.u0, self.u1, self.nu)

    @property
    def v(self) -> np.ndarray:
        return np.linspace(self.v0, self.v1, self.nv)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u, self.v, indexing="ij")

    def refined(self, level: int = 1) -> "GridSpec":
        """Same domain with the spacing halved `level` times (old nodes are kept)."""
        f = 2**level
        return GridSpec(self.u0, self.u1, (self.nu - 1) * f + 1, self.v0, self.v1, (self.nv - 1) * f + 1)

    def center_index(self) -> tuple[int, int]:
        return ((self.nu - 1) // 2, (self.nv - 1) // 2)

    def point(self, idx) -> tuple[float, float]:
        i, j = idx
        return (float(self.u[i]), float(self.v[j]))
