"""O(n)-memory random environment on the complete graph.

Recovery rates xi(j) and edge weights rho(i, j) are i.i.d. draws that are
never stored: each value is a pure function of (seed, index), computed by the
counter-based mixer in `seeding`.  Keying rho by the unordered pair
{min(i,j), max(i,j)} makes the symmetry rho(i,j) == rho(j,i) structural, and
keeps n = 1e5 sweeps in O(n) memory.
"""

from __future__ import annotations

import numpy as np

from . import seeding
from .distributions import DistSpec, ROLE_RECOVERY, ROLE_WEIGHT, quantile, validate_spec
from .errors import IndexOutOfRange, ParamViolation, SelfLoop

_TAG_XI = 0x5849
_TAG_RHO = 0x52484F


class Environment:
    """Immutable view of one environment realization for a given (n, seed).

    Safe for any number of concurrent readers; every query is a pure function
    of its arguments.
    """

    __slots__ = ("n", "seed", "xi_spec", "rho_spec", "_xi_key", "_rho_key",
                 "xi_const", "rho_const", "_pair_salt", "_pair_lo_keys")

    def __init__(self, n: int, seed: int, xi_spec: DistSpec, rho_spec: DistSpec):
        if n < 1:
            raise ParamViolation(f"environment requires n >= 1 (got {n})")
        if xi_spec.role != ROLE_RECOVERY:
            raise ParamViolation("xi_spec must have role=recovery")
        if rho_spec.role != ROLE_WEIGHT:
            raise ParamViolation("rho_spec must have role=weight")
        validate_spec(xi_spec)
        validate_spec(rho_spec)
        self.n = int(n)
        self.seed = int(seed)
        self.xi_spec = xi_spec
        self.rho_spec = rho_spec
        # Constant laws skip hashing entirely; this is the dominant fast path
        # for the classic xi = rho = 1 model, so keys are derived lazily.
        self.xi_const = xi_spec.params[0] if xi_spec.kind == "constant" else None
        self.rho_const = rho_spec.params[0] if rho_spec.kind == "constant" else None
        self._xi_key = (seeding.derive_key(self.seed, _TAG_XI)
                        if self.xi_const is None else 0)
        self._rho_key = (seeding.derive_key(self.seed, _TAG_RHO)
                         if self.rho_const is None else 0)
        self._pair_salt = None
        self._pair_lo_keys = None

    def _ensure_pair_keys(self) -> None:
        """Precompute per-vertex key material for O(1)-mix edge queries.

        O(n) memory, computed once; worthwhile whenever a caller will make
        O(n) edge queries against this environment (the dynamic engine does).
        The derived values are identical to the lazy two-mix path.
        """
        if self._pair_lo_keys is None:
            salt = seeding.pair_salt(self.n)
            self._pair_salt = salt
            self._pair_lo_keys = seeding.mix64_array(np.uint64(self._rho_key) ^ salt)

    def _check_vertex(self, j: int) -> None:
        if not 0 <= j < self.n:
            raise IndexOutOfRange(f"vertex {j} outside [0, {self.n})")

    def xi_at(self, j: int) -> float:
        """Recovery rate of vertex j; always >= 1."""
        self._check_vertex(j)
        if self.xi_const is not None:
            return self.xi_const
        return float(quantile(self.xi_spec, seeding.uniform01(self._xi_key, j)))

    def xi_block(self, js: np.ndarray) -> np.ndarray:
        """Vectorized xi over an index array (no bounds checks: engine path).

        Constant laws return a read-only broadcast view; callers never
        mutate returned blocks.
        """
        if self.xi_const is not None:
            return np.broadcast_to(self.xi_const, (len(js),))
        u = seeding.uniform01_array(self._xi_key, np.asarray(js))
        return np.asarray(quantile(self.xi_spec, u), dtype=float)

    def rho_at(self, i: int, j: int) -> float:
        """Edge weight on {i, j}; symmetric and in [0, 1]."""
        self._check_vertex(i)
        self._check_vertex(j)
        if i == j:
            raise SelfLoop(f"edge weight undefined for i == j == {i}")
        if self.rho_const is not None:
            return self.rho_const
        lo, hi = (i, j) if i < j else (j, i)
        key = seeding.child_key(self._rho_key, lo)
        return float(quantile(self.rho_spec, seeding.uniform01(key, hi)))

    def rho_pairs(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Vectorized elementwise rho over index arrays (i[k] != j[k] assumed)."""
        if self.rho_const is not None:
            return np.broadcast_to(self.rho_const, (len(j),))
        i = np.asarray(i)
        j = np.asarray(j)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        if self._pair_lo_keys is not None:
            h = seeding.mix64_array(self._pair_lo_keys[lo] ^ self._pair_salt[hi])
            return np.asarray(quantile(self.rho_spec, seeding.to_uniform01(h)),
                              dtype=float)
        keys = seeding.child_key_array(self._rho_key, lo)
        u = seeding.to_uniform01(seeding.chain_key_arrays(keys, hi))
        return np.asarray(quantile(self.rho_spec, u), dtype=float)

    def rho_row(self, i: int, js: np.ndarray) -> np.ndarray:
        """rho(i, j) for one vertex against an index array."""
        if self.rho_const is not None:
            return np.broadcast_to(self.rho_const, (len(js),))
        return self.rho_pairs(np.broadcast_to(np.int64(i), (len(js),)), js)

    def rho_full_row(self, i: int) -> np.ndarray:
        """rho(i, j) for every j, with a zero placeholder at position i.

        Uses contiguous slices of the precomputed key material; this is the
        per-infection workhorse of the dynamic engine.
        """
        n = self.n
        if self.rho_const is not None:
            out = np.full(n, self.rho_const)
            out[i] = 0.0
            return out
        self._ensure_pair_keys()
        lo_keys = self._pair_lo_keys
        salt = self._pair_salt
        out = np.empty(n, dtype=float)
        if i + 1 < n:
            h = seeding.mix64_array(lo_keys[i] ^ salt[i + 1:])
            out[i + 1:] = quantile(self.rho_spec, seeding.to_uniform01(h))
        if i > 0:
            h = seeding.mix64_array(lo_keys[:i] ^ salt[i])
            out[:i] = quantile(self.rho_spec, seeding.to_uniform01(h))
        out[i] = 0.0
        return out
