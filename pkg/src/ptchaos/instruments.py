"""Rank-one instruments, their single-time and multitime Choi vectors, the
generalized-Pauli operator basis, and the time-local basis of unitary
butterflies.

Choi conventions
----------------
The single-time Choi vector of a Kraus matrix ``A`` is the unnormalized

    |A> = (A (x) 1) |phi+>,      |phi+> = sum_n |n,n>,

stored on a two-leg register ``[in, out]`` where the A side is the feed-back
("in") leg and the identity side pairs with the state handed out by the
process ("out").  In little-endian layout the amplitude vector is exactly
``A.reshape(-1, order="F")``.

A k-step flutter stores the tensor product of per-step Choi vectors; its
squared norm is ``prod_i tr[A_i^dag A_i] <= d_S^k``.  The *supernormalized*
vector carries one extra factor sqrt(d_S) per step, so deterministic
(unitary) flutters reach squared norm d_S^(2k) and multitime Born weights
come out as probabilities with no further bookkeeping.  The unnormalized
Choi stays in ``choi``; ``supernormalized()`` applies the documented map.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .qcore import (
    NormClass,
    PureState,
    Register,
    Role,
    STRUCT_TOL,
    check_cap,
    inner,
    is_unitary,
)


@dataclass(frozen=True, eq=False)
class RankOneInstrument:
    """A single Kraus matrix with an outcome label.

    The matrix must never be norm-increasing (largest singular value <= 1);
    a complete family additionally satisfies sum_x A_x^dag A_x = 1.
    """

    kraus: np.ndarray
    outcome_label: str = ""
    family_id: str | None = None

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=np.complex128)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"kraus must be square, got shape {k.shape}")
        smax = np.linalg.norm(k, 2)
        if smax > 1.0 + STRUCT_TOL:
            raise ValueError(
                f"instrument {self.outcome_label!r} is norm-increasing "
                f"(largest singular value {smax})"
            )
        object.__setattr__(self, "kraus", k)

    @property
    def dim(self) -> int:
        return self.kraus.shape[0]

    def is_unitary(self, tol: float = STRUCT_TOL) -> bool:
        return is_unitary(self.kraus, tol)


def validate_complete_family(instruments) -> None:
    """Check sum_x A_x^dag A_x = 1 at 1e-10 for a declared complete family."""
    if not instruments:
        raise ValueError("empty instrument family")
    d = instruments[0].dim
    acc = np.zeros((d, d), dtype=np.complex128)
    for a in instruments:
        if a.dim != d:
            raise ValueError("mixed dimensions in instrument family")
        acc += a.kraus.conj().T @ a.kraus
    if np.abs(acc - np.eye(d)).max() > STRUCT_TOL:
        raise ValueError("family does not resolve the identity at 1e-10")


def step_leg_labels(j: int) -> tuple[str, str]:
    return f"t{j}_in", f"t{j}_out"


def _choi_register(d: int, j: int = 1) -> Register:
    l_in, l_out = step_leg_labels(j)
    return Register.make((l_in, d, Role.TIME_IN), (l_out, d, Role.TIME_OUT))


def choi_of_instrument(a: RankOneInstrument, step: int = 1) -> PureState:
    """Unnormalized single-time Choi vector (A (x) 1)|phi+>."""
    amps = a.kraus.reshape(-1, order="F")
    return PureState(_choi_register(a.dim, step), amps)


@dataclass(frozen=True, eq=False)
class ButterflyFlutter:
    """A k-long sequence of rank-one instruments plus its multitime Choi.

    ``choi`` is the unnormalized tensor product of per-step Choi vectors on
    legs t1_in, t1_out, ..., tk_in, tk_out (time-ascending register order).
    """

    steps: tuple[RankOneInstrument, ...]
    choi: PureState
    flutter_id: str = ""

    @property
    def k(self) -> int:
        return len(self.steps)

    @property
    def d_s(self) -> int:
        return self.steps[0].dim

    def supernormalized(self) -> np.ndarray:
        """Amplitudes scaled by sqrt(d_S) per step (the documented map)."""
        return self.choi.amplitudes * self.d_s ** (self.k / 2.0)

    def supernorm_squared(self) -> float:
        v = self.supernormalized()
        return float(np.real(np.vdot(v, v)))


def flutter_choi(steps, flutter_id: str = "") -> ButterflyFlutter:
    """Multitime Choi of independent per-time instruments.

    The stored vector is the plain tensor product of single-time Choi
    vectors; supernormalization lives in :meth:`ButterflyFlutter.supernormalized`.
    """
    steps = tuple(
        s if isinstance(s, RankOneInstrument) else RankOneInstrument(s)
        for s in steps
    )
    if not steps:
        raise ValueError("flutter needs at least one step")
    d = steps[0].dim
    if any(s.dim != d for s in steps):
        raise ValueError("mixed instrument dimensions in flutter")
    k = len(steps)
    check_cap(d ** (2 * k))
    amps = np.ones(1, dtype=np.complex128)
    subs = []
    for j, s in enumerate(steps, start=1):
        amps = np.outer(amps, s.kraus.reshape(-1, order="F")).reshape(-1, order="F")
        subs.extend(_choi_register(d, j).subsystems)
    fl = ButterflyFlutter(steps, PureState(Register(tuple(subs)), amps), flutter_id)
    if fl.supernorm_squared() > d ** (2 * k) * (1 + STRUCT_TOL):
        raise ValueError("flutter violates the supernormalization bound")
    return fl


def flutter_overlap(x: ButterflyFlutter, y: ButterflyFlutter) -> complex:
    """<x|y> of the unnormalized Chois; factorizes as prod_i tr[A_i^dag B_i]."""
    return inner(x.choi, y.choi)


def generalized_paulis(d: int) -> list[np.ndarray]:
    """The d^2 unitaries X^a Z^b with X|n> = |n+1 mod d>, Z|n> = w^n |n>.

    Ordered lexicographically in (a, b); pairwise tr[s_i^dag s_j] = d delta_ij.
    """
    if d < 2:
        raise ValueError(f"generalized Paulis need d >= 2, got {d}")
    w = np.exp(2j * np.pi / d)
    X = np.zeros((d, d), dtype=np.complex128)
    for n in range(d):
        X[(n + 1) % d, n] = 1.0
    Z = np.diag(w ** np.arange(d))
    out = []
    for a in range(d):
        for b in range(d):
            out.append(np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b))
    return out


def butterfly_basis(k: int, d_s: int, final_dim: int | None = None):
    """Complete orthogonal basis of unitary butterflies for the 2k-leg space.

    Returns d_S^(2k) flutters (one generalized-Pauli choice per time,
    lexicographic in (time, Pauli index)).  Their supernormalized Chois have
    Gram matrix d_B * identity (d_B = d_S^(2k)) and resolve the identity as
    sum_i |x_i><x_i| / d_B = 1.

    With ``final_dim`` the basis is extended by a computational-basis label
    on one extra final leg "r1", giving d_B * final_dim orthogonal vectors
    on the enlarged space; these are returned as (flutter, r1_index) pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    d_b = d_s ** (2 * k)
    check_cap(d_b * d_b)
    paulis = generalized_paulis(d_s)
    flutters = []
    for combo in itertools.product(range(d_s * d_s), repeat=k):
        steps = [
            RankOneInstrument(paulis[c], outcome_label=f"p{c}", family_id="pauli")
            for c in combo
        ]
        flutters.append(flutter_choi(steps, flutter_id="x" + "".join(map(str, combo))))
    if final_dim is None:
        return flutters
    return [(fl, r) for fl in flutters for r in range(final_dim)]


def weak_unitary(
    epsilon: float, d_s: int, seed: int, s_max: float = 64.0
) -> np.ndarray:
    """Unitary W with |tr W| = (1 - epsilon) d_S, from a seeded random
    Hermitian generator scaled by a 1-D root-find.

    Raises ValueError when no root exists in the bracket (retry with a new
    seed in that case).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d_s, d_s)) + 1j * rng.standard_normal((d_s, d_s))
    h = (a + a.conj().T) / 2.0
    target = (1.0 - epsilon) * d_s

    def f(s: float) -> float:
        return abs(np.trace(expm(-1j * s * h))) - target

    hi = 0.05
    while f(hi) > 0:
        hi *= 2.0
        if hi > s_max:
            raise ValueError(
                f"no |tr W| = {target} root below scale {s_max} for this seed; retry"
            )
    s_star = brentq(f, 0.0, hi, xtol=1e-13, rtol=8.9e-16)
    w = expm(-1j * s_star * h)
    assert abs(abs(np.trace(w)) - target) < 1e-8
    return w


# --- JSON schema for instrument/flutter configs -----------------------------
# matrix encoding: nested arrays of [re, im] pairs, row-major.

def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def instrument_to_json(a: RankOneInstrument) -> dict:
    return {
        "kraus": _matrix_to_json(a.kraus),
        "outcome_label": a.outcome_label,
        "family_id": a.family_id,
    }


def instrument_from_json(obj: dict) -> RankOneInstrument:
    return RankOneInstrument(
        _matrix_from_json(obj["kraus"]),
        outcome_label=obj.get("outcome_label", ""),
        family_id=obj.get("family_id"),
    )


def flutter_to_json(fl: ButterflyFlutter) -> dict:
    return {
        "flutter_id": fl.flutter_id,
        "steps": [instrument_to_json(s) for s in fl.steps],
    }


def flutter_from_json(obj: dict) -> ButterflyFlutter:
    steps = [instrument_from_json(s) for s in obj["steps"]]
    return flutter_choi(steps, flutter_id=obj.get("flutter_id", ""))


def dump_flutter(fl: ButterflyFlutter, path) -> None:
    with open(path, "w") as fh:
        json.dump(flutter_to_json(fl), fh, indent=2, sort_keys=True)


def load_flutter(path) -> ButterflyFlutter:
    with open(path) as fh:
        return flutter_from_json(json.load(fh))


def identity_flutter(k: int, d_s: int) -> ButterflyFlutter:
    return flutter_choi(
        [RankOneInstrument(np.eye(d_s), outcome_label="id")] * k, flutter_id="identity"
    )


def projective_flutters(k: int, d_s: int) -> list[ButterflyFlutter]:
    """All d_S^k sequences of computational prep/measure projectors |n><n|."""
    projs = [
        RankOneInstrument(
            np.outer(
                np.eye(d_s)[:, n], np.eye(d_s)[:, n].conj()
            ),
            outcome_label=f"P{n}",
            family_id="computational",
        )
        for n in range(d_s)
    ]
    validate_complete_family(projs)
    return [
        flutter_choi([projs[c] for c in combo], flutter_id="m" + "".join(map(str, combo)))
        for combo in itertools.product(range(d_s), repeat=k)
    ]
