"""Dense complex register arithmetic: composite-index mapping, local operator
application, partial trace, inner products, and numerical hygiene predicates.

Conventions used throughout the package
---------------------------------------
* Composite indices are **little-endian**: the first subsystem of a register
  is the fastest-varying index of the flat amplitude vector.  Concretely, a
  matrix acting on the ordered label pair ``[a, b]`` decomposes as
  ``np.kron(op_b, op_a)`` (the *last* label is the slow factor).
* All entropies everywhere in this package are in natural log (nats).
* Structural predicates are checked at 1e-10; accumulated multi-step
  pipelines are asserted at 1e-8.
* States are dense only.  Constructors refuse to allocate more than
  ``amplitude_cap()`` amplitudes (default 2**24).

All operations are pure functions of immutable inputs; nothing here mutates
shared state, so values are safe to pass between threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

STRUCT_TOL = 1e-10
PIPELINE_TOL = 1e-8
EIG_FLOOR = 1e-12

_DEFAULT_CAP = 2**24
_amplitude_cap = _DEFAULT_CAP


class CapExceededError(RuntimeError):
    """Raised when an operation would allocate more amplitudes than allowed."""


def amplitude_cap() -> int:
    return _amplitude_cap


def set_amplitude_cap(cap: int) -> None:
    """Set the global hard cap on dense amplitude counts."""
    global _amplitude_cap
    if cap < 2:
        raise ValueError(f"amplitude cap must be >= 2, got {cap}")
    _amplitude_cap = int(cap)


def check_cap(dim: int) -> None:
    if dim > _amplitude_cap:
        raise CapExceededError(
            f"requested {dim} amplitudes exceeds the configured cap {_amplitude_cap}"
        )


class Role(enum.Enum):
    S = "S"
    E = "E"
    TIME_IN = "time_in"
    TIME_OUT = "time_out"
    ANCILLA = "ancilla"
    R1 = "R1"
    R2 = "R2"


@dataclass(frozen=True)
class Subsystem:
    label: str
    dim: int
    role: Role = Role.E

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"subsystem {self.label!r} has nonpositive dim {self.dim}")


@dataclass(frozen=True)
class Register:
    """Ordered list of subsystems; owns all composite-index arithmetic."""

    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        labels = [s.label for s in self.subsystems]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in register: {labels}")

    @staticmethod
    def make(*specs: tuple) -> "Register":
        """Build a register from (label, dim) or (label, dim, role) tuples."""
        subs = []
        for spec in specs:
            if len(spec) == 2:
                subs.append(Subsystem(spec[0], spec[1]))
            else:
                subs.append(Subsystem(spec[0], spec[1], spec[2]))
        return Register(tuple(subs))

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.subsystems]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=object)) if self.subsystems else 1

    def position(self, label: str) -> int:
        for i, s in enumerate(self.subsystems):
            if s.label == label:
                return i
        raise KeyError(f"label {label!r} not in register {self.labels}")

    def positions(self, labels) -> list[int]:
        return [self.position(l) for l in labels]

    def dims_of(self, labels) -> list[int]:
        return [self.subsystems[self.position(l)].dim for l in labels]

    def labels_with_role(self, role: Role) -> list[str]:
        return [s.label for s in self.subsystems if s.role == role]

    def subregister(self, labels) -> "Register":
        """Sub-register of the given labels, kept in register order."""
        pos = sorted(self.positions(labels))
        return Register(tuple(self.subsystems[p] for p in pos))

    def renamed(self, mapping: dict) -> "Register":
        subs = tuple(
            Subsystem(mapping.get(s.label, s.label), s.dim, s.role)
            for s in self.subsystems
        )
        return Register(subs)

    def with_roles(self, mapping: dict) -> "Register":
        subs = tuple(
            Subsystem(s.label, s.dim, mapping.get(s.label, s.role))
            for s in self.subsystems
        )
        return Register(subs)


class NormClass(enum.Enum):
    UNIT = "unit"
    SUBNORMALIZED = "subnormalized"
    SUPERNORMALIZED = "supernormalized"


def _classify_norm(sq: float) -> NormClass:
    if abs(sq - 1.0) < STRUCT_TOL:
        return NormClass.UNIT
    if sq <= 1.0 + STRUCT_TOL:
        return NormClass.SUBNORMALIZED
    return NormClass.SUPERNORMALIZED


@dataclass(frozen=True, eq=False)
class PureState:
    """Complex amplitude vector over a register (little-endian flat layout)."""

    register: Register
    amplitudes: np.ndarray
    norm_class: NormClass = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != self.register.dim:
            raise ValueError(
                f"amplitude length {amps.size} != register dim {self.register.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)
        if self.norm_class is None:
            object.__setattr__(self, "norm_class", _classify_norm(self.norm_squared))

    @property
    def norm_squared(self) -> float:
        return float(np.real(np.vdot(self.amplitudes, self.amplitudes)))

    def tensor(self) -> np.ndarray:
        """View as an ndarray with axis j <-> subsystem j (little-endian)."""
        return self.amplitudes.reshape(self.register.dims, order="F")

    def normalized(self) -> "PureState":
        n = math.sqrt(self.norm_squared)
        if n < 1e-300:
            raise ValueError("cannot normalize a zero state")
        return PureState(self.register, self.amplitudes / n)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Square complex matrix over a register (little-endian composite index)."""

    register: Register
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        d = self.register.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} != register dim ({d},{d})")
        object.__setattr__(self, "matrix", m)

    def validate(self, trace: float | None = 1.0) -> None:
        m = self.matrix
        if np.abs(m - m.conj().T).max() > STRUCT_TOL:
            raise ValueError("density operator is not Hermitian at 1e-10")
        w = np.linalg.eigvalsh(m)
        if w.min() < -1e-9:
            raise ValueError(f"density operator has eigenvalue {w.min()} < -1e-9")
        if trace is not None and abs(np.trace(m).real - trace) > STRUCT_TOL:
            raise ValueError(
                f"trace {np.trace(m).real} deviates from declared {trace}"
            )

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def _flat(tensor: np.ndarray) -> np.ndarray:
    return tensor.reshape(-1, order="F")


def _op_tensor(op: np.ndarray, dims: list[int]) -> np.ndarray:
    """Matrix over a little-endian composite index -> tensor
    [j_0..j_{m-1}, i_0..i_{m-1}] with axis order matching the label order."""
    m = len(dims)
    rev = list(dims[::-1])
    t = op.reshape(rev + rev)
    perm = list(range(m - 1, -1, -1)) + list(range(2 * m - 1, m - 1, -1))
    return t.transpose(perm)


def apply_local(op: np.ndarray, target_labels, state: PureState) -> PureState:
    """Apply ``op`` on the targets (identity elsewhere).

    ``op`` is indexed little-endian over ``target_labels`` in the order given;
    for two labels [a, b] that means ``op == np.kron(op_b, op_a)``.
    """
    reg = state.register
    pos = reg.positions(target_labels)
    dims = [reg.subsystems[p].dim for p in pos]
    d_t = int(np.prod(dims))
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (d_t, d_t):
        raise ValueError(f"operator shape {op.shape} != target dim ({d_t},{d_t})")
    m = len(dims)
    ten = state.tensor()
    out = np.tensordot(_op_tensor(op, dims), ten, axes=(list(range(m, 2 * m)), pos))
    out = np.moveaxis(out, list(range(m)), pos)
    return PureState(reg, _flat(out))


def partial_trace(obj, keep_labels) -> DensityOperator:
    """Reduced density operator on the kept subsystems (register order)."""
    keep_labels = list(keep_labels)
    if not keep_labels:
        raise ValueError("keep_labels must be nonempty")
    if isinstance(obj, PureState):
        reg = obj.register
        keep_pos = sorted(reg.positions(keep_labels))
        rest = [p for p in range(len(reg.subsystems)) if p not in keep_pos]
        ten = obj.tensor().transpose(keep_pos + rest)
        dk = int(np.prod([reg.dims[p] for p in keep_pos])) if keep_pos else 1
        mat = ten.reshape(dk, -1, order="F")
        rho = mat @ mat.conj().T
        return DensityOperator(reg.subregister(keep_labels), rho)
    if isinstance(obj, DensityOperator):
        reg = obj.register
        n = len(reg.subsystems)
        keep_pos = sorted(reg.positions(keep_labels))
        dims = reg.dims
        t = obj.matrix.reshape(dims + dims, order="F")
        row = list(range(n))
        col = list(range(n, 2 * n))
        out_sub = []
        for p in range(n):
            if p in keep_pos:
                out_sub.append(p)
            else:
                col[p] = row[p]  # tie row/col index -> trace
        out_sub = out_sub + [col[p] for p in keep_pos]
        red = np.einsum(t, row + col, out_sub)
        dk = int(np.prod([dims[p] for p in keep_pos]))
        # einsum output axes are [rows..., cols...] in keep order; little-endian flatten
        k = len(keep_pos)
        mat = red.transpose(list(range(k)) + list(range(k, 2 * k))).reshape(
            dk, dk, order="F"
        )
        return DensityOperator(reg.subregister(keep_labels), mat)
    raise TypeError(f"cannot partial-trace a {type(obj).__name__}")


def inner(a: PureState, b: PureState) -> complex:
    """Hilbert-space inner product <a|b>; registers must match exactly."""
    if a.register != b.register:
        raise ValueError("register mismatch in inner product")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def is_unitary(m: np.ndarray, tol: float = STRUCT_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"is_unitary needs a square matrix, got shape {m.shape}")
    d = m.shape[0]
    return bool(np.abs(m.conj().T @ m - np.eye(d)).max() < tol)


def permute_subsystems(state: PureState, new_label_order) -> PureState:
    """Reorder register subsystems (pure relabeling of the index layout)."""
    reg = state.register
    new_label_order = list(new_label_order)
    if sorted(new_label_order) != sorted(reg.labels):
        raise ValueError("new order must be a permutation of the register labels")
    pos = reg.positions(new_label_order)
    ten = state.tensor().transpose(pos)
    new_reg = Register(tuple(reg.subsystems[p] for p in pos))
    return PureState(new_reg, _flat(ten))


def tensor_product(a: PureState, b: PureState) -> PureState:
    """Concatenate registers: b's subsystems are appended after a's."""
    reg = Register(a.register.subsystems + b.register.subsystems)
    check_cap(reg.dim)
    amps = np.outer(a.amplitudes, b.amplitudes).reshape(-1, order="F")
    return PureState(reg, amps)


def basis_state(register: Register, index: int = 0) -> PureState:
    check_cap(register.dim)
    amps = np.zeros(register.dim, dtype=np.complex128)
    amps[index] = 1.0
    return PureState(register, amps)


def random_state(register: Register, rng: np.random.Generator) -> PureState:
    """Haar-random unit vector on the register."""
    check_cap(register.dim)
    v = rng.standard_normal(register.dim) + 1j * rng.standard_normal(register.dim)
    return PureState(register, v / np.linalg.norm(v))


def embed_on(op: np.ndarray, labels, register: Register) -> np.ndarray:
    """Dense matrix on the full register acting as ``op`` on ``labels``.

    Kept for small registers only (the dense matrix is register.dim squared).
    """
    d = register.dim
    check_cap(d * d)
    full = np.eye(d, dtype=np.complex128)
    cols = [
        apply_local(op, labels, PureState(register, full[:, c])).amplitudes
        for c in range(d)
    ]
    return np.array(cols).T
