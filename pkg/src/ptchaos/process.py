"""Pure process Choi states built by the ancilla construction, conditional
output states under butterfly flutters, reduced process tensors, and
multitime Born weights.

Protocol ordering
-----------------
A k-step process interleaves instruments and global unitaries as

    |psi'> = U_k A_k ... U_2 A_2 U_1 A_1 |psi_SE>,

i.e. the j-th instrument acts *before* the j-th evolution and the final
output lives after U_k.  The Choi register carries 2k+2 blocks: one
(t{j}_in, t{j}_out) leg pair per step plus the final system and environment
outputs (which keep the labels of the initial register).

Conditioning convention
-----------------------
The ancilla pairs inserted by the builder are stored normalized (1/sqrt(d_S)
amplitudes), so |Y> is automatically unit norm, while instrument Choi
vectors stay unnormalized.  Conditioning contracts the *supernormalized*
flutter amplitudes against |Y> without conjugation (the transpose pairing
that also appears in the Born rule tr[Y_B |x><x|^T]).  With these choices
the unnormalized projection is exactly the physical outgoing state |psi'>
above, and its squared norm is the outcome probability.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .instruments import ButterflyFlutter, step_leg_labels
from .qcore import (
    DensityOperator,
    PIPELINE_TOL,
    PureState,
    Register,
    Role,
    STRUCT_TOL,
    Subsystem,
    apply_local,
    check_cap,
    partial_trace,
    permute_subsystems,
)

NULL_PROJECTION_EPS = 1e-24


@dataclass(frozen=True, eq=False)
class GateSequence:
    """A global step expressed as local gates applied in order.

    Each element is (matrix, labels); labels refer to the dynamics register
    (the working system keeps its original label during construction).
    Avoids materializing dense step matrices for wide registers.
    """

    gates: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "gates",
            tuple((np.asarray(g, dtype=np.complex128), tuple(ls)) for g, ls in self.gates),
        )


def apply_step(step, state: PureState, se_labels) -> PureState:
    """Apply one global step: a dense matrix over se_labels or a GateSequence."""
    if isinstance(step, GateSequence):
        for gate, labels in step.gates:
            state = apply_local(gate, list(labels), state)
        return state
    return apply_local(step, list(se_labels), state)


@dataclass(frozen=True, eq=False)
class PureProcess:
    """Choi state of a k-step pure process with its metadata."""

    choi: PureState
    k: int
    d_s: int
    d_e: int
    dynamics_id: str
    time_labels: tuple[str, ...]

    @property
    def b_labels(self) -> list[str]:
        out = []
        for j in range(1, self.k + 1):
            l_in, l_out = step_leg_labels(j)
            out.extend([l_in, l_out])
        return out

    @property
    def r_labels(self) -> list[str]:
        b = set(self.b_labels)
        return [l for l in self.choi.register.labels if l not in b]

    @property
    def s_out_label(self) -> str:
        roles = self.choi.register.labels_with_role(Role.S)
        return roles[0]

    @property
    def d_b(self) -> int:
        return self.d_s ** (2 * self.k)

    def r_register(self) -> Register:
        return self.choi.register.subregister(self.r_labels)


@dataclass(frozen=True, eq=False)
class ConditionalOutcome:
    """Normalized conditional state on the remainder space plus its weight."""

    state: PureState | None
    probability: float
    flutter_id: str

    @property
    def is_null(self) -> bool:
        return self.state is None


def build_process(
    initial: PureState,
    unitaries,
    d_s: int | None = None,
    dynamics_id: str = "",
) -> PureProcess:
    """Run the ancilla construction: per step, swap the system content out
    onto a fresh leg pair, then apply the global unitary.

    ``initial`` must be unit norm on a register with exactly one role-S
    subsystem; each unitary is a dense matrix over the full initial register
    (little-endian composite index in register order).
    """
    reg0 = initial.register
    s_labels = reg0.labels_with_role(Role.S)
    if len(s_labels) != 1:
        raise ValueError(f"initial register needs exactly one role-S subsystem, got {s_labels}")
    s_label = s_labels[0]
    s_dim = reg0.dims_of([s_label])[0]
    if d_s is not None and d_s != s_dim:
        raise ValueError(f"declared d_S={d_s} but role-S subsystem has dim {s_dim}")
    if abs(initial.norm_squared - 1.0) > STRUCT_TOL:
        raise ValueError("initial state must be unit norm")
    unitaries = list(unitaries)
    k = len(unitaries)
    if k < 1:
        raise ValueError("need at least one step unitary")
    d_total = reg0.dim
    check_cap(s_dim ** (2 * k) * d_total)
    for u in unitaries:
        if not isinstance(u, GateSequence) and np.asarray(u).shape != (d_total, d_total):
            raise ValueError("step unitary dimension mismatch with initial register")

    e_labels = [l for l in reg0.labels if l != s_label]
    d_e = d_total // s_dim

    pair = (np.eye(s_dim, dtype=np.complex128) / math.sqrt(s_dim)).reshape(-1, order="F")
    state = initial
    work = s_label
    for j, u in enumerate(unitaries, start=1):
        l_in, l_out = step_leg_labels(j)
        # freeze the current system content as the t_out leg
        state = PureState(
            state.register.renamed({work: l_out}).with_roles({l_out: Role.TIME_OUT}),
            state.amplitudes,
        )
        # fresh normalized pair on (t_in, new system slot)
        pair_reg = Register.make((l_in, s_dim, Role.TIME_IN), (work, s_dim, Role.S))
        amps = np.outer(state.amplitudes, pair).reshape(-1, order="F")
        state = PureState(Register(state.register.subsystems + pair_reg.subsystems), amps)
        state = apply_step(u, state, [work] + e_labels)

    canonical = []
    for j in range(1, k + 1):
        l_in, l_out = step_leg_labels(j)
        canonical.extend([l_in, l_out])
    canonical.append(work)
    canonical.extend(e_labels)
    state = permute_subsystems(state, canonical)
    if abs(state.norm_squared - 1.0) > STRUCT_TOL:
        raise ValueError("process construction lost normalization; non-unitary step?")
    return PureProcess(
        choi=state,
        k=k,
        d_s=s_dim,
        d_e=d_e,
        dynamics_id=dynamics_id,
        time_labels=tuple(f"t{j}" for j in range(1, k + 1)),
    )


def _contract_flutter(proc: PureProcess, vec: np.ndarray, legs) -> np.ndarray:
    """Contract a (supernormalized) B-space vector against the Choi without
    conjugation; returns the unnormalized remainder-space tensor flattened."""
    reg = proc.choi.register
    pos = reg.positions(legs)
    dims = [reg.dims[p] for p in pos]
    vt = vec.reshape(dims, order="F")
    out = np.tensordot(vt, proc.choi.tensor(), axes=(list(range(len(pos))), pos))
    return out.reshape(-1, order="F")


def condition(proc: PureProcess, flutter: ButterflyFlutter) -> ConditionalOutcome:
    """Project the butterfly legs onto the flutter Choi and renormalize.

    Returns the normalized conditional state on the remainder register and
    the outcome probability (the squared norm of the unnormalized
    projection).  Zero-norm projections return a null outcome, never a
    division by zero.
    """
    if flutter.k != proc.k:
        raise ValueError(f"flutter has k={flutter.k}, process has k={proc.k}")
    if flutter.d_s != proc.d_s:
        raise ValueError(f"flutter d_S={flutter.d_s}, process d_S={proc.d_s}")
    raw = _contract_flutter(proc, flutter.supernormalized(), flutter.choi.register.labels)
    p = float(np.real(np.vdot(raw, raw)))
    if p < NULL_PROJECTION_EPS:
        return ConditionalOutcome(None, 0.0, flutter.flutter_id)
    r_reg = proc.r_register()
    state = PureState(r_reg, raw / math.sqrt(p))
    return ConditionalOutcome(state, p, flutter.flutter_id)


def reduced_process(proc: PureProcess) -> DensityOperator:
    """The process tensor: trace of |Y><Y| over the remainder space."""
    return partial_trace(proc.choi, proc.b_labels)


def born_weight(upsilon_b: DensityOperator, flutter: ButterflyFlutter) -> float:
    """Multitime Born rule tr[Y_B |x><x|^T] with the supernormalized Choi.

    Equals ``condition(proc, flutter).probability`` for the matching process.
    """
    if upsilon_b.register.labels != flutter.choi.register.labels:
        # allow same labels in different order by permuting the flutter
        try:
            fl_state = permute_subsystems(flutter.choi, upsilon_b.register.labels)
        except (KeyError, ValueError) as exc:
            raise ValueError("flutter legs do not match the process tensor") from exc
        vec = fl_state.amplitudes * flutter.d_s ** (flutter.k / 2.0)
    else:
        vec = flutter.supernormalized()
    if upsilon_b.register.dim != vec.size:
        raise ValueError("dimension mismatch between process tensor and flutter")
    v = vec.conj()
    return float(np.real(np.vdot(v, upsilon_b.matrix @ v)))


def conditional_overlap(proc: PureProcess, x: ButterflyFlutter, y: ButterflyFlutter) -> complex:
    """Inner product of the *unnormalized* conditional remainders <c_x|c_y>.

    Under the package's transpose-pairing convention this equals
    <y*| Y_B |x*> with entrywise-conjugated supernormalized flutter Chois.
    """
    cx = _contract_flutter(proc, x.supernormalized(), x.choi.register.labels)
    cy = _contract_flutter(proc, y.supernormalized(), y.choi.register.labels)
    return complex(np.vdot(cx, cy))


def conditional_fidelity(proc: PureProcess, x: ButterflyFlutter, y: ButterflyFlutter) -> float:
    """|<Y_{R|x}|Y_{R|y}>|^2 of the normalized conditional states."""
    cx = _contract_flutter(proc, x.supernormalized(), x.choi.register.labels)
    cy = _contract_flutter(proc, y.supernormalized(), y.choi.register.labels)
    nx = float(np.real(np.vdot(cx, cx)))
    ny = float(np.real(np.vdot(cy, cy)))
    if nx < NULL_PROJECTION_EPS or ny < NULL_PROJECTION_EPS:
        raise ValueError("zero-probability conditional state in fidelity")
    return float(abs(np.vdot(cx, cy)) ** 2 / (nx * ny))


def forward_conditional(
    initial: PureState, unitaries, steps, normalize: bool = True
) -> PureState:
    """Direct forward evolution U_k A_k ... U_1 A_1 |psi>, bypassing the Choi.

    The independent oracle for :func:`condition`; also the fast path for
    long flutter sequences whose full Choi would exceed the cap.
    """
    reg = initial.register
    s_label = reg.labels_with_role(Role.S)[0]
    state = initial
    for u, a in zip(unitaries, steps, strict=True):
        kraus = a.kraus if hasattr(a, "kraus") else np.asarray(a)
        state = apply_local(kraus, [s_label], state)
        state = apply_step(u, state, reg.labels)
    if normalize:
        n2 = state.norm_squared
        if n2 < NULL_PROJECTION_EPS:
            raise ValueError("impossible outcome in forward evolution")
        state = PureState(reg, state.amplitudes / math.sqrt(n2))
    return state


def check_probability_completeness(proc: PureProcess, flutters) -> float:
    """Sum of condition() probabilities over a declared-complete flutter set."""
    total = sum(condition(proc, fl).probability for fl in flutters)
    if abs(total - 1.0) > PIPELINE_TOL:
        warnings.warn(
            f"complete flutter family probabilities sum to {total}, not 1",
            stacklevel=2,
        )
    return total
