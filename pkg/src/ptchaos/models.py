"""The dynamics zoo: concrete systems exposing per-step global unitaries,
an initial state, and documented parameter presets.

Every model provides a register (one role-S subsystem plus environment
sites), an initial pure state, and ``step_list(k)`` returning the k global
step matrices (little-endian composite index in register order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .process import GateSequence, PureProcess, build_process
from .qcore import (
    PureState,
    Register,
    Role,
    STRUCT_TOL,
    apply_local,
    basis_state,
    is_unitary,
    tensor_product,
)
from .randomness import design_circuit, haar_unitary

EXPECTED_CLASSES = ("regular", "chaotic", "state-chaos", "unknown")

# conventional kicked-Ising parameter points; the chaotic triple is the
# standard strongly-nonintegrable benchmark, the integrable point switches
# the kick off entirely
KICKED_ISING_PRESETS = {
    "chaotic": {"j_coupling": 1.0, "b_field": 0.9045, "h_field": 0.809},
    "integrable": {"j_coupling": 1.0, "b_field": 0.0, "h_field": 0.809},
}


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    model_id: str
    register: Register
    initial_state: PureState
    steps: tuple[np.ndarray, ...] | None  # fixed per-step unitaries, or None
    repeated_step: np.ndarray | None  # single Floquet step, reused
    expected_class: str
    preset: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.expected_class not in EXPECTED_CLASSES:
            raise ValueError(f"unknown expected_class {self.expected_class!r}")
        for u in self.step_list(min(2, self.available_steps())):
            if isinstance(u, GateSequence):
                for gate, _ in u.gates:
                    if not is_unitary(gate, STRUCT_TOL):
                        raise ValueError(f"model {self.model_id} has a non-unitary gate")
            elif not is_unitary(u, STRUCT_TOL):
                raise ValueError(f"model {self.model_id} has a non-unitary step")

    @property
    def s_label(self) -> str:
        return self.register.labels_with_role(Role.S)[0]

    @property
    def d_s(self) -> int:
        return self.register.dims_of([self.s_label])[0]

    def available_steps(self) -> int:
        return len(self.steps) if self.steps is not None else 1 << 30

    def step_list(self, k: int) -> list[np.ndarray]:
        if self.steps is not None:
            if k > len(self.steps):
                raise ValueError(
                    f"model {self.model_id} provides {len(self.steps)} steps, asked for {k}"
                )
            return list(self.steps[:k])
        return [self.repeated_step] * k

    def process(self, k: int, dynamics_id: str | None = None) -> PureProcess:
        return build_process(
            self.initial_state,
            self.step_list(k),
            dynamics_id=dynamics_id or self.model_id,
        )


def custom_model(
    model_id: str,
    register: Register,
    initial_state: PureState,
    steps=None,
    repeated_step=None,
    expected_class: str = "unknown",
    preset: dict | None = None,
) -> DynamicsModel:
    if (steps is None) == (repeated_step is None):
        raise ValueError("provide exactly one of steps / repeated_step")

    def coerce(u):
        return u if isinstance(u, GateSequence) else np.asarray(u, dtype=complex)

    return DynamicsModel(
        model_id,
        register,
        initial_state,
        tuple(coerce(u) for u in steps) if steps is not None else None,
        coerce(repeated_step) if repeated_step is not None else None,
        expected_class,
        preset or {},
    )


def sites_register(n: int, d: int = 2) -> Register:
    """n sites, site 0 is the accessible system S."""
    specs = [("s0", d, Role.S)] + [(f"s{i}", d, Role.E) for i in range(1, n)]
    return Register.make(*specs)


def _cycle_matrix(n: int, d: int) -> np.ndarray:
    """Cyclic shift: new site j holds old site j+1, new site n-1 holds old 0."""
    dim = d**n
    idx = np.arange(dim)
    digits = [(idx // d**j) % d for j in range(n)]
    shifted = [digits[(j + 1) % n] for j in range(n)]
    new = sum(shifted[j] * d**j for j in range(n))
    m = np.zeros((dim, dim), dtype=complex)
    m[new, idx] = 1.0
    return m


def _random_qubit_states(n: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        out.append(v / np.linalg.norm(v))
    return out


def lindblad_bernoulli(
    n: int,
    local_u: np.ndarray,
    k: int,
    seed: int = 0,
    initial_states=None,
) -> DynamicsModel:
    """Cyclic site permutation composed with a local unitary on the S slot.

    The step feeds fresh sites into S (through ``local_u``) and loses old
    content to the far end of the chain; the builder prepares a product
    initial state whose S slot is already rotated by ``local_u``, so the
    process Choi is exactly the product of per-step (L phi_i L^dag x 1/d_S)
    factors.  Requires k < n so fed states never wrap back around.
    """
    if k >= n:
        raise ValueError(f"need k < n, got k={k}, n={n}")
    local_u = np.asarray(local_u, dtype=complex)
    d = local_u.shape[0]
    if not is_unitary(local_u, STRUCT_TOL):
        raise ValueError("local_u must be unitary")
    if initial_states is None:
        initial_states = _random_qubit_states(n, seed) if d == 2 else None
        if initial_states is None:
            raise ValueError("provide initial_states for site dim != 2")
    reg = sites_register(n, d)
    phis = [np.asarray(v, dtype=complex) for v in initial_states]
    parts = [local_u @ phis[0]] + phis[1:]
    init = PureState(Register.make(("s0", d, Role.S)), parts[0])
    for i, v in enumerate(parts[1:], start=1):
        init = tensor_product(init, PureState(Register.make((f"s{i}", d, Role.E)), v))
    step = np.kron(np.eye(d ** (n - 1)), local_u) @ _cycle_matrix(n, d)
    return DynamicsModel(
        "lindblad_bernoulli",
        reg,
        init,
        None,
        step,
        "regular",
        {"n": n, "k": k, "seed": seed, "phis": phis, "local_u": local_u},
    )


def swap_chain(n: int, seed: int = 0, initial_states=None) -> DynamicsModel:
    """Nearest-neighbor SWAP cascade shuttling the S content outward.

    One step equals the cyclic shift (the cascade of adjacent SWAPs); no
    interactions, so orthogonal flutters orthogonalize without scrambling.
    """
    if n < 2:
        raise ValueError("need at least two sites")
    if initial_states is None:
        initial_states = _random_qubit_states(n, seed)
    reg = sites_register(n, 2)
    init = PureState(Register.make(("s0", 2, Role.S)), initial_states[0])
    for i, v in enumerate(initial_states[1:], start=1):
        init = tensor_product(init, PureState(Register.make((f"s{i}", 2, Role.E)), v))
    return DynamicsModel(
        "swap_chain", reg, init, None, _cycle_matrix(n, 2), "regular",
        {"n": n, "seed": seed},
    )


def _kicked_ising_step(n: int, j_coupling: float, b_field: float, h_field: float) -> np.ndarray:
    dim = 2**n
    idx = np.arange(dim)
    z = 1.0 - 2.0 * np.array([(idx // 2**j) % 2 for j in range(n)])  # +1/-1 per site
    diag = h_field * z.sum(axis=0)
    for j in range(n - 1):  # open chain
        diag = diag + j_coupling * z[j] * z[j + 1]
    u_ising = np.diag(np.exp(-1j * diag))
    kick_1q = np.array(
        [
            [np.cos(b_field), -1j * np.sin(b_field)],
            [-1j * np.sin(b_field), np.cos(b_field)],
        ]
    )
    kick = np.array([[1.0]])
    for _ in range(n):
        kick = np.kron(kick, kick_1q)  # all sites identical, order immaterial
    return u_ising @ kick


def kicked_ising(
    n: int,
    j_coupling: float,
    b_field: float,
    h_field: float,
    expected_class: str = "unknown",
    seed: int = 0,
) -> DynamicsModel:
    """Floquet kicked Ising chain: U = exp(-i sum J ZZ + h Z) exp(-i b sum X).

    The kick factorizes into identical single-site rotations, the Ising part
    is diagonal; both are built exactly (no matrix-exponential truncation).
    Initial state: |0...0> rotated by the kick once, to avoid starting in a
    trivial eigenstate at the integrable point.
    """
    if n < 2:
        raise ValueError("need at least two sites")
    reg = sites_register(n, 2)
    step = _kicked_ising_step(n, j_coupling, b_field, h_field)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    init = PureState(reg, v / np.linalg.norm(v))
    return DynamicsModel(
        "kicked_ising",
        reg,
        init,
        None,
        step,
        expected_class,
        {"n": n, "j_coupling": j_coupling, "b_field": b_field, "h_field": h_field},
    )


def kicked_ising_preset(n: int, preset: str, seed: int = 0) -> DynamicsModel:
    params = KICKED_ISING_PRESETS[preset]
    expected = "chaotic" if preset == "chaotic" else "regular"
    model = kicked_ising(n, expected_class=expected, seed=seed, **params)
    model.preset["preset"] = preset
    return model


def haar_dynamics(
    d_s: int, d_e: int, k: int, rng: np.random.Generator, haar_initial: bool = True
) -> DynamicsModel:
    """k independent Haar step unitaries on S x E.

    The initial state is Haar random by default (the ensemble whose average
    process purity has the exact closed form used by the typicality checks);
    pass ``haar_initial=False`` for a |0><0| product start.
    """
    reg = Register.make(("S", d_s, Role.S), ("E", d_e, Role.E))
    if haar_initial:
        v = rng.standard_normal(reg.dim) + 1j * rng.standard_normal(reg.dim)
        init = PureState(reg, v / np.linalg.norm(v))
    else:
        init = basis_state(reg, 0)
    steps = tuple(haar_unitary(d_s * d_e, rng) for _ in range(k))
    return DynamicsModel(
        "haar_dynamics", reg, init, steps, None, "chaotic",
        {"d_s": d_s, "d_e": d_e, "k": k},
    )


def brickwork_step(n: int, depth: int, rng: np.random.Generator) -> GateSequence:
    """Brickwork of Haar two-site gates as a gate sequence (no dense matrix)."""
    gates = []
    for layer in range(depth):
        off = layer % 2
        for i in range(off, n - 1, 2):
            gates.append((haar_unitary(4, rng), (f"s{i}", f"s{i+1}")))
    return GateSequence(tuple(gates))


def brickwork_scrambled_state(register: Register, depth: int, rng: np.random.Generator) -> PureState:
    """Brickwork circuit applied to |0...0> on a qubit-site register."""
    state = basis_state(register, 0)
    labels = register.labels
    n = len(labels)
    for layer in range(depth):
        off = layer % 2
        for i in range(off, n - 1, 2):
            state = apply_local(haar_unitary(4, rng), [labels[i], labels[i + 1]], state)
    return state


def haar_sites(
    n: int, k: int, rng: np.random.Generator, haar_initial: bool = True
) -> DynamicsModel:
    """k independent global Haar steps on an n-qubit site register.

    Same ensemble as :func:`haar_dynamics` but with the environment exposed
    as individual sites, so restricted correction circuits and spatial cut
    families are meaningful.
    """
    reg = sites_register(n, 2)
    if haar_initial:
        v = rng.standard_normal(reg.dim) + 1j * rng.standard_normal(reg.dim)
        init = PureState(reg, v / np.linalg.norm(v))
    else:
        init = basis_state(reg, 0)
    steps = tuple(haar_unitary(2**n, rng) for _ in range(k))
    return DynamicsModel(
        "haar_sites", reg, init, steps, None, "chaotic", {"n": n, "k": k},
    )


def design_dynamics(
    n: int,
    depth: int,
    k: int,
    rng: np.random.Generator,
    haar_initial: bool = True,
    dense: bool | None = None,
) -> DynamicsModel:
    """k independent brickwork circuits on n qubits (site 0 is S).

    Dense step matrices are built up to 10 sites; wider chains use gate
    sequences applied directly to the state (same circuits, never
    materialized).  With gate-sequence steps, a non-Haar initial state is
    the brickwork-scrambled |0...0> at the same depth.
    """
    reg = sites_register(n, 2)
    if dense is None:
        dense = n <= 10
    if haar_initial:
        v = rng.standard_normal(reg.dim) + 1j * rng.standard_normal(reg.dim)
        init = PureState(reg, v / np.linalg.norm(v))
    elif dense:
        init = basis_state(reg, 0)
    else:
        init = brickwork_scrambled_state(reg, depth, rng)
    if dense:
        steps = tuple(design_circuit(n, depth, rng) for _ in range(k))
    else:
        steps = tuple(brickwork_step(n, depth, rng) for _ in range(k))
    return DynamicsModel(
        "design_dynamics", reg, init, steps, None, "chaotic",
        {"n": n, "depth": depth, "k": k, "dense": dense},
    )


def state_chaos_construction(
    n: int, scramble_depth: int = 0, rng: np.random.Generator | None = None, seed: int = 0
) -> DynamicsModel:
    """Volume-law entangled initial state with trivial (depth-1, strictly
    local) dynamics.

    The initial state pairs site i maximally with site i + n/2, so every
    contiguous prefix cut up to half the chain carries maximal entropy;
    optional extra brickwork layers roughen the state further.  The dynamics
    is a single layer of random single-site rotations: it creates no
    entanglement, and any local flutter is corrected exactly by a
    depth-1 single-site circuit.
    """
    if n < 4 or n % 2:
        raise ValueError("need an even site count >= 4")
    rng = rng or np.random.default_rng(seed)
    reg = sites_register(n, 2)
    half = n // 2
    ten = np.zeros((2,) * n, dtype=complex)
    for bits in np.ndindex(*(2,) * half):
        idx = list(bits) + list(bits)
        ten[tuple(idx)] = 2.0 ** (-half / 2.0)
    init = PureState(reg, ten.reshape(-1, order="F"))
    if scramble_depth:
        from .qcore import apply_local

        for layer in range(scramble_depth):
            off = layer % 2
            for i in range(off, n - 1, 2):
                init = apply_local(
                    haar_unitary(4, rng), [f"s{i}", f"s{i+1}"], init
                )
    step = np.array([[1.0]])
    for _ in range(n):
        step = np.kron(haar_unitary(2, rng), step)
    return DynamicsModel(
        "state_chaos", reg, init, None, step, "state-chaos",
        {"n": n, "scramble_depth": scramble_depth, "seed": seed},
    )
