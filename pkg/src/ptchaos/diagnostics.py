"""Legacy chaos signatures with their closed-form oracles: the trotterized
echo, finite-step dynamical entropy, the exhaustive-basis entropy relation,
local-operator entanglement, and the random-butterfly detection experiment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .entanglement import entropy, subsystem_entropy
from .instruments import butterfly_basis, weak_unitary
from .process import PureProcess, reduced_process
from .qcore import (
    CapExceededError,
    DensityOperator,
    PureState,
    Register,
    apply_local,
    check_cap,
    partial_trace,
)
from .randomness import binomial_sigma, haar_orthonormal_pair


@dataclass(frozen=True, eq=False)
class EchoCurve:
    points: tuple[tuple[int, float], ...]  # (k, fidelity)
    epsilon: float
    model_id: str

    def __post_init__(self):
        for k, f in self.points:
            if not -1e-12 <= f <= 1.0 + 1e-10:
                raise ValueError(f"fidelity {f} at k={k} outside [0, 1]")
        if self.points[0] != (0, 1.0):
            raise ValueError("echo curve must start at (0, 1)")

    def values(self) -> np.ndarray:
        return np.array([f for _, f in self.points])


@dataclass(frozen=True, eq=False)
class LoeCurve:
    points: tuple[tuple[int, float], ...]  # (t, entropy nats)
    operator_id: str
    bipartition: tuple[tuple[str, ...], tuple[str, ...]]

    def values(self) -> np.ndarray:
        return np.array([s for _, s in self.points])


def loschmidt_echo(
    model, epsilon: float, k_max: int, seed: int = 0, w: np.ndarray | None = None
) -> EchoCurve:
    """Fidelity between the conditional states of the weak-unitary flutter
    W_eps^(x k) and the identity flutter, for k = 0 .. k_max.

    Computed by direct forward evolution (one weak kick before each step
    unitary against an unkicked twin), which agrees with conditioning the
    k-step Choi state and stays cheap at large k.
    """
    if w is None:
        w = weak_unitary(epsilon, model.d_s, seed)
    s_label = model.s_label
    labels = model.register.labels
    kicked = model.initial_state
    free = model.initial_state
    points = [(0, 1.0)]
    for k, u in enumerate(model.step_list(k_max), start=1):
        kicked = apply_local(u, labels, apply_local(w, [s_label], kicked))
        free = apply_local(u, labels, free)
        fid = float(abs(np.vdot(free.amplitudes, kicked.amplitudes)) ** 2)
        points.append((k, min(fid, 1.0)))
    return EchoCurve(tuple(points), epsilon, model.model_id)


def dynamical_entropy_k(proc: PureProcess) -> float:
    """S(Y_B) / k in nats; warns when d_B is not small against d_E."""
    if proc.d_b >= proc.d_e:
        warnings.warn(
            f"d_B = {proc.d_b} is not small against d_E = {proc.d_e}; the "
            "finite-step dynamical entropy is outside its intended regime",
            stacklevel=2,
        )
    s_b = subsystem_entropy(proc.choi, proc.b_labels)
    return s_b / proc.k


def pesin_relation_check(proc: PureProcess) -> tuple[float, float]:
    """(lhs, rhs): the Renyi-2 entropy of the process tensor against the
    exhaustive unitary-butterfly basis sum

        rhs = -ln[ (sum_{x != y} |<x|Y_B|y>|^2 + d_B) / d_B^2 ],

    using supernormalized basis Chois; the diagonal terms are the unit Born
    weights of deterministic flutters, hence the +d_B.
    """
    d_b = proc.d_b
    check_cap(d_b * d_b)
    ub = reduced_process(proc)
    lhs = entropy(ub, "renyi2")
    basis = butterfly_basis(proc.k, proc.d_s)
    vecs = np.array([fl.supernormalized().conj() for fl in basis])
    m = vecs.conj() @ ub.matrix @ vecs.T  # m[i, j] = <x_i*| Y_B |x_j*>
    sq = np.abs(m) ** 2
    off = float(sq.sum() - np.trace(sq))
    rhs = -math.log((off + d_b) / d_b**2)
    return lhs, rhs


def _embed_site_operator(op: np.ndarray, site_pos: int, dims) -> np.ndarray:
    full = np.eye(1, dtype=complex)
    for j, d in enumerate(dims):
        block = op if j == site_pos else np.eye(d, dtype=complex)
        full = np.kron(block, full)  # later subsystems are slower factors
    return full


def local_operator_entanglement(
    model, x_op: np.ndarray, site: str, part_a, t_max: int
) -> LoeCurve:
    """Entanglement of the normalized Choi state of the Heisenberg-evolved
    local operator across a spatial bipartition, for t = 0 .. t_max.

    The doubled register carries (row, column) leg pairs per site; a cut
    keeps both legs of each site in ``part_a``.
    """
    from .process import GateSequence

    reg = model.register
    steps_probe = model.step_list(1)
    if any(isinstance(u, GateSequence) for u in steps_probe):
        raise ValueError(
            "operator entanglement needs dense step matrices (Heisenberg "
            "conjugation); use a dense model"
        )
    pos = reg.position(site)
    dims = reg.dims
    x_full = _embed_site_operator(np.asarray(x_op, dtype=complex), pos, dims)
    check_cap(reg.dim**2)
    doubled = Register.make(
        *[(f"{l}_row", d) for l, d in zip(reg.labels, dims)],
        *[(f"{l}_col", d) for l, d in zip(reg.labels, dims)],
    )
    part_a = list(part_a)
    keep = [f"{l}_row" for l in part_a] + [f"{l}_col" for l in part_a]
    u_step = None
    u_t = np.eye(reg.dim, dtype=complex)
    points = []
    for t in range(t_max + 1):
        if t > 0:
            if model.steps is not None:
                u_step = model.step_list(t)[t - 1]
            else:
                u_step = model.repeated_step
            u_t = u_step @ u_t
        x_t = u_t.conj().T @ x_full @ u_t
        vec = x_t.reshape(-1, order="F") / np.linalg.norm(x_t, "fro")
        state = PureState(doubled, vec)
        s = subsystem_entropy(state, keep)
        max_side = min(
            np.prod([d**2 for l, d in zip(reg.labels, dims) if l in part_a]),
            np.prod([d**2 for l, d in zip(reg.labels, dims) if l not in part_a]),
        )
        assert s <= math.log(max_side) + 1e-8
        points.append((t, s))
    labels_b = tuple(l for l in reg.labels if l not in part_a)
    return LoeCurve(tuple(points), operator_id=site, bipartition=(tuple(part_a), labels_b))


@dataclass(frozen=True, eq=False)
class RandomButterflyReport:
    trials: int
    d_br1: int
    purity: float
    empirical_mean: float
    exact_mean: float  # two-fold Haar average of |<y|Y_BR1|x>|^2
    exceedance: dict  # delta -> empirical frequency
    bounds: dict  # delta -> (purity - 1/d) / delta
    sigmas: dict  # delta -> binomial standard error
    fidelity_exceedance: dict = field(default_factory=dict)

    def mean_sigma(self, samples: np.ndarray) -> float:
        return float(samples.std(ddof=1) / math.sqrt(len(samples)))


def weingarten_exact_mean(upsilon: np.ndarray) -> float:
    """Closed form d^2 (tr[Y^2] - 1/d) / (d^2 - 1) for orthogonal Haar pairs
    scaled to squared norm d."""
    d = upsilon.shape[0]
    pur = float(np.real(np.trace(upsilon @ upsilon)))
    return d * d * (pur - 1.0 / d) / (d * d - 1.0)


def weingarten_overlap_mc(
    upsilon: np.ndarray, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Samples of |<y|Y|x>|^2 over Haar orthogonal pairs with <x|x> = d
    (the supernormalization matching deterministic instruments)."""
    d = upsilon.shape[0]
    out = np.empty(trials)
    for i in range(trials):
        x, y = haar_orthonormal_pair(d, rng)
        out[i] = d * d * abs(np.vdot(y, upsilon @ x)) ** 2
    return out


def random_butterfly_experiment(
    proc_or_matrix,
    r1=None,
    trials: int = 500,
    deltas=(0.05, 0.1, 0.2),
    rng: np.random.Generator | None = None,
    seed: int = 0,
) -> RandomButterflyReport:
    """Empirical detection frequency of random orthogonal butterflies on
    B x R1 against the Markov bound (tr[Y_BR1^2] - 1/d) / delta and the
    exact two-fold Haar mean.

    The exceedance is measured on the same scaled overlap the bound
    controls; the normalized conditional-state fidelity exceedance is also
    reported for reference.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    rng = rng or np.random.default_rng(seed)
    if isinstance(proc_or_matrix, PureProcess):
        proc = proc_or_matrix
        r1 = list(r1 or [])
        keep = proc.b_labels + r1
        rho = partial_trace(proc.choi, keep)
        upsilon = rho.matrix
    else:
        upsilon = np.asarray(proc_or_matrix, dtype=complex)
    d = upsilon.shape[0]
    check_cap(d * d)
    pur = float(np.real(np.trace(upsilon @ upsilon)))
    samples = np.empty(trials)
    fid_samples = np.empty(trials)
    for i in range(trials):
        x, y = haar_orthonormal_pair(d, rng)
        num = abs(np.vdot(y, upsilon @ x)) ** 2
        samples[i] = d * d * num
        px = float(np.real(np.vdot(x, upsilon @ x)))
        py = float(np.real(np.vdot(y, upsilon @ y)))
        fid_samples[i] = num / (px * py) if px > 1e-30 and py > 1e-30 else 1.0
    exceed, bounds, sigmas, fid_exceed = {}, {}, {}, {}
    for delta in deltas:
        freq = float(np.mean(samples >= delta))
        exceed[delta] = freq
        bounds[delta] = (pur - 1.0 / d) / delta
        sigmas[delta] = binomial_sigma(freq, trials)
        fid_exceed[delta] = float(np.mean(fid_samples >= delta))
    return RandomButterflyReport(
        trials=trials,
        d_br1=d,
        purity=pur,
        empirical_mean=float(samples.mean()),
        exact_mean=weingarten_exact_mean(upsilon),
        exceedance=exceed,
        bounds=bounds,
        sigmas=sigmas,
        fidelity_exceedance=fid_exceed,
    )
