"""Schmidt decompositions across arbitrary leg bipartitions, von Neumann and
Renyi-2 entropies, mutual and tripartite mutual information, and entanglement
scaling profiles with area/volume classification.

Entropies are natural log (nats).  Eigenvalues below 1e-12 are floored
before logs; eigenvalues below -1e-9 raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import (
    DensityOperator,
    EIG_FLOOR,
    PureState,
    partial_trace,
)

# classification thresholds for the least-squares slope of entropy (nats)
# against ln(kept dimension); documented desk-scale stand-ins for the
# asymptotic scaling classes
VOLUME_SLOPE = 0.8
AREA_SLOPE = 0.2


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Descending Schmidt coefficients across a bipartition."""

    coefficients: np.ndarray
    bipartition: tuple[tuple[str, ...], tuple[str, ...]]
    rank_eps: int

    @property
    def probabilities(self) -> np.ndarray:
        return self.coefficients**2


@dataclass(frozen=True, eq=False)
class ScalingProfile:
    points: tuple[tuple[float, float], ...]  # (ln kept dim, entropy nats)
    fit_slope: float
    classification: str  # "area" | "intermediate" | "volume"
    cut_ids: tuple[str, ...] = ()


def schmidt(state: PureState, part_a, compute_basis: bool = False):
    """Singular values of the amplitude matrix reshaped across part_a : rest.

    With ``compute_basis`` also returns (U, Vh); U columns live on part_a in
    register order (little-endian composite index).
    """
    reg = state.register
    part_a = list(part_a)
    if not part_a:
        raise ValueError("part_a must be nonempty")
    pos_a = sorted(reg.positions(part_a))
    if len(pos_a) == len(reg.subsystems):
        raise ValueError("trivial bipartition: part_a is the whole register")
    rest = [p for p in range(len(reg.subsystems)) if p not in pos_a]
    ten = state.tensor().transpose(pos_a + rest)
    da = int(np.prod([reg.dims[p] for p in pos_a]))
    mat = ten.reshape(da, -1, order="F")
    labels_a = tuple(reg.subsystems[p].label for p in pos_a)
    labels_b = tuple(reg.subsystems[p].label for p in rest)
    if compute_basis:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        spec = SchmidtSpectrum(s, (labels_a, labels_b), int(np.sum(s > 1e-10)))
        return spec, u, vh
    s = np.linalg.svd(mat, compute_uv=False)
    return SchmidtSpectrum(s, (labels_a, labels_b), int(np.sum(s > 1e-10)))


def _probs_of(obj) -> np.ndarray:
    if isinstance(obj, SchmidtSpectrum):
        return obj.probabilities
    if isinstance(obj, DensityOperator):
        w = np.linalg.eigvalsh(obj.matrix)
        if w.min() < -1e-9:
            raise ValueError(f"eigenvalue {w.min()} below -1e-9")
        return np.clip(w, 0.0, None)
    raise TypeError(f"cannot take entropy of {type(obj).__name__}")


def entropy(obj, kind: str = "vonNeumann") -> float:
    """von Neumann -sum p ln p or Renyi-2 -ln sum p^2, in nats."""
    p = _probs_of(obj)
    if kind == "vonNeumann":
        p = p[p > EIG_FLOOR]
        return float(-np.sum(p * np.log(p)))
    if kind == "renyi2":
        return float(-math.log(max(np.sum(p * p), EIG_FLOOR)))
    raise ValueError(f"unknown entropy kind {kind!r}")


def subsystem_entropy(state: PureState, labels, kind: str = "vonNeumann") -> float:
    """Entropy of the reduction onto ``labels``, via the smaller side."""
    reg = state.register
    labels = list(labels)
    comp = [l for l in reg.labels if l not in labels]
    if not labels or not comp:
        return 0.0
    d_keep = int(np.prod(reg.dims_of(labels)))
    d_comp = reg.dim // d_keep
    side = labels if d_keep <= d_comp else comp
    return entropy(partial_trace(state, side), kind)


def mutual_information(state: PureState, a, b, kind: str = "vonNeumann") -> float:
    """I(A:B) = S_A + S_B - S_AB on a pure state's reductions."""
    a, b = list(a), list(b)
    if set(a) & set(b):
        raise ValueError("mutual information needs disjoint label sets")
    val = (
        subsystem_entropy(state, a, kind)
        + subsystem_entropy(state, b, kind)
        - subsystem_entropy(state, a + b, kind)
    )
    if val < -1e-8:
        raise ValueError(f"mutual information {val} below -1e-8")
    return val


def tripartite_mi(proc, r1, r2=None, kind: str = "vonNeumann") -> float:
    """I3(B:R1:R2) = I(B:R1) + I(B:R2) - I(B:R1R2) for a one-step process.

    ``r2`` defaults to the remainder-space complement of ``r1``.  Note that
    for a pure process with r1 + r2 covering all of R, purity forces
    I(B:R1) + I(B:R2) = I(B:R) exactly, so I3 = 0; the strong-scrambling
    probe needs r1 + r2 to be a *proper* subset of R, with the rest of the
    environment traced out (the channel-with-discarded-purifier setup this
    diagnostic originates from).
    """
    if proc.k != 1:
        raise ValueError("tripartite mutual information is defined for k=1 processes")
    r_labels = proc.r_labels
    r1 = list(r1)
    if not set(r1) <= set(r_labels):
        raise ValueError(f"r1 {r1} not inside the remainder space {r_labels}")
    if set(r1) == set(r_labels):
        raise ValueError("r1 must be a proper subset of the remainder space")
    if r2 is None:
        r2 = [l for l in r_labels if l not in set(r1)]
    else:
        r2 = list(r2)
        if set(r1) & set(r2) or not set(r2) <= set(r_labels):
            raise ValueError("r2 must be inside R and disjoint from r1")
    b = proc.b_labels
    state = proc.choi
    i_br1 = mutual_information(state, b, r1, kind)
    i_br2 = mutual_information(state, b, r2, kind)
    i_br = mutual_information(state, b, r1 + r2, kind)
    return i_br1 + i_br2 - i_br


def fit_slope(points) -> float:
    """Least-squares slope of entropy against ln(kept dimension)."""
    if len(points) < 2:
        raise ValueError("need at least two profile points for a slope")
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    xc = x - x.mean()
    denom = float(np.sum(xc * xc))
    if denom < 1e-30:
        raise ValueError("degenerate cut family: all cuts have the same dimension")
    return float(np.sum(xc * (y - y.mean())) / denom)


def classify_slope(slope: float) -> str:
    if slope >= VOLUME_SLOPE:
        return "volume"
    if slope <= AREA_SLOPE:
        return "area"
    return "intermediate"


def scaling_profile(proc, cut_family, kind: str = "vonNeumann") -> ScalingProfile:
    """Entropy at each cut of the pure process, slope, and classification.

    ``cut_family`` is a list of (cut_id, labels) pairs; each cut keeps the
    given labels (a subset of B plus R legs) and must keep at most half the
    total dimension.  At least three cuts are required for classification.
    """
    cut_family = list(cut_family)
    if len(cut_family) < 3:
        raise ValueError("need at least three cuts for a scaling profile")
    state = proc.choi
    reg = state.register
    total = reg.dim
    points = []
    ids = []
    for cut_id, labels in cut_family:
        labels = list(labels)
        d_keep = int(np.prod(reg.dims_of(labels)))
        if d_keep * d_keep > total:
            raise ValueError(
                f"cut {cut_id!r} keeps dimension {d_keep} above half the register"
            )
        s = subsystem_entropy(state, labels, kind)
        lk = math.log(d_keep)
        if s > lk + 1e-8:
            raise ValueError(f"cut {cut_id!r} exceeds the max-entropy bound")
        points.append((lk, s))
        ids.append(str(cut_id))
    slope = fit_slope(points)
    return ScalingProfile(tuple(points), slope, classify_slope(slope), tuple(ids))


def prefix_cut_family(proc, max_sites: int | None = None, include_b: bool = True):
    """Default cut family: all butterfly legs plus a growing spatial prefix
    of the remainder sites (the first m remainder subsystems, m = 0, 1, ...).

    Stops strictly below half the total dimension (the kept side must be the
    smaller one); the exact-half cut carries the largest finite-size entropy
    deficit and would bias the slope fit.
    """
    reg = proc.choi.register
    total = reg.dim
    b = proc.b_labels if include_b else []
    r = proc.r_labels
    fam = []
    m = 0
    limit = len(r) if max_sites is None else min(max_sites, len(r))
    while m <= limit:
        labels = b + r[:m]
        if not labels:
            m += 1
            continue
        d_keep = int(np.prod(reg.dims_of(labels)))
        if d_keep * d_keep >= total:
            break
        fam.append((f"B+{m}", labels))
        m += 1
    return fam


def brickwork_lightcone(n_sites: int, depth: int, start_sites) -> set[int]:
    """Sites reachable from start_sites by `depth` nearest-neighbor layers."""
    cone = set(start_sites)
    for _ in range(depth):
        grown = set(cone)
        for s in cone:
            if s > 0:
                grown.add(s - 1)
            if s < n_sites - 1:
                grown.add(s + 1)
        cone = grown
    return cone
