"""Haar unitary sampling, brickwork design circuits, the closed-form
Haar-average purity, concentration bounds, and the typicality experiment.

The typicality ensemble samples both the initial system-environment state
and the k step unitaries from the Haar measure (independently per step);
the reduced object is the process tensor extended by the final system leg,
dimension d_S^(2k+1), for which the closed-form average purity is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qcore import check_cap

# ---------------------------------------------------------------------------
# sampling


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Ginibre matrix with the R-diagonal phase correction."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_orthonormal_pair(d: int, rng: np.random.Generator):
    """First two columns of a Haar unitary (economy QR of a d x 2 Ginibre)."""
    z = (rng.standard_normal((d, 2)) + 1j * rng.standard_normal((d, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q[:, 0], q[:, 1]


def design_circuit(sites: int, depth: int, rng: np.random.Generator) -> np.ndarray:
    """Brickwork of independent Haar two-site gates, alternating offsets,
    multiplied into one dense unitary.  Depth 0 gives the identity."""
    if sites < 2:
        raise ValueError("need at least two sites")
    dim = 2**sites
    check_cap(dim * dim)
    u = np.eye(dim, dtype=complex)
    for layer in range(depth):
        off = layer % 2
        mat = np.eye(1, dtype=complex)
        pos = 0
        while pos < sites:
            if pos == 0 and off == 1:
                mat = np.kron(np.eye(2, dtype=complex), mat)
                pos += 1
            elif pos + 1 < sites:
                mat = np.kron(haar_unitary(4, rng), mat)  # slow factor = later sites
                pos += 2
            else:
                mat = np.kron(np.eye(2, dtype=complex), mat)
                pos += 1
        u = mat @ u
    return u


def frame_potential_2(sampler, n_samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo 2-frame potential E |tr(U^dag V)|^4 over iid pairs.

    The Haar value is 2; approach from above witnesses 2-design convergence.
    """
    acc = 0.0
    for _ in range(n_samples):
        u = sampler(rng)
        v = sampler(rng)
        acc += abs(np.trace(u.conj().T @ v)) ** 4
    return acc / n_samples


# ---------------------------------------------------------------------------
# closed forms and bounds


def closed_form_B(d_s: int, d_e: int, k: int) -> float:
    """Exact Haar average of tr[Y_BR1^2] - 1/d_BR1 (d_BR1 = d_S^(2k+1))."""
    if d_s < 2 or d_e < 2:
        raise ValueError("dimensions must be >= 2")
    if k < 1:
        raise ValueError("the closed form is derived for k >= 1")
    d_se = d_s * d_e
    lead = (d_e**2 - 1) / (d_e * (d_se + 1))
    ratio = (d_e**2 - 1) / (d_se**2 - 1)
    return lead * ratio**k + 1.0 / d_e - 1.0 / d_s ** (2 * k + 1)


def haar_concentration_C(d_s: int, d_e: int, k: int) -> float:
    """Exponent constant of the Haar tail bound exp(-C delta^2)."""
    geo = (d_s ** (k + 1) - 1) / (d_s - 1)
    return (k + 1) * d_e * d_s / (8.0 * geo * geo)


def haar_bounds(d_s: int, d_e: int, k: int, delta: float):
    """(J_H(delta), G_H(delta)): deficit threshold and tail probability."""
    d_br1 = d_s ** (2 * k + 1)
    b = closed_form_B(d_s, d_e, k)
    j = math.log(d_br1 * (b + delta) + 1.0)
    g = math.exp(-haar_concentration_C(d_s, d_e, k) * delta * delta)
    return j, g


def design_tail_F(
    d_s: int, d_e: int, k: int, m: float, t: int, eps_design: float
) -> float:
    """Polynomial tail constant for epsilon-approximate t-design dynamics.

    Evaluated as a formula with caller-supplied (eps, t, m); no claim of
    empirical tightness is made at desk scale.
    """
    if not 0 < m <= t / 4:
        raise ValueError("need 0 < m <= t/4")
    d_se = d_s * d_e
    geo = (d_s ** (k + 1) - 1) / (d_s - 1)
    first = (16.0 * m / ((k + 1) * d_se) * geo * geo) ** m
    second = closed_form_B(d_s, d_e, k) ** m
    third = (eps_design / (16.0**m * d_se**t)) * (
        d_e**4 * d_s ** (2 * (k + 2)) + d_s ** (-(2 * k + 1))
    )
    return first + second + third


def design_bounds(
    d_s: int, d_e: int, k: int, delta: float, m: float, t: int, eps_design: float
):
    """(J_t(delta), G_t(delta)) for design dynamics."""
    d_br1 = d_s ** (2 * k + 1)
    j = math.log(d_br1 * delta + 1.0)
    g = design_tail_F(d_s, d_e, k, m, t, eps_design) / delta**m
    return j, g


# ---------------------------------------------------------------------------
# the typicality experiment


@dataclass(frozen=True, eq=False)
class TypicalityReport:
    samples: int
    regime: str  # "haar" | "design"
    d_s: int
    d_e: int
    k: int
    empirical_mean_purity: float
    purity_sem: float
    closed_form_B: float
    deficits: np.ndarray
    deficit_quantiles: dict
    bound_values: dict  # delta -> (J, G)
    exceedance: dict  # delta -> empirical frequency of deficit >= J
    design_depth: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def mean_deviation(self) -> float:
        """Empirical counterpart of the closed form: mean purity - 1/d_BR1."""
        return self.empirical_mean_purity - 1.0 / self.d_s ** (2 * self.k + 1)


def _sample_deficit_and_purity(d_s, d_e, k, rng, regime, design_depth):
    from .models import design_dynamics, haar_dynamics  # local import, no cycle at module load
    from .process import reduced_process
    from .qcore import partial_trace
    from .entanglement import entropy

    if regime == "haar":
        model = haar_dynamics(d_s, d_e, k, rng, haar_initial=True)
    elif regime == "design":
        n = int(round(math.log2(d_s * d_e)))
        if 2**n != d_s * d_e or d_s != 2:
            raise ValueError("design regime needs qubit S and power-of-two d_E")
        model = design_dynamics(n, design_depth, k, rng, haar_initial=True)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    proc = model.process(k)
    keep = proc.b_labels + [proc.s_out_label]
    rho = partial_trace(proc.choi, keep)
    purity = rho.purity()
    d_br1 = d_s ** (2 * k + 1)
    deficit = math.log(d_br1) - entropy(rho, "renyi2")
    return purity, deficit


def typicality_experiment(
    d_s: int,
    d_e: int,
    k: int,
    samples: int,
    deltas,
    rng: np.random.Generator,
    regime: str = "haar",
    design_depth: int | None = None,
    design_params: dict | None = None,
) -> TypicalityReport:
    """Sample processes, collect entropy deficits of Y_BR1, and compare the
    mean purity and tail frequencies against the closed forms.

    ``design_params`` supplies (m, t, eps) for the design-regime tail
    constant; it defaults to a documented conventional choice.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    check_cap(d_s ** (2 * k + 1) * d_e)
    purities = np.empty(samples)
    deficits = np.empty(samples)
    for i in range(samples):
        purities[i], deficits[i] = _sample_deficit_and_purity(
            d_s, d_e, k, rng, regime, design_depth
        )
    mean_p = float(purities.mean())
    sem = float(purities.std(ddof=1) / math.sqrt(samples))
    bounds = {}
    exceed = {}
    for delta in deltas:
        if regime == "haar":
            j, g = haar_bounds(d_s, d_e, k, delta)
        else:
            dp = design_params or {"m": 1.0, "t": 4, "eps": 0.01}
            j, g = design_bounds(d_s, d_e, k, delta, dp["m"], dp["t"], dp["eps"])
        bounds[delta] = (j, g)
        exceed[delta] = float(np.mean(deficits >= j))
    qs = {q: float(np.quantile(deficits, q)) for q in (0.5, 0.9, 0.95, 0.99)}
    return TypicalityReport(
        samples=samples,
        regime=regime,
        d_s=d_s,
        d_e=d_e,
        k=k,
        empirical_mean_purity=mean_p,
        purity_sem=sem,
        closed_form_B=closed_form_B(d_s, d_e, k),
        deficits=deficits,
        deficit_quantiles=qs,
        bound_values=bounds,
        exceedance=exceed,
        design_depth=design_depth,
    )


def binomial_sigma(freq: float, n: int) -> float:
    """Standard error of an empirical frequency over n Bernoulli trials."""
    p = min(max(freq, 1.0 / n), 1.0 - 1.0 / n)
    return math.sqrt(p * (1.0 - p) / n)
