"""Experiment implementations behind the CLI: each takes a validated config
plus a seeded generator and returns rows, a summary, and assertion results.

Determinism contract: identical (config, seed) produce byte-identical CSV
rows; all floats are rendered with repr-precision formatting and every
random draw flows from the single seeded generator in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bff as bff_mod
from . import diagnostics, entanglement, models, randomness
from .instruments import RankOneInstrument, flutter_choi, identity_flutter
from .process import reduced_process
from .qcore import Role

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
MINUS = np.array([1.0, -1.0]) / math.sqrt(2)


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentResult:
    rows: list[dict]
    columns: list[str]
    summary: dict
    assertions: list[Assertion]


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def build_model(spec: dict, rng: np.random.Generator):
    mid = spec["id"]
    if mid == "haar":
        return models.haar_dynamics(
            spec.get("d_s", 2), spec["d_e"], spec["k"], rng,
            haar_initial=spec.get("haar_initial", True),
        )
    if mid == "haar_sites":
        return models.haar_sites(
            spec["n"], spec["k"], rng, haar_initial=spec.get("haar_initial", True)
        )
    if mid == "design":
        return models.design_dynamics(
            spec["n"], spec["depth"], spec["k"], rng,
            haar_initial=spec.get("haar_initial", True),
        )
    if mid == "lindblad_bernoulli":
        local = spec.get("local", "identity")
        if local == "identity":
            lu = np.eye(2)
        elif local == "random":
            lu = randomness.haar_unitary(2, rng)
        else:
            raise ValueError(f"unknown local unitary spec {local!r}")
        return models.lindblad_bernoulli(spec["n"], lu, spec["k"], seed=spec.get("phi_seed", 0))
    if mid == "swap_chain":
        return models.swap_chain(spec["n"], seed=spec.get("phi_seed", 0))
    if mid == "kicked_ising":
        if "preset" in spec:
            return models.kicked_ising_preset(spec["n"], spec["preset"], seed=spec.get("init_seed", 0))
        return models.kicked_ising(
            spec["n"], spec["j_coupling"], spec["b_field"], spec["h_field"],
            seed=spec.get("init_seed", 0),
        )
    if mid == "state_chaos":
        return models.state_chaos_construction(
            spec["n"], spec.get("scramble_depth", 0), rng
        )
    raise ValueError(f"unknown model id {mid!r}")


def _named_unitary(name: str) -> np.ndarray:
    table = {"identity": np.eye(2), "X": X, "Z": Z}
    if name not in table:
        raise ValueError(f"unknown unitary name {name!r}")
    return table[name]


def _flutter_from_spec(spec, k: int, d_s: int, fid: str):
    if spec == "identity":
        return identity_flutter(k, d_s)
    if spec in ("X", "Z"):
        return flutter_choi([RankOneInstrument(_named_unitary(spec))] * k, flutter_id=fid)
    if spec in ("prep_plus", "prep_minus"):
        vec = PLUS if spec == "prep_plus" else MINUS
        prep = RankOneInstrument(np.outer(vec, np.eye(d_s)[:, 0]))
        return flutter_choi([prep] * k, flutter_id=fid)
    raise ValueError(f"unknown flutter spec {spec!r}")


def _expect_assertions(summary: dict, expect: dict, assertions: list[Assertion]):
    for key, rule in (expect or {}).items():
        if key not in summary:
            assertions.append(Assertion(f"expect:{key}", False, f"no summary field {key!r}"))
            continue
        got = summary[key]
        if isinstance(rule, dict) and "value" in rule:
            ok = abs(got - rule["value"]) <= rule.get("tol", 1e-8)
            assertions.append(
                Assertion(
                    f"expect:{key}",
                    bool(ok),
                    f"got {fmt(got)}, want {fmt(rule['value'])} +- {fmt(rule.get('tol', 1e-8))}",
                )
            )
        elif isinstance(rule, dict) and "equals" in rule:
            ok = got == rule["equals"]
            assertions.append(Assertion(f"expect:{key}", bool(ok), f"got {got!r}, want {rule['equals']!r}"))
        else:
            assertions.append(Assertion(f"expect:{key}", False, f"bad expect rule {rule!r}"))


# ---------------------------------------------------------------------------


def run_echo(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    eps, k_max = p["epsilon"], p["k_max"]
    samples = p.get("samples", 1)
    rows = []
    finals = []
    curves = []
    for s in range(samples):
        model = build_model(cfg["model"], rng)
        curve = diagnostics.loschmidt_echo(
            model, eps, k_max, seed=int(rng.integers(2**31))
        )
        curves.append(curve)
        finals.append(curve.points[-1][1])
        for k, f in curve.points:
            rows.append({"sample": s, "k": k, "fidelity": fmt(f), "epsilon": fmt(eps)})
    mean_curve = np.mean([c.values() for c in curves], axis=0)
    summary = {
        "epsilon": eps,
        "k_max": k_max,
        "samples": samples,
        "mean_final_fidelity": float(np.mean(finals)),
        "reference_exponential_final": math.exp(-2 * k_max * eps),
        "mean_curve": [float(v) for v in mean_curve],
    }
    assertions = [
        Assertion("echo:k0_is_one", all(c.points[0] == (0, 1.0) for c in curves), "fidelity at k=0"),
        Assertion(
            "echo:in_unit_interval",
            all(0.0 <= f <= 1.0 + 1e-10 for c in curves for _, f in c.points),
            "all fidelities in [0, 1]",
        ),
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["sample", "k", "fidelity", "epsilon"], summary, assertions)


def run_sdy(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    k = p["k"]
    samples = p.get("samples", 1)
    vals = []
    rows = []
    d_s = 2
    for s in range(samples):
        model = build_model(cfg["model"], rng)
        d_s = model.d_s
        proc = model.process(k)
        val = diagnostics.dynamical_entropy_k(proc)
        vals.append(val)
        rows.append({"sample": s, "k": k, "sdy_nats": fmt(val)})
    summary = {"k": k, "samples": samples, "mean_sdy_nats": float(np.mean(vals))}
    assertions = [
        Assertion(
            "sdy:bounded",
            all(-1e-9 <= v <= 2 * math.log(d_s) + 1e-9 for v in vals),
            "0 <= S_dy <= 2 ln d_S",
        )
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["sample", "k", "sdy_nats"], summary, assertions)


def run_tmi(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    samples = p.get("samples", 1)
    vals = []
    rows = []
    d_b = None
    for s in range(samples):
        model = build_model(cfg["model"], rng)
        proc = model.process(1)
        r1 = p["r1"]
        r2 = p.get("r2")
        val = entanglement.tripartite_mi(proc, r1, r2)
        d_b = proc.d_b
        vals.append(val)
        rows.append({"sample": s, "i3_nats": fmt(val)})
    summary = {
        "samples": samples,
        "mean_i3_nats": float(np.mean(vals)),
        "minimal_value": -2 * math.log(d_b),
    }
    assertions = [
        Assertion(
            "tmi:above_minimal",
            all(v >= -2 * math.log(d_b) - 1e-6 for v in vals),
            "I3 >= -2 ln d_B",
        )
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["sample", "i3_nats"], summary, assertions)


def run_loe(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    model = build_model(cfg["model"], rng)
    curve = diagnostics.local_operator_entanglement(
        model, _named_unitary(p.get("x_op", "X")), p["site"], p["part_a"], p["t_max"]
    )
    rows = [{"t": t, "entropy_nats": fmt(s)} for t, s in curve.points]
    vals = curve.values()
    summary = {
        "site": p["site"],
        "t_max": p["t_max"],
        "entropies": [float(v) for v in vals],
        "final_entropy": float(vals[-1]),
        "monotone_within_tol": bool(all(vals[t + 1] >= vals[t] - 0.05 for t in range(len(vals) - 1))),
    }
    assertions = [Assertion("loe:nonnegative", bool(vals.min() >= -1e-10), "entropy >= 0")]
    if p.get("assert_monotone"):
        assertions.append(
            Assertion("loe:monotone", summary["monotone_within_tol"], "growth within 0.05 nats tolerance")
        )
    if "max_entropy" in p:
        assertions.append(
            Assertion("loe:bounded", bool(vals.max() <= p["max_entropy"] + 1e-8), f"max {vals.max()}")
        )
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["t", "entropy_nats"], summary, assertions)


def run_scaling(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    model = build_model(cfg["model"], rng)
    proc = model.process(p["k"])
    if p.get("cuts", "prefix") == "prefix":
        fam = entanglement.prefix_cut_family(proc, include_b=p.get("include_b", True))
    else:
        fam = [(c["id"], c["labels"]) for c in p["cuts"]]
    prof = entanglement.scaling_profile(proc, fam)
    rows = [
        {"cut_id": cid, "ln_dim": fmt(lk), "entropy_nats": fmt(s), "kind": "vonNeumann"}
        for cid, (lk, s) in zip(prof.cut_ids, prof.points)
    ]
    summary = {
        "slope": prof.fit_slope,
        "classification": prof.classification,
        "cuts": list(prof.cut_ids),
    }
    assertions = [
        Assertion(
            "scaling:max_entropy_bound",
            all(s <= lk + 1e-8 for lk, s in prof.points),
            "entropy <= ln(kept dim) at every cut",
        )
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(
        rows, ["cut_id", "ln_dim", "entropy_nats", "kind"], summary, assertions
    )


def run_bff(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    model = build_model(cfg["model"], rng)
    k = p["k"]
    proc = model.process(k)
    x = _flutter_from_spec(p["x"], k, proc.d_s, "x")
    y = _flutter_from_spec(p["y"], k, proc.d_s, "y")
    depth = p.get("depth", 1)
    if depth == 0:
        layout = []
    elif p.get("layout", "local") == "local":
        layout = bff_mod.local_layout(proc.r_labels, depth)
    else:
        layout = bff_mod.brickwork_layout(proc.r_labels, depth)
    res = bff_mod.optimize_correction(
        proc, x, y, layout,
        budget=p.get("budget", 60),
        seed=int(rng.integers(2**31)),
        restarts=p.get("restarts", 4),
        allow_nonorthogonal=p.get("allow_nonorthogonal", False),
    )
    rows = [
        {
            "zeta": fmt(res.zeta),
            "identity_baseline": fmt(res.identity_baseline),
            "depth": depth,
            "sweeps": res.iterations,
            "converged": res.converged,
        }
    ]
    summary = {
        "zeta": res.zeta,
        "identity_baseline": res.identity_baseline,
        "depth": depth,
        "sweeps": res.iterations,
        "converged": bool(res.converged),
        "flutter_pair": list(res.flutter_pair),
    }
    assertions = [
        Assertion("bff:above_baseline", res.zeta >= res.identity_baseline - 1e-9, "optimizer kept the identity floor"),
        Assertion("bff:at_most_one", res.zeta <= 1.0 + 1e-8, "fidelity <= 1"),
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(
        rows, ["zeta", "identity_baseline", "depth", "sweeps", "converged"], summary, assertions
    )


def run_random_butterfly(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    model = build_model(cfg["model"], rng)
    proc = model.process(p["k"])
    r1 = p.get("r1", [proc.s_out_label])
    if r1 == "s_out":
        r1 = [proc.s_out_label]
    rep = diagnostics.random_butterfly_experiment(
        proc, r1, trials=p["trials"], deltas=tuple(p["deltas"]), rng=rng
    )
    rows = [
        {
            "delta": fmt(d),
            "exceedance": fmt(rep.exceedance[d]),
            "bound": fmt(rep.bounds[d]),
            "binomial_sigma": fmt(rep.sigmas[d]),
        }
        for d in p["deltas"]
    ]
    summary = {
        "trials": rep.trials,
        "d_br1": rep.d_br1,
        "purity": rep.purity,
        "empirical_mean": rep.empirical_mean,
        "exact_mean": rep.exact_mean,
        "exceedance": {f"{k:g}": v for k, v in rep.exceedance.items()},
        "bounds": {f"{k:g}": v for k, v in rep.bounds.items()},
    }
    assertions = [
        Assertion(
            f"butterfly:markov_bound:{fmt(d)}",
            rep.exceedance[d] <= rep.bounds[d] + 3 * rep.sigmas[d],
            f"freq {fmt(rep.exceedance[d])} vs bound {fmt(rep.bounds[d])}",
        )
        for d in p["deltas"]
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(
        rows, ["delta", "exceedance", "bound", "binomial_sigma"], summary, assertions
    )


def run_typicality(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    rep = randomness.typicality_experiment(
        p.get("d_s", 2),
        p["d_e"],
        p["k"],
        samples=p["samples"],
        deltas=tuple(p["deltas"]),
        rng=rng,
        regime=p.get("regime", "haar"),
        design_depth=p.get("design_depth"),
        design_params=p.get("design_params"),
    )
    rows = [
        {"sample": i, "deficit_nats": fmt(float(d))}
        for i, d in enumerate(rep.deficits)
    ]
    summary = {
        "samples": rep.samples,
        "regime": rep.regime,
        "mean_purity": rep.empirical_mean_purity,
        "mean_deviation": rep.mean_deviation,
        "closed_form_B": rep.closed_form_B,
        "purity_sem": rep.purity_sem,
        "deficit_quantiles": {f"{k:g}": v for k, v in rep.deficit_quantiles.items()},
        "bounds": {f"{k:g}": list(v) for k, v in rep.bound_values.items()},
        "exceedance": {f"{k:g}": v for k, v in rep.exceedance.items()},
    }
    assertions = []
    if rep.regime == "haar":
        assertions.append(
            Assertion(
                "typicality:mean_purity_3sigma",
                abs(rep.mean_deviation - rep.closed_form_B) <= 3 * rep.purity_sem,
                f"deviation {fmt(rep.mean_deviation)} vs closed form {fmt(rep.closed_form_B)}",
            )
        )
    for delta, (j, g) in rep.bound_values.items():
        freq = rep.exceedance[delta]
        sig = randomness.binomial_sigma(freq, rep.samples)
        assertions.append(
            Assertion(
                f"typicality:tail:{fmt(delta)}",
                freq <= g + 3 * sig,
                f"freq {fmt(freq)} vs bound {fmt(g)}",
            )
        )
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["sample", "deficit_nats"], summary, assertions)


def run_pesin(cfg: dict, rng: np.random.Generator) -> ExperimentResult:
    p = cfg["params"]
    model = build_model(cfg["model"], rng)
    proc = model.process(p["k"])
    lhs, rhs = diagnostics.pesin_relation_check(proc)
    rows = [{"lhs_nats": fmt(lhs), "rhs_nats": fmt(rhs), "abs_diff": fmt(abs(lhs - rhs))}]
    summary = {"lhs": lhs, "rhs": rhs, "abs_diff": abs(lhs - rhs)}
    assertions = [
        Assertion("pesin:identity", abs(lhs - rhs) < 1e-8, f"|lhs - rhs| = {fmt(abs(lhs - rhs))}")
    ]
    _expect_assertions(summary, cfg.get("expect"), assertions)
    return ExperimentResult(rows, ["lhs_nats", "rhs_nats", "abs_diff"], summary, assertions)


EXPERIMENTS = {
    "echo": (run_echo, "weak-kick fidelity decay against the exp(-2 k eps) reference"),
    "sdy": (run_sdy, "finite-step dynamical entropy S(Y_B)/k of the process tensor"),
    "tmi": (run_tmi, "tripartite mutual information of a one-step process"),
    "loe": (run_loe, "entanglement growth of a Heisenberg-evolved local operator"),
    "scaling": (run_scaling, "entanglement scaling profile with area/volume classification"),
    "bff": (run_bff, "optimized correction fidelity over a restricted circuit family"),
    "random_butterfly": (run_random_butterfly, "random orthogonal-pair detection vs the Markov bound"),
    "typicality": (run_typicality, "random-dynamics purity/deficit against closed forms"),
    "pesin": (run_pesin, "Renyi-2 process entropy vs the exhaustive unitary-basis sum"),
}
