"""Figure kinds: echo decay, scaling profiles, operator-entanglement growth,
corrected-fidelity bars, and typicality histograms with bound markers.

Reference curves are recomputed locally from the closed forms (see
``reference_*`` functions); rendering is read-only and idempotent.
"""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ptchaos"
import matplotlib.pyplot as plt
import numpy as np

from .io import ArtifactError, Table, check_hashes, read_summary, read_table

SVG_METADATA = {"Date": None}  # keep re-renders byte-identical


def reference_echo(epsilon: float, ks) -> np.ndarray:
    """exp(-2 k epsilon), the weak-kick decay law."""
    return np.exp(-2.0 * epsilon * np.asarray(ks, dtype=float))


def reference_closed_form_B(d_s: int, d_e: int, k: int) -> float:
    """Haar-average purity deviation of the extended process tensor
    (reimplemented here; must agree with the runner's closed form)."""
    d_se = d_s * d_e
    lead = (d_e**2 - 1) / (d_e * (d_se + 1))
    ratio = (d_e**2 - 1) / (d_se**2 - 1)
    return lead * ratio**k + 1.0 / d_e - 1.0 / d_s ** (2 * k + 1)


def reference_deficit_threshold(d_s: int, d_e: int, k: int, delta: float) -> float:
    """J_H(delta) = ln(d_BR1 (B + delta) + 1)."""
    d_br1 = d_s ** (2 * k + 1)
    return math.log(d_br1 * (reference_closed_form_B(d_s, d_e, k) + delta) + 1.0)


def reference_tail_probability(d_s: int, d_e: int, k: int, delta: float) -> float:
    """G_H(delta) = exp(-C delta^2) with the geometric-sum constant."""
    geo = (d_s ** (k + 1) - 1) / (d_s - 1)
    c = (k + 1) * d_e * d_s / (8.0 * geo * geo)
    return math.exp(-c * delta * delta)


def _stamp(fig, config_hash: str, seed) -> None:
    text = f"config_hash={config_hash[:12]}"
    if seed is not None:
        text += f"  seed={seed}"
    fig.text(0.01, 0.005, text, fontsize=6, color="gray", family="monospace")


def _save(fig, output: str) -> list[str]:
    paths = []
    for ext in ("png", "svg"):
        path = f"{output}.{ext}"
        kwargs = {"metadata": SVG_METADATA} if ext == "svg" else {}
        fig.savefig(path, dpi=150, **kwargs)
        paths.append(path)
    plt.close(fig)
    return paths


def _seed_of(summary) -> int | None:
    return None if summary is None else summary["config"].get("seed")


def render_echo(tables, summary, output, caption="", y_scale="log"):
    """Mean fidelity against k on a semilog axis, with the independently
    recomputed exp(-2 k eps) reference line."""
    cfg_hash = check_hashes(tables, summary)
    t = tables[0]
    eps_vals = {float(e) for e in t.floats("epsilon")}
    if len(eps_vals) != 1:
        raise ArtifactError("echo table mixes epsilon values")
    epsilon = next(iter(eps_vals))
    by_k = defaultdict(list)
    for row in t.rows:
        by_k[int(row["k"])].append(float(row["fidelity"]))
    ks = sorted(by_k)
    means = np.array([np.mean(by_k[k]) for k in ks])
    ref = reference_echo(epsilon, ks)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(ks, means, "o-", label="mean fidelity", ms=4)
    ax.plot(ks, ref, "--", label=r"$e^{-2k\varepsilon}$ (recomputed)", color="k")
    ax.set_yscale(y_scale)
    ax.set_xlabel("steps k")
    ax.set_ylabel("fidelity")
    ax.legend(frameon=False, fontsize=8)
    if caption:
        ax.set_title(caption, fontsize=9)
    _stamp(fig, cfg_hash, _seed_of(summary))
    fig.tight_layout()
    return _save(fig, output), {"epsilon": epsilon, "ks": ks, "means": means.tolist(), "reference": ref.tolist()}


def render_scaling(tables, summary, output, caption="", y_scale="linear"):
    """Entropy against ln(kept dimension) with the fitted slope annotated."""
    cfg_hash = check_hashes(tables, summary)
    t = tables[0]
    x = np.array(t.floats("ln_dim"))
    y = np.array(t.floats("entropy_nats"))
    xc = x - x.mean()
    slope = float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(x, y, "s-", ms=5, label="entropy")
    ax.plot(x, y.mean() + slope * xc, "--", color="k", label=f"slope {slope:.2f}")
    ax.plot(x, x, ":", color="gray", label="max-entropy bound")
    ax.set_yscale(y_scale)
    ax.set_xlabel("ln(kept dimension)")
    ax.set_ylabel("entropy (nats)")
    ax.legend(frameon=False, fontsize=8)
    if caption:
        ax.set_title(caption, fontsize=9)
    _stamp(fig, cfg_hash, _seed_of(summary))
    fig.tight_layout()
    return _save(fig, output), {"slope": slope}


def render_loe(tables, summary, output, caption="", y_scale="linear"):
    cfg_hash = check_hashes(tables, summary)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for t in tables:
        ts = [int(r["t"]) for r in t.rows]
        ax.plot(ts, t.floats("entropy_nats"), "o-", ms=4)
    ax.set_yscale(y_scale)
    ax.set_xlabel("time steps")
    ax.set_ylabel("operator entanglement (nats)")
    if caption:
        ax.set_title(caption, fontsize=9)
    _stamp(fig, cfg_hash, _seed_of(summary))
    fig.tight_layout()
    return _save(fig, output), {}


def render_bff_depth(tables, summaries, output, caption="", y_scale="linear"):
    """Corrected fidelity per correction depth; one artifact pair per bar
    (each bar keeps its own config hash, all stamped)."""
    depths, zetas, hashes = [], [], []
    for t, s in zip(tables, summaries):
        check_hashes([t], s)
        depths.append(int(t.rows[0]["depth"]))
        zetas.append(float(t.rows[0]["zeta"]))
        hashes.append(t.config_hash[:8])
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.bar([str(d) for d in depths], zetas, color="#5878a3")
    ax.axhline(1.0, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("correction depth")
    ax.set_ylabel("optimized fidelity")
    ax.set_ylim(0, 1.05)
    if caption:
        ax.set_title(caption, fontsize=9)
    _stamp(fig, "+".join(hashes), None)
    fig.tight_layout()
    return _save(fig, output), {"depths": depths, "zetas": zetas}


def render_typicality(tables, summary, output, caption="", y_scale="linear"):
    """Entropy-deficit histogram with the recomputed threshold/tail markers."""
    cfg_hash = check_hashes(tables, summary)
    t = tables[0]
    deficits = np.array(t.floats("deficit_nats"))
    if summary is None:
        raise ArtifactError("typicality figure needs the run summary for parameters")
    params = summary["config"]["params"]
    d_s, d_e, k = params.get("d_s", 2), params["d_e"], params["k"]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.hist(deficits, bins=24, color="#77a377", alpha=0.85)
    markers = {}
    for delta in params["deltas"]:
        j = reference_deficit_threshold(d_s, d_e, k, delta)
        g = reference_tail_probability(d_s, d_e, k, delta)
        markers[f"{delta:g}"] = {"threshold": j, "tail_probability": g}
        ax.axvline(j, color="k", ls="--", lw=1)
        ax.text(j, ax.get_ylim()[1] * 0.9, f"J({delta})\nG={g:.2g}",
                fontsize=6, ha="left")
    ax.set_yscale(y_scale)
    ax.set_xlabel("entropy deficit (nats)")
    ax.set_ylabel("samples")
    if caption:
        ax.set_title(caption, fontsize=9)
    _stamp(fig, cfg_hash, _seed_of(summary))
    fig.tight_layout()
    return _save(fig, output), {"markers": markers}


KINDS = {
    "echo": render_echo,
    "scaling": render_scaling,
    "loe": render_loe,
    "bff_depth": render_bff_depth,
    "typicality": render_typicality,
}


def render(figure_spec: dict):
    """Dispatch on the FigureSpec dict; returns (paths, extras)."""
    kind = figure_spec.get("kind")
    if kind not in KINDS:
        raise ArtifactError(f"unknown figure kind {kind!r}")
    tables = [read_table(p) for p in figure_spec["inputs"]]
    axes = figure_spec.get("axes", {})
    y_scale = axes.get("y_scale", "log" if kind == "echo" else "linear")
    caption = figure_spec.get("caption", "")
    output = figure_spec["output"]
    if kind == "bff_depth":
        summaries = [read_summary(p) for p in figure_spec.get("summaries", [])]
        if len(summaries) != len(tables):
            raise ArtifactError("bff_depth needs one summary per input table")
        return render_bff_depth(tables, summaries, output, caption, y_scale)
    summary = (
        read_summary(figure_spec["summary"]) if figure_spec.get("summary") else None
    )
    return KINDS[kind](tables, summary, output, caption, y_scale)
