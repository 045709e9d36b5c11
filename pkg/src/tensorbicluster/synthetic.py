"""Planted-bicluster tensor generation, recovery scoring, and signal sweeps.

The signal tensor is a sum of q rank-1 blocks ``sigma_r * (u_r x w_r x v_r)``
with disjoint planted index supports.  Two noise regimes are supported:
Model I keeps unit-variance noise everywhere; Model II shrinks the variance
inside the planted rectangle to ``max(0, 1 - sigma1^2/(m k^2))``, which
equalizes expected trajectory lengths inside and outside at low SNR.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from .bicluster import (
    BiclusterSet,
    multiple_biclusters,
    recursive_biclusters,
    single_biclusters,
)
from .tensor import IndexSet, Tensor3, atomic_write_text

__all__ = [
    "GroundTruth",
    "SweepPoint",
    "SyntheticSpec",
    "add_noise",
    "build_signal",
    "generate",
    "load_truth",
    "noise_sigma",
    "recovery_rate",
    "save_truth",
    "sweep_sigma",
    "write_sweep_csv",
]

NOISE_MODELS = ("I", "II", "none")

_SEED_MASK = (1 << 64) - 1


def _generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator; ``stream`` separates signal from noise draws."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & _SEED_MASK, stream])))


def _standard_normal(rng: np.random.Generator, count: int) -> np.ndarray:
    """Box-Muller normals from uniform draws, in a fixed order."""
    u1 = rng.random(count)
    u2 = rng.random(count)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generative parameters for a planted-bicluster tensor.

    ``sigmas`` must be non-increasing with one entry per bicluster; zero
    entries are allowed so sweeps can include a no-signal point.  ``random_v``
    swaps the default constant time profile for a seeded random unit vector
    (all biclusters share the same profile either way).
    """

    n1: int
    n2: int
    m: int
    q: int
    k: int
    sigmas: tuple[float, ...]
    noise_model: str = "II"
    seed: int = 0
    random_v: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if min(self.n1, self.n2, self.m) < 1:
            raise ValueError("dimensions n1, n2, m must all be >= 1")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.q * self.k > min(self.n1, self.n2):
            raise ValueError(
                f"q*k = {self.q * self.k} exceeds min(n1, n2) = {min(self.n1, self.n2)}; "
                "disjoint planted sets must fit"
            )
        if len(self.sigmas) != self.q:
            raise ValueError(f"expected {self.q} signal strengths, got {len(self.sigmas)}")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("signal strengths must be non-negative")
        if any(a < b for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise ValueError("signal strengths must be non-increasing")
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"noise_model must be one of {NOISE_MODELS}, got {self.noise_model!r}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Planted index sets and factor vectors; ``sigma_z`` is the realized
    inside-block noise std-dev (None until noise is drawn, and None for truths
    loaded from disk, which carry only the index sets)."""

    row_sets: tuple[IndexSet, ...]
    col_sets: tuple[IndexSet, ...]
    u_vectors: tuple[np.ndarray, ...] | None
    w_vectors: tuple[np.ndarray, ...] | None
    v_vectors: tuple[np.ndarray, ...] | None
    sigma_z: float | None = None

    @property
    def q(self) -> int:
        return len(self.row_sets)

    @property
    def k(self) -> int:
        return len(self.row_sets[0])


def _support_vector(support: IndexSet, size: int) -> np.ndarray:
    vec = np.zeros(size)
    vec[support.to_array()] = 1.0 / np.sqrt(len(support))
    vec.flags.writeable = False
    return vec


def build_signal(spec: SyntheticSpec) -> tuple[Tensor3, GroundTruth]:
    """Draw disjoint planted index sets and assemble the noise-free signal.

    Support vectors are uniform ``1/sqrt(k)`` over their index sets; the
    shared time profile is the constant unit vector (or a seeded random unit
    vector with ``random_v``).
    """
    rng = _generator(spec.seed, 0)
    row_pick = rng.permutation(spec.n1)[: spec.q * spec.k]
    col_pick = rng.permutation(spec.n2)[: spec.q * spec.k]
    row_sets = tuple(
        IndexSet.of(row_pick[i * spec.k : (i + 1) * spec.k], spec.n1) for i in range(spec.q)
    )
    col_sets = tuple(
        IndexSet.of(col_pick[i * spec.k : (i + 1) * spec.k], spec.n2) for i in range(spec.q)
    )

    if spec.random_v:
        profile = _standard_normal(rng, spec.m)
        norm = float(np.linalg.norm(profile))
        if norm == 0.0:
            profile = np.full(spec.m, 1.0)
            norm = float(np.linalg.norm(profile))
        profile = profile / norm
    else:
        profile = np.full(spec.m, 1.0 / np.sqrt(spec.m))
    profile.flags.writeable = False

    u_vectors = tuple(_support_vector(rs, spec.n1) for rs in row_sets)
    w_vectors = tuple(_support_vector(cs, spec.n2) for cs in col_sets)

    signal = np.zeros((spec.n1, spec.n2, spec.m))
    for sigma, u, w in zip(spec.sigmas, u_vectors, w_vectors):
        signal += sigma * np.einsum("i,j,t->ijt", u, w, profile)

    truth = GroundTruth(
        row_sets=row_sets,
        col_sets=col_sets,
        u_vectors=u_vectors,
        w_vectors=w_vectors,
        v_vectors=tuple(profile for _ in range(spec.q)),
        sigma_z=None,
    )
    return Tensor3(signal), truth


def noise_sigma(model: str, sigma1: float, m: int, k: int) -> float:
    """Inside-block noise std-dev for the given model."""
    if model not in ("I", "II"):
        raise ValueError(f"noise model must be 'I' or 'II', got {model!r}")
    if sigma1 < 0:
        raise ValueError(f"sigma1 must be >= 0, got {sigma1}")
    if m < 1 or k < 1:
        raise ValueError("m and k must be >= 1")
    if model == "I":
        return 1.0
    return float(np.sqrt(max(0.0, 1.0 - sigma1**2 / (m * k * k))))


def _union_all(sets: tuple[IndexSet, ...]) -> IndexSet:
    out = sets[0]
    for s in sets[1:]:
        out = out.union(s)
    return out


def add_noise(x: Tensor3, truth: GroundTruth, model: str, sigma1: float, seed: int) -> Tensor3:
    """Add independent Gaussian noise: std 1 outside the planted rectangle,
    ``noise_sigma(model, sigma1, m, k)`` inside the union rectangle of all
    planted row sets crossed with all planted column sets.

    Normals are drawn in row-major entry order, so a seed pins the tensor.
    """
    sz = noise_sigma(model, sigma1, x.m, truth.k)
    rng = _generator(seed, 1)
    noise = _standard_normal(rng, x.n1 * x.n2 * x.m).reshape(x.shape)

    rows_union = _union_all(truth.row_sets)
    cols_union = _union_all(truth.col_sets)
    scale = np.ones((x.n1, x.n2))
    scale[np.ix_(rows_union.to_array(), cols_union.to_array())] = sz
    return Tensor3(x.data + noise * scale[:, :, None])


def generate(spec: SyntheticSpec) -> tuple[Tensor3, GroundTruth]:
    """Signal plus noise per the spec; ``noise_model='none'`` returns the pure
    signal with ``sigma_z = 0``."""
    x, truth = build_signal(spec)
    if spec.noise_model == "none":
        return x, replace(truth, sigma_z=0.0)
    t = add_noise(x, truth, spec.noise_model, spec.sigmas[0], spec.seed)
    sz = noise_sigma(spec.noise_model, spec.sigmas[0], spec.m, spec.k)
    return t, replace(truth, sigma_z=sz)


def recovery_rate(found: BiclusterSet, truth: GroundTruth, k: int) -> float:
    """Fraction of planted indices recovered, in [0, 1].

    Sums row- and column-set overlaps over the best pairing of found
    biclusters to planted ones and divides by ``2 q k``: 0 when nothing was
    found, 1 when every planted index was.
    """
    q = truth.q
    if len(found.biclusters) != q:
        raise ValueError(f"found {len(found.biclusters)} biclusters but truth has {q}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    for b in found.biclusters:
        if len(b.rows) != k or len(b.cols) != k:
            raise ValueError("recovery_rate requires |rows| = |cols| = k for every found bicluster")

    best = 0
    for perm in itertools.permutations(range(q)):
        total = 0
        for i, p in enumerate(perm):
            b = found.biclusters[p]
            total += len(b.rows.intersection(truth.row_sets[i]))
            total += len(b.cols.intersection(truth.col_sets[i]))
        best = max(best, total)
    return best / (2.0 * q * k)


@dataclass(frozen=True)
class SweepPoint:
    sigma1: float
    mean_recovery: float
    std_recovery: float
    reps: int


def _derived_sigmas(sigma1: float, q: int) -> tuple[float, ...]:
    # sigma_2 = 2 sigma_1 / 3; the same 2/3 decay continues for q > 2.
    return tuple(sigma1 * (2.0 / 3.0) ** r for r in range(q))


def _child_seed(base_seed: int, sigma_index: int, rep: int) -> int:
    ss = np.random.SeedSequence([base_seed & _SEED_MASK, sigma_index, rep])
    return int(ss.generate_state(1, np.uint64)[0])


def sweep_sigma(
    base_spec: SyntheticSpec,
    sigma1_grid,
    repetitions: int,
    method: str,
) -> list[SweepPoint]:
    """Mean recovery rate per signal strength.

    For each sigma1 on the grid, generates ``repetitions`` tensors with
    distinct seeds derived from ``base_spec.seed``, solves with ``method``
    (single, recursive, or multiple), and averages the recovery rate.
    Weaker biclusters get sigma_r = sigma1 * (2/3)^(r-1).
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    grid = [float(s) for s in sigma1_grid]
    if not grid:
        raise ValueError("sigma1 grid must be non-empty")
    if method not in ("single", "recursive", "multiple"):
        raise ValueError(f"sweep method must be single, recursive, or multiple, got {method!r}")
    if method == "single" and base_spec.q != 1:
        raise ValueError("the single method scores only q=1 specs")

    ks = [(base_spec.k, base_spec.k)] * base_spec.q
    points = []
    for si, sigma1 in enumerate(grid):
        rates = []
        for rep in range(repetitions):
            spec = replace(
                base_spec,
                sigmas=_derived_sigmas(sigma1, base_spec.q),
                seed=_child_seed(base_spec.seed, si, rep),
            )
            t, truth = generate(spec)
            if method == "single":
                found = single_biclusters(t, base_spec.k, base_spec.k)
            elif method == "recursive":
                found = recursive_biclusters(t, ks)
            else:
                found = multiple_biclusters(t, ks)
            rates.append(recovery_rate(found, truth, base_spec.k))
        arr = np.asarray(rates)
        points.append(
            SweepPoint(
                sigma1=sigma1,
                mean_recovery=float(arr.mean()),
                std_recovery=float(arr.std()),
                reps=repetitions,
            )
        )
    return points


def write_sweep_csv(path, points: list[SweepPoint]):
    lines = ["sigma1,mean_recovery,std_recovery,reps"]
    for p in points:
        lines.append(f"{p.sigma1!r},{p.mean_recovery!r},{p.std_recovery!r},{p.reps}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_truth(path, truth: GroundTruth, spec: SyntheticSpec):
    """Persist the planted sets and generation parameters as JSON."""
    doc = {
        "n1": spec.n1,
        "n2": spec.n2,
        "m": spec.m,
        "q": spec.q,
        "k": spec.k,
        "noise_model": spec.noise_model,
        "seed": spec.seed,
        "random_v": spec.random_v,
        "sigmas": list(spec.sigmas),
        "sigma_z": truth.sigma_z,
        "row_sets": [list(rs) for rs in truth.row_sets],
        "col_sets": [list(cs) for cs in truth.col_sets],
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def load_truth(path) -> tuple[GroundTruth, SyntheticSpec]:
    """Load a truth file; the returned GroundTruth carries index sets only."""
    with open(path) as handle:
        doc = json.load(handle)
    spec = SyntheticSpec(
        n1=int(doc["n1"]),
        n2=int(doc["n2"]),
        m=int(doc["m"]),
        q=int(doc["q"]),
        k=int(doc["k"]),
        sigmas=tuple(doc["sigmas"]),
        noise_model=doc["noise_model"],
        seed=int(doc["seed"]),
        random_v=bool(doc.get("random_v", False)),
    )
    truth = GroundTruth(
        row_sets=tuple(IndexSet.of(rs, spec.n1) for rs in doc["row_sets"]),
        col_sets=tuple(IndexSet.of(cs, spec.n2) for cs in doc["col_sets"]),
        u_vectors=None,
        w_vectors=None,
        v_vectors=None,
        sigma_z=None if doc["sigma_z"] is None else float(doc["sigma_z"]),
    )
    return truth, spec
