"""Deterministic synthetic actigraphy cohort with correlated disorder labels.

Each subject gets a circadian base signal (a half-sine of daytime activity
between wake and bedtime, a near-quiet sleep trough, additive noise,
weekend damping) quantized to integer counts. Disorder-positive subjects
receive archetype perturbations: global amplitude scaling, random
sleep-window activity bursts (fragmented nights), and afternoon activity
suppression. Labels are drawn from a latent Gaussian copula whose
correlations are solved numerically so the *discretized* labels hit the
requested pairwise correlations.

Generation is reproducible bit-for-bit: the label block and every
subject's signal use independent substreams keyed by (seed, subject), so
parallel generation produces exactly the single-threaded output.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .core import TASK_CLASSES, TASK_NAMES, ActivitySequence, LabelRecord
from .exceptions import InfeasibleCorrelation, InsufficientData
from .ingest import Dataset, Provenance, _vocab_from_raw

SLEEP_BURST_BASELINE = 0.5   # everyone fragments a little
MIN_CLASS_PREVALENCE = 0.10
BALANCE_CHECK_MIN_N = 500


@dataclass
class ArchetypeSpec:
    """How a positive label perturbs the activity signal (at intensity 1)."""

    amplitude_scale: float = 1.0       # multiplies wake amplitude (<1 weakens)
    fragmentation_rate: float = 0.0    # extra night-time bursts per night
    daytime_suppression: float = 0.0   # fraction of afternoon activity removed
    affected_day_rate: float = 1.0     # fraction of days the perturbation hits
    rest_day_shift: float = 0.0        # probability the weekend trough moves
                                       # onto random weekdays (histogram kept)


def default_archetypes() -> dict:
    return {
        "apnea": ArchetypeSpec(amplitude_scale=0.85, fragmentation_rate=6.0),
        "diabetes": ArchetypeSpec(amplitude_scale=0.8, daytime_suppression=0.35),
        "hypertension": ArchetypeSpec(amplitude_scale=0.9, fragmentation_rate=3.0,
                                      daytime_suppression=0.15),
        "insomnia": ArchetypeSpec(fragmentation_rate=8.0, amplitude_scale=0.95),
    }


@dataclass
class SynthConfig:
    n_subjects: int
    days: int = 7
    sampling_period_s: int = 30
    archetypes: dict = field(default_factory=default_archetypes)
    comorbidity: np.ndarray = field(default_factory=lambda: np.eye(4))
    labeled_fraction: float = 1.0
    seed: int = 0
    base_amplitude: float = 2000.0
    amplitude_jitter: float = 0.2      # per-subject amplitude factor U(1-j, 1+j)
    phase_jitter_h: float = 0.75
    noise_std: float = 150.0
    night_noise_std: float = 25.0
    wake_start_h: float = 7.0
    wake_end_h: float = 23.0
    weekend_factor: float = 0.85
    positive_rate: float = 0.25        # prevalence of the binary tasks
    missing_rate: float = 0.0
    quantize_max: int = 5000

    def __post_init__(self):
        self.comorbidity = np.asarray(self.comorbidity, dtype=np.float64)

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        doc = json.loads(text)
        if "archetypes" in doc:
            doc["archetypes"] = {
                task: ArchetypeSpec(**spec) for task, spec in doc["archetypes"].items()
            }
        return cls(**doc)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["comorbidity"] = self.comorbidity.tolist()
        return json.dumps(doc, indent=2, sort_keys=True)


# --- copula -----------------------------------------------------------------

def bivariate_normal_cdf(h: float, k: float, rho: float) -> float:
    """P(X <= h, Y <= k) for standard bivariate normals with correlation rho.

    Uses the identity d/dr Phi2 = bivariate density, integrating the
    density in r from 0 (independence) to rho with deterministic adaptive
    quadrature.
    """
    if np.isinf(h) or np.isinf(k):
        if h == -np.inf or k == -np.inf:
            return 0.0
        if h == np.inf:
            return float(norm.cdf(k))
        return float(norm.cdf(h))

    def density(r):
        om = 1.0 - r * r
        return np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * om)) / (2.0 * np.pi * np.sqrt(om))

    tail, _ = quad(density, 0.0, rho, epsabs=1e-12, epsrel=1e-10)
    return float(norm.cdf(h) * norm.cdf(k) + tail)


def _thresholds(task: str, positive_rate: float) -> np.ndarray:
    """Latent cut points; K classes need K-1 interior thresholds."""
    if TASK_CLASSES[task] == 2:
        return np.array([norm.ppf(1.0 - positive_rate)])
    return norm.ppf([1.0 / 3.0, 2.0 / 3.0])


def _ordinal_moments(thresholds: np.ndarray) -> tuple:
    edges = np.concatenate([[-np.inf], thresholds, [np.inf]])
    probs = np.diff(norm.cdf(edges))
    values = np.arange(len(probs), dtype=np.float64)
    mean = float(probs @ values)
    var = float(probs @ (values - mean) ** 2)
    return edges, values, mean, var


def discretized_correlation(rho: float, th_a: np.ndarray, th_b: np.ndarray) -> float:
    """Pearson correlation of ordinal-coded labels under latent correlation rho."""
    edges_a, vals_a, mean_a, var_a = _ordinal_moments(th_a)
    edges_b, vals_b, mean_b, var_b = _ordinal_moments(th_b)
    exy = 0.0
    for i, va in enumerate(vals_a):
        if va == 0.0:
            continue
        for j, vb in enumerate(vals_b):
            if vb == 0.0:
                continue
            p = (bivariate_normal_cdf(edges_a[i + 1], edges_b[j + 1], rho)
                 - bivariate_normal_cdf(edges_a[i], edges_b[j + 1], rho)
                 - bivariate_normal_cdf(edges_a[i + 1], edges_b[j], rho)
                 + bivariate_normal_cdf(edges_a[i], edges_b[j], rho))
            exy += va * vb * p
    return (exy - mean_a * mean_b) / np.sqrt(var_a * var_b)


def solve_latent_correlation(target: float, th_a: np.ndarray, th_b: np.ndarray) -> float:
    """Invert :func:`discretized_correlation` for the latent rho.

    Targets beyond what any copula can produce for these margins are
    clamped to the attainable range with a warning.
    """
    if target == 0.0:
        return 0.0
    from scipy.optimize import brentq

    lo, hi = -0.9999, 0.9999
    f = lambda r: discretized_correlation(r, th_a, th_b) - target
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        attainable = (flo + target, fhi + target)
        warnings.warn(
            f"label correlation {target:+.3f} outside attainable "
            f"[{attainable[0]:+.3f}, {attainable[1]:+.3f}]; clamping"
        )
        return lo if flo > 0.0 else hi
    return float(brentq(f, lo, hi, xtol=1e-10))


def _latent_matrix(cfg: SynthConfig) -> np.ndarray:
    c = cfg.comorbidity
    if c.shape != (4, 4):
        raise ValueError("comorbidity matrix must be 4x4")
    if not np.allclose(c, c.T) or not np.allclose(np.diag(c), 1.0):
        raise ValueError("comorbidity matrix must be symmetric with unit diagonal")
    if np.any(np.abs(c) > 1.0):
        raise ValueError("comorbidity entries must lie in [-1, 1]")
    ths = [_thresholds(t, cfg.positive_rate) for t in TASK_NAMES]
    latent = np.eye(4)
    for i in range(4):
        for j in range(i + 1, 4):
            latent[i, j] = latent[j, i] = solve_latent_correlation(
                float(c[i, j]), ths[i], ths[j])
    eigvals = np.linalg.eigvalsh(latent)
    if eigvals.min() < 1e-10:
        warnings.warn("latent correlation matrix not positive definite; "
                      "repairing to the nearest correlation matrix")
        from statsmodels.stats.correlation_tools import corr_nearest

        latent = corr_nearest(latent, threshold=1e-8)
        latent = (latent + latent.T) / 2.0
        np.fill_diagonal(latent, 1.0)
        if (np.linalg.eigvalsh(latent).min() < -1e-10
                or np.any(np.abs(latent) > 1.0 + 1e-12)):
            raise InfeasibleCorrelation(
                "comorbidity matrix remains infeasible after nearest-matrix repair")
    return latent


def _draw_labels(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    latent = _latent_matrix(cfg)
    eigvals, eigvecs = np.linalg.eigh(latent)
    transform = eigvecs * np.sqrt(np.maximum(eigvals, 0.0))
    z = rng.standard_normal((cfg.n_subjects, 4)) @ transform.T
    labels = np.empty((cfg.n_subjects, 4), dtype=np.int64)
    for j, task in enumerate(TASK_NAMES):
        edges = _thresholds(task, cfg.positive_rate)
        labels[:, j] = np.searchsorted(edges, z[:, j])
    return labels


# --- signal -----------------------------------------------------------------

def _subject_signal(cfg: SynthConfig, intensities: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    per_day = 86400 // cfg.sampling_period_s
    n = cfg.days * per_day
    amp_factor = rng.uniform(1.0 - cfg.amplitude_jitter, 1.0 + cfg.amplitude_jitter)
    phase = rng.uniform(-cfg.phase_jitter_h, cfg.phase_jitter_h)

    # which calendar days each active disorder touches (all, by default)
    affected = {}
    for task, level in zip(TASK_NAMES, intensities):
        spec = cfg.archetypes[task]
        if level > 0.0 and spec.affected_day_rate < 1.0:
            affected[task] = rng.random(cfg.days) < spec.affected_day_rate
        else:
            affected[task] = np.ones(cfg.days, dtype=bool)

    # rest (weekend-damped) days, possibly displaced onto weekdays; the
    # displacement keeps the weekly symbol histogram while moving where
    # the quiet days fall
    rest = np.array([i % 7 in (5, 6) for i in range(cfg.days)])
    for task, level in zip(TASK_NAMES, intensities):
        spec = cfg.archetypes[task]
        if level > 0.0 and spec.rest_day_shift > 0.0:
            if rng.random() < spec.rest_day_shift * level:
                weekdays = np.flatnonzero(~rest)
                n_rest = int(rest.sum())
                if len(weekdays) and n_rest:
                    picks = rng.choice(weekdays, size=min(n_rest, len(weekdays)),
                                       replace=False)
                    rest = np.zeros(cfg.days, dtype=bool)
                    rest[picks] = True

    t = np.arange(n)
    hour = (t * cfg.sampling_period_s / 3600.0 + phase) % 24.0
    day = t // per_day
    wake_span = cfg.wake_end_h - cfg.wake_start_h
    wake_pos = (hour - cfg.wake_start_h) / wake_span
    awake = (wake_pos >= 0.0) & (wake_pos < 1.0)

    amplitude = np.full(n, cfg.base_amplitude * amp_factor)
    for task, level in zip(TASK_NAMES, intensities):
        if level > 0.0:
            spec = cfg.archetypes[task]
            hit = affected[task][day]
            amplitude[hit] *= 1.0 - level * (1.0 - spec.amplitude_scale)
    signal = np.where(awake, amplitude * np.sin(np.pi * np.clip(wake_pos, 0.0, 1.0)), 0.0)
    signal[rest[day]] *= cfg.weekend_factor

    afternoon = (hour >= 12.0) & (hour < 18.0)
    for task, level in zip(TASK_NAMES, intensities):
        if level > 0.0:
            spec = cfg.archetypes[task]
            if spec.daytime_suppression > 0.0:
                hit = afternoon & affected[task][day]
                signal[hit] *= 1.0 - level * spec.daytime_suppression

    noise = np.where(awake, rng.normal(0.0, cfg.noise_std, n),
                     np.abs(rng.normal(0.0, cfg.night_noise_std, n)))
    signal = signal + noise

    night = ~awake
    for i in range(cfg.days):
        rate = SLEEP_BURST_BASELINE + sum(
            level * cfg.archetypes[task].fragmentation_rate
            for task, level in zip(TASK_NAMES, intensities)
            if affected[task][i])
        night_idx = np.flatnonzero(night & (day == i))
        if not len(night_idx):
            continue
        n_bursts = rng.poisson(rate)
        if n_bursts:
            starts = rng.choice(night_idx, size=n_bursts)
            lengths = 1 + rng.geometric(0.3, size=n_bursts)
            heights = rng.uniform(0.3, 0.8, size=n_bursts) * cfg.base_amplitude
            for s, l, h in zip(starts, lengths, heights):
                signal[s:s + int(l)] += h

    counts = np.clip(np.rint(signal), 0, cfg.quantize_max).astype(np.int64)
    if cfg.missing_rate > 0.0:
        counts[rng.random(n) < cfg.missing_rate] = -1
    return counts


def _intensity(task: str, label: int) -> float:
    return label / (TASK_CLASSES[task] - 1)


def generate_cohort(cfg: SynthConfig, n_threads: int = 1) -> Dataset:
    """Generate sequences plus labels for ``labeled_fraction`` of subjects."""
    label_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,))))
    labels = _draw_labels(cfg, label_rng)
    n_labeled = int(round(cfg.labeled_fraction * cfg.n_subjects))
    labeled_subjects = set(label_rng.permutation(cfg.n_subjects)[:n_labeled].tolist())

    if cfg.n_subjects >= BALANCE_CHECK_MIN_N:
        for j, task in enumerate(TASK_NAMES):
            prev = np.bincount(labels[:, j], minlength=TASK_CLASSES[task]) / cfg.n_subjects
            if prev.min() < MIN_CLASS_PREVALENCE:
                warnings.warn(
                    f"{task}: class prevalence {prev.round(3).tolist()} below "
                    f"{MIN_CLASS_PREVALENCE:.0%}")

    width = len(str(cfg.n_subjects - 1))
    subject_ids = [f"s{i:0{width}d}" for i in range(cfg.n_subjects)]

    def make(i: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, i))))
        intensities = np.array([
            _intensity(task, int(labels[i, j])) for j, task in enumerate(TASK_NAMES)
        ])
        return _subject_signal(cfg, intensities, rng)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            raw = list(pool.map(make, range(cfg.n_subjects)))
    else:
        raw = [make(i) for i in range(cfg.n_subjects)]

    vocab = _vocab_from_raw(raw)
    sequences = tuple(
        ActivitySequence(sid, vocab.encode_array(values), cfg.sampling_period_s)
        for sid, values in zip(subject_ids, raw)
    )
    table = {
        subject_ids[i]: LabelRecord(subject_ids[i], **{
            task: int(labels[i, j]) for j, task in enumerate(TASK_NAMES)})
        for i in range(cfg.n_subjects) if i in labeled_subjects
    }
    digest_src = cfg.to_json()
    return Dataset(sequences, vocab, labels=table or None,
                   provenance=Provenance(("synthetic",), _config_digest(digest_src)))


def _config_digest(text: str) -> str:
    import hashlib

    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --- statistics --------------------------------------------------------------

@dataclass
class LabelCorrelation:
    matrix: np.ndarray            # 4x4 Pearson over ordinal codes
    degenerate: np.ndarray        # bool mask where a zero-variance column hit
    n_pairs: np.ndarray           # subjects contributing to each entry


def label_correlation(labels: dict) -> LabelCorrelation:
    """Pairwise Pearson correlation of labels over co-labeled subjects."""
    records = list(labels.values())
    full = [r for r in records if len(r.tasks_present()) == len(TASK_NAMES)]
    if len(full) < 2:
        raise InsufficientData("need at least two fully labeled subjects")
    matrix = np.eye(4)
    degenerate = np.zeros((4, 4), dtype=bool)
    n_pairs = np.zeros((4, 4), dtype=np.int64)
    for i, ti in enumerate(TASK_NAMES):
        for j, tj in enumerate(TASK_NAMES):
            if j < i:
                continue
            xs, ys = [], []
            for r in records:
                a, b = r.get(ti), r.get(tj)
                if a is not None and b is not None:
                    xs.append(a)
                    ys.append(b)
            n_pairs[i, j] = n_pairs[j, i] = len(xs)
            if i == j:
                continue
            if len(xs) < 2:
                raise InsufficientData(f"fewer than two subjects labeled for {ti}/{tj}")
            xs, ys = np.array(xs, float), np.array(ys, float)
            sx, sy = xs.std(), ys.std()
            if sx == 0.0 or sy == 0.0:
                matrix[i, j] = matrix[j, i] = 0.0
                degenerate[i, j] = degenerate[j, i] = True
            else:
                c = float(np.corrcoef(xs, ys)[0, 1])
                matrix[i, j] = matrix[j, i] = c
    return LabelCorrelation(matrix, degenerate, n_pairs)
