"""Pushforward distributions and the perturbation-sweep experiment."""

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import transport
from ..exceptions import ConfigInvalid
from .sampling import DistributionSpec, Family, PerturbationFamily, Role, sample_shell, stream
from .statistics import Statistic, StatKind, apply_with_redraw

SCHEMA_VERSION = 1
DEFAULT_BOOTSTRAP = 20
RAW_SIZE_CAP = 2000
SE_MULTIPLIER = 3.0
REPORT_EPS = 1e-9
AUTO_PILOT = 5000


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def pushforward_values(stat, spec, N, M, seed, role, n_jobs=1):
    """Statistic values on ``M`` independent size-``N`` datasets, stacked.

    Repetition ``r`` uses the stream ``(seed, role, r)``. Returns
    ``(values, redraws, rejected)``.
    """

    def one(r):
        rng = stream(seed, role, r)
        rejected = 0

        def draw():
            nonlocal rejected
            X, k = sample_shell(spec, N, rng)
            rejected += k
            return X

        value, redraws = apply_with_redraw(stat, draw)
        return value, redraws, rejected

    out = _map(one, range(M), n_jobs)
    values = np.stack([o[0] for o in out])
    return values, sum(o[1] for o in out), sum(o[2] for o in out)


def pushforward(config, spec, rng_role=Role.P_DATA):
    """Empirical law of the configured statistic under ``spec``."""
    values, _, _ = pushforward_values(
        config.statistic, spec, config.N, config.M, config.seed, rng_role, config.n_jobs
    )
    return transport.EmpiricalMeasure.from_array(values)


def bootstrap_se(stat, A, B, n, seed, tag, n_boot=DEFAULT_BOOTSTRAP):
    """Bootstrap standard error of the distance between stacked samples ``A`` and ``B``."""
    if n_boot < 2:
        return 0.0
    rng = stream(seed, Role.BOOTSTRAP, *tag)
    M = len(A)
    vals = []
    for _ in range(n_boot):
        ia = rng.integers(0, M, M)
        ib = rng.integers(0, M, M)
        vals.append(stat.distance(A[ia], B[ib], n))
    return float(np.std(vals, ddof=1))


def raw_samples(spec, size, seed, role):
    X, _ = sample_shell(spec, size, stream(seed, role))
    return X


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    N: int
    M: int
    seed: int
    statistic: Statistic
    family: PerturbationFamily
    raw_size: int = None
    bootstrap: int = DEFAULT_BOOTSTRAP
    n_jobs: int = 1
    baseline: bool = True

    def __post_init__(self):
        for name, low in (("n", 1), ("N", 2), ("M", 2)):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < low:
                raise ConfigInvalid(f"must be an integer >= {low}", f"/{name}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) or not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("must be an integer in [0, 2^64)", "/seed")
        if self.family.base.n != self.n:
            raise ConfigInvalid(f"family dimension {self.family.base.n} differs from n={self.n}", "/family")
        raw = self.raw_size if self.raw_size is not None else min(10 * self.N, RAW_SIZE_CAP)
        if not isinstance(raw, (int, np.integer)) or raw < 2:
            raise ConfigInvalid("must be an integer >= 2", "/raw_size")
        object.__setattr__(self, "raw_size", int(raw))
        if not isinstance(self.n_jobs, (int, np.integer)) or self.n_jobs < 1:
            raise ConfigInvalid("must be an integer >= 1", "/n_jobs")
        if not isinstance(self.bootstrap, (int, np.integer)) or self.bootstrap < 0:
            raise ConfigInvalid("must be a non-negative integer", "/bootstrap")

    @classmethod
    def from_dict(cls, d):
        """Build from a JSON-style mapping; errors carry a JSON pointer."""
        if not isinstance(d, dict):
            raise ConfigInvalid("configuration must be a JSON object", "")
        known = {"n", "N", "M", "seed", "statistic", "family", "alphas", "raw_size", "bootstrap", "n_jobs", "baseline"}
        for key in d:
            if key not in known:
                raise ConfigInvalid(f"unknown key {key!r}", f"/{key}")
        for key in ("n", "N", "M", "seed", "statistic", "family"):
            if key not in d:
                raise ConfigInvalid("required key missing", f"/{key}")
        n = d["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigInvalid("must be an integer >= 1", "/n")
        seed = d["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
            raise ConfigInvalid("must be an integer in [0, 2^64)", "/seed")
        alphas = d.get("alphas")
        if alphas is not None and (
            not isinstance(alphas, list) or not alphas or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in alphas)
        ):
            raise ConfigInvalid("must be a non-empty list of numbers", "/alphas")
        family = _family_from_dict(d["family"], n, seed, alphas)
        stat = _statistic_from_dict(d["statistic"], family, seed)
        if stat.kind is StatKind.PORTFOLIO and family.base.shell is None:
            family = PerturbationFamily(
                family.base.with_shell(stat.C1, stat.C2), family.mu_dir, family.sigma_dir, family.alphas
            )
        return cls(
            n=n,
            N=d["N"],
            M=d["M"],
            seed=seed,
            statistic=stat,
            family=family,
            raw_size=d.get("raw_size"),
            bootstrap=d.get("bootstrap", DEFAULT_BOOTSTRAP),
            n_jobs=d.get("n_jobs", 1),
            baseline=d.get("baseline", True),
        )

    def to_dict(self):
        s = self.statistic
        stat = {"kind": s.kind.value, "centered": s.centered}
        for key in ("lam", "kappa", "z", "C1", "C2"):
            if getattr(s, key) is not None:
                stat[key] = getattr(s, key)
        b = self.family.base
        fam = {
            "kind": b.family.value,
            "mu": b.mu.tolist(),
            "sigma": b.sigma.tolist(),
            "mu_dir": self.family.mu_dir.tolist(),
            "sigma_dir": self.family.sigma_dir.tolist(),
        }
        if b.shell is not None:
            fam["shell"] = list(b.shell)
        return {
            "n": self.n,
            "N": self.N,
            "M": self.M,
            "seed": self.seed,
            "statistic": stat,
            "family": fam,
            "alphas": list(self.family.alphas),
            "raw_size": self.raw_size,
            "bootstrap": self.bootstrap,
            "n_jobs": self.n_jobs,
            "baseline": self.baseline,
        }


def _family_from_dict(f, n, seed, alphas):
    if not isinstance(f, dict):
        raise ConfigInvalid("must be an object", "/family")
    kind = f.get("kind")
    if kind not in (Family.GAUSSIAN.value, Family.LOGNORMAL.value):
        raise ConfigInvalid("must be 'gaussian' or 'lognormal'", "/family/kind")
    shell = f.get("shell")
    if shell is not None and (not isinstance(shell, list) or len(shell) != 2):
        raise ConfigInvalid("must be a [C1, C2] pair", "/family/shell")
    try:
        if f.get("parameters", "explicit") == "random":
            return PerturbationFamily.random(n, kind, seed, alphas, shell=shell)
        for key in ("mu", "sigma", "mu_dir", "sigma_dir"):
            if key not in f:
                raise ConfigInvalid("required key missing (or set parameters to 'random')", f"/family/{key}")
        base = DistributionSpec(kind, f["mu"], f["sigma"], shell=shell)
        kwargs = {} if alphas is None else {"alphas": tuple(alphas)}
        return PerturbationFamily(base, f["mu_dir"], f["sigma_dir"], **kwargs)
    except ConfigInvalid:
        raise
    except Exception as exc:  # noqa: BLE001 - reported with its location
        raise ConfigInvalid(str(exc), "/family") from exc


def _statistic_from_dict(s, family, seed):
    if not isinstance(s, dict):
        raise ConfigInvalid("must be an object", "/statistic")
    kind = s.get("kind")
    if kind not in {k.value for k in StatKind}:
        raise ConfigInvalid(f"must be one of {[k.value for k in StatKind]}", "/statistic/kind")
    args = {k: s[k] for k in ("centered", "lam", "kappa", "z", "C1", "C2") if k in s}
    if kind == StatKind.PORTFOLIO.value:
        if s.get("C1", "auto") == "auto" or s.get("C2", "auto") == "auto":
            c1, c2 = auto_shell(family, seed)
            args.setdefault("C1", c1)
            args.setdefault("C2", c2)
            if args["C1"] == "auto":
                args["C1"] = c1
            if args["C2"] == "auto":
                args["C2"] = c2
        if s.get("z", "auto") == "auto":
            args["z"] = auto_target(family.base.with_shell(args["C1"], args["C2"]), family, seed)
    return Statistic(kind, **args)


def auto_shell(family, seed, reject=0.01):
    """Shell constants rejecting about ``reject`` of pilot draws at each end."""
    X = np.vstack([raw_samples(family.at(a), AUTO_PILOT, seed, Role.PILOT) for a in (family.alphas[0], family.alphas[-1])])
    norms = np.linalg.norm(X, axis=1)
    centered = np.sqrt(np.maximum(norms ** 2 - X.sum(1) ** 2 / X.shape[1], 0.0))
    c2 = float(np.quantile(norms, 1.0 - reject))
    c1 = float(min(np.quantile(centered, reject), 0.5 * c2))
    return c1, c2


def auto_target(base, family, seed):
    """A target return inside every pilot mean's attainable range over the alpha grid."""
    lo, hi = -math.inf, math.inf
    for a in family.alphas:
        spec = DistributionSpec(base.family, base.mu + a * family.mu_dir, base.sigma + a * family.sigma_dir, shell=base.shell)
        m = raw_samples(spec, AUTO_PILOT, seed, Role.PILOT).mean(0)
        lo, hi = max(lo, float(m.min())), min(hi, float(m.max()))
    if not lo < hi or hi <= 0:
        raise ConfigInvalid("no positive target return is attainable across the alpha grid", "/statistic/z")
    return 0.5 * (max(lo, 0.0) + hi)


@dataclass
class StabilityReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    COLUMNS = (
        "alpha",
        "coordinate",
        "d1_proxy",
        "dbar2",
        "w2_gaussian",
        "d2_upper",
        "m_p",
        "m_q",
        "constant",
        "dK_hat",
        "se",
        "bound_rhs",
        "margin",
        "pass",
        "redraws",
        "rejected",
    )

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in self.COLUMNS])
        return buf.getvalue()

    def to_json(self):
        payload = {
            "precistab_schema": SCHEMA_VERSION,
            "metadata": _jsonable(self.metadata),
            "rows": [_jsonable(r) for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)

    def column(self, name, coordinate="all"):
        return np.array([r[name] for r in self.rows if r["coordinate"] == coordinate])

    @property
    def all_pass(self):
        return all(r["pass"] for r in self.rows)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def bound_row(stat, A, B, Xp, Xq, n, seed, tag, n_boot):
    """Distances, bound and pass flag for one pair of pushforward samples."""
    m_p = float(np.linalg.norm(Xp, axis=1).mean())
    m_q = float(np.linalg.norm(Xq, axis=1).mean())
    d2_up = transport.fm2_upper(Xp, Xq)
    const = stat.constant(m_p, m_q, n)
    lhs = stat.distance(A, B, n)
    se = bootstrap_se(stat, A, B, n, seed, tag, n_boot)
    rhs = const * d2_up
    margin = rhs - lhs
    return {
        "d2_upper": d2_up,
        "m_p": m_p,
        "m_q": m_q,
        "constant": const,
        "dK_hat": lhs,
        "se": se,
        "bound_rhs": rhs,
        "margin": margin,
        "pass": bool(margin >= -(REPORT_EPS + SE_MULTIPLIER * se)),
    }


def run_stability_experiment(config):
    """Sweep the perturbation family and compare pushforward laws with ``P``.

    Repetition ``r`` under ``Q_alpha`` uses the same stream for every alpha
    (common random numbers), so the curves are smooth in alpha; ``P`` and
    ``Q_alpha`` streams stay independent.
    """
    t0 = time.perf_counter()
    stat, fam, n = config.statistic, config.family, config.n
    P = fam.at(0.0)
    A, redraws_p, rej_p = pushforward_values(stat, P, config.N, config.M, config.seed, Role.P_DATA, config.n_jobs)
    Xp = raw_samples(P, config.raw_size, config.seed, Role.P_RAW)
    coords = stat.coordinates(n)
    meta = {"config": config.to_dict(), "redraws_p": redraws_p, "rejected_p": rej_p}
    if config.baseline:
        B0, _, _ = pushforward_values(stat, P, config.N, config.M, config.seed, Role.BASELINE, config.n_jobs)
        meta["baseline"] = {c: stat.distance(stat.select(A, c, n), stat.select(B0, c, n), n) for c in coords}
    rows = []
    for k, alpha in enumerate(fam.alphas):
        Q = fam.at(alpha)
        B, redraws, rej = pushforward_values(stat, Q, config.N, config.M, config.seed, Role.Q_DATA, config.n_jobs)
        Xq = raw_samples(Q, config.raw_size, config.seed, Role.Q_RAW)
        d1 = transport.w1_assignment(Xp, Xq)
        dbar = transport.dbar2_mc(Xp, Xq)
        if P.family is Family.GAUSSIAN:
            w2 = transport.gaussian_w2(P.mu, P.sigma, Q.mu, Q.sigma)
        else:
            w2 = float("nan")
        for j, c in enumerate(coords):
            row = {"alpha": float(alpha), "coordinate": c, "d1_proxy": d1, "dbar2": dbar, "w2_gaussian": w2}
            row.update(
                bound_row(stat, stat.select(A, c, n), stat.select(B, c, n), Xp, Xq, n, config.seed, (k, j), config.bootstrap)
            )
            row["redraws"] = redraws
            row["rejected"] = rej
            rows.append(row)
    meta["wall_time_s"] = time.perf_counter() - t0
    return StabilityReport(rows, meta)
