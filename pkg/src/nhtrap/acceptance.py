"""The acceptance suite: numbered checks with fixed thresholds.

Each check returns a :class:`CheckResult`.  Sections computed along the way
are kept on the :class:`Suite` so the invariance check can read their
residuals without recomputing them.  ``run_suite(only=...)`` filters by id
or tag; the command line ``verify`` and ``tests/test_acceptance.py`` are
thin wrappers around it.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import toy
from .dynamics import flow
from .errors import NumericalError
from .kerr import flow as kerr_flow
from .kerr.flow import hamilton_vector_field, radial_potential_root, trapped_set_solve
from .kerr.manifold import kerr_stable_manifold
from .kerr.metric import KerrDualMetric, KerrParams, kerr_inverse_components
from .kerr.perturbation import MetricPerturbation, characteristic_graph
from .torus import torus_unstable_manifold, torus_verify
from .transform import fit_decay_rate, unstable_manifold
from .weights import Weight

# run settings for the expensive cases
TOY = {"eps": 0.5, "tol": 1e-10, "t_range": (100.0, 200.0), "n_base": 9}
TORUS_DECAY = {"amplitude": 0.1, "profile": "constant", "eps": 0.4, "tol": 1e-10,
               "t_range": (100.0, 1e4), "n": 5, "n_base": 17}
KERR_DECAY = {"a": 0.5, "prograde": False, "amplitude": 0.1, "profile": "sin_r", "eps": 0.15,
              "tol": 1e-8, "t_range": (100.0, 1e4), "n": 10, "n_base": 9}
DECAY_ALPHAS = (0.5, 1.0, 2.0)


@dataclass
class CheckResult:
    id: str
    tags: tuple
    description: str
    passed: bool
    value: float
    threshold: float
    seconds: float
    detail: str = ""
    error: str = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"{status:<7}{self.id:<15}{self.description}: value={self.value:.3e} " \
               f"threshold={self.threshold:.1e} ({self.seconds:.1f} s)"
        if self.detail:
            text += f" [{self.detail}]"
        if self.error:
            text += f" error={self.error}"
        return text

    def as_dict(self):
        return {"id": self.id, "tags": list(self.tags), "description": self.description,
                "passed": self.passed, "value": self.value, "threshold": self.threshold,
                "seconds": self.seconds, "detail": self.detail, "error": self.error}


@dataclass
class Suite:
    """Shared state of one acceptance run."""

    seed: int = 0
    sections: dict = field(default_factory=dict)

    def keep(self, name, result):
        self.sections[name] = result
        return result


@dataclass(frozen=True)
class Check:
    id: str
    tags: tuple
    description: str
    threshold: float
    run: object
    max_seconds: float = None


# --------------------------------------------------------------------------
# individual checks; each returns (passed, value, detail)


def _toy_section(suite, name="toy", initial=None):
    weight = Weight.power_law(1.0)
    result = unstable_manifold(toy.toy_map(weight), toy.toy_stationary_data(), weight,
                               TOY["eps"], TOY["tol"], t_range=TOY["t_range"],
                               n_base=TOY["n_base"], initial=initial, seed=suite.seed)
    return suite.keep(name, result)


def check_toy_fixed_point(suite):
    result = _toy_section(suite)
    sec = result.section
    exact = toy.toy_fixed_point(sec.valid_t, Weight.power_law(1.0))
    err = float(np.abs(sec.valid_values[..., 0] - exact[:, None]).max())
    return err < 1e-8, err, f"{result.n_iter} iterations"


def check_schwarzschild_radius(suite):
    params = KerrParams(1.0, 0.0)
    trapped = trapped_set_solve(params)
    oracle = radial_potential_root(params, 1.0, trapped.point.xi_phi)
    err = abs(trapped.r - oracle)
    worst = max(trapped.residuals)
    return err < 1e-10 and worst < 1e-9, err, f"r={trapped.r:.12f}, residual={worst:.1e}"


def check_nu_min(suite):
    params = KerrParams(1.0, 0.0)
    trapped = trapped_set_solve(params)
    # looked up through the module so a test can inject a faulty version
    rates = kerr_flow.expansion_rates(params, trapped, "rho_squared")
    target = 6 * np.sqrt(3)
    rel = abs(rates.nu_min - target) / target
    ht_err = abs(rates.ht_over_sigma - 6.0)
    return rel < 1e-4 and ht_err < 1e-6, rel, \
        f"nu_min={rates.nu_min:.9f}, H t/sigma error={ht_err:.1e}"


def check_kerr_equatorial(suite):
    m, a = 1.0, 0.5
    trapped = trapped_set_solve(KerrParams(m, a), equatorial=True, prograde=True)
    exact = 2 * m * (1 + np.cos(2.0 / 3.0 * np.arccos(-a / m)))
    err = abs(trapped.r - exact)
    return err < 1e-8, err, f"r={trapped.r:.12f}"


def check_torus_hypotheses(suite):
    values = torus_verify()
    err = max(abs(v - 1.0) for v in values.values())
    return err < 1e-6, err, ", ".join(f"{k}={v:.9f}" for k, v in values.items())


def _decay_check(model, alpha):
    def run(suite):
        if model == "torus":
            cfg = TORUS_DECAY
            result = torus_unstable_manifold(alpha, cfg["amplitude"], cfg["profile"], cfg["eps"],
                                             cfg["tol"], cfg["t_range"], n=cfg["n"],
                                             n_base=cfg["n_base"], seed=suite.seed)
        else:
            cfg = KERR_DECAY
            pert = MetricPerturbation.make(alpha, cfg["amplitude"], cfg["profile"])
            result = kerr_stable_manifold(KerrParams(1.0, cfg["a"]), pert, cfg["eps"], cfg["tol"],
                                          t_range=cfg["t_range"], n=cfg["n"],
                                          n_base=cfg["n_base"], prograde=cfg["prograde"],
                                          seed=suite.seed)
        suite.keep(f"{model}-decay-{alpha:g}", result)
        fit = fit_decay_rate(result.section, t_range=cfg["t_range"])
        err = abs(fit.alpha_fit - alpha)
        return err <= 0.1, err, f"alpha_fit={fit.alpha_fit:.4f}, C={fit.C:.4g}"

    return run


def _ensure_some_sections(suite):
    if not suite.sections:
        _toy_section(suite)
        suite.keep("torus", torus_unstable_manifold(1.0, n=5, seed=suite.seed))


def check_invariance(suite):
    _ensure_some_sections(suite)
    residuals = {name: r.residual for name, r in suite.sections.items()}
    worst = max(residuals.values())
    name = max(residuals, key=residuals.get)
    return worst < 1e-6, worst, f"{len(residuals)} sections, worst {name}"


def check_uniqueness(suite):
    weight = Weight.power_law(1.0)
    first = suite.sections.get("toy") or _toy_section(suite)
    second = _toy_section(suite, "toy-alt",
                          lambda t, u: (0.5 * weight(t) * np.cos(3 * u[:, 0]))[:, None])
    toy_diff = first.section.distance(second.section)
    torus_a = suite.sections.get("torus") or suite.keep(
        "torus", torus_unstable_manifold(1.0, n=5, seed=suite.seed))
    torus_b = suite.keep("torus-alt", torus_unstable_manifold(
        1.0, n=5, seed=suite.seed,
        initial=lambda t, u: (0.1 * weight(t) * (1 - (u[:, 0] / 0.4) ** 2))[:, None]))
    torus_diff = torus_a.section.distance(torus_b.section)
    worst = max(toy_diff, torus_diff)
    return worst < 1e-6, worst, f"toy {toy_diff:.1e}, torus {torus_diff:.1e}"


def check_contraction(suite):
    result = suite.sections.get("toy") or _toy_section(suite)
    rates = result.rates.as_dict()
    predicted = rates["nu"] * max(1.0, 1.0 / rates["gamma_min"])
    gap = abs(result.theta - predicted)
    return result.theta < 1 and gap < 0.1, gap, \
        f"theta={result.theta:.4f}, predicted={predicted:.4f}"


def check_characteristic_graph(suite):
    alpha = 1.0
    rng = np.random.default_rng(suite.seed)
    tau = rng.uniform(0.01, 0.3, 200)
    xprime = rng.uniform(-np.pi, np.pi, 200)
    idx = np.arange(200)
    graph = characteristic_graph(lambda y, i: y,
                                 lambda t, y, i: t ** alpha * np.sin(y + xprime[i]),
                                 alpha, idx, tau)
    # direct iteration of Y = -sin(tau^alpha Y + x')
    big_y = np.zeros_like(tau)
    for _ in range(50):
        big_y = -np.sin(tau ** alpha * big_y + xprime)
    gap = max(abs(graph.scaled_sup - np.abs(big_y).max()),
              float(np.abs(graph.values / tau ** alpha - big_y).max()))
    return graph.residual < 1e-12 and gap < 1e-10, gap, f"residual={graph.residual:.1e}"


def null_points(params, n, seed=0):
    """Null covectors at random points away from the horizon, with ``r`` growing along ``H_G``.

    In the (+,-,-,-) signature ``r' = 2 g^rr xi_r`` is positive for ``xi_r < 0``.
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(5.0, 8.0, n)
    theta = rng.uniform(1.0, 2.0, n)
    xi_r = -rng.uniform(0.2, 1.0, n)
    xi_theta = rng.uniform(-3.0, 3.0, n)
    xi_phi = rng.uniform(-3.0, 3.0, n)
    gi = kerr_inverse_components(params, r, theta)
    a_coef = gi[:, 0, 0]
    b_coef = gi[:, 0, 3] * xi_phi
    c_coef = gi[:, 1, 1] * xi_r ** 2 + gi[:, 2, 2] * xi_theta ** 2 + gi[:, 3, 3] * xi_phi ** 2
    roots = np.stack([(-b_coef + s * np.sqrt(b_coef ** 2 - a_coef * c_coef)) / a_coef
                      for s in (1, -1)])
    sigma = roots.max(axis=0)
    zeros = np.zeros(n)
    return np.column_stack([zeros, r, theta, zeros, sigma, xi_r, xi_theta, xi_phi])


def check_conservation(suite):
    params = KerrParams(1.0, 0.7)
    ev = KerrDualMetric(params, analytic=True)
    p0 = null_points(params, 8, suite.seed)
    _, p1 = flow(hamilton_vector_field(ev), np.zeros(len(p0)), p0, 50.0, tol=1e-12)
    drifts = {"G": float(np.abs(ev.value(p1[:, :4], p1[:, 4:]) - ev.value(p0[:, :4], p0[:, 4:])).max()),
              "sigma": float(np.abs(p1[:, 4] - p0[:, 4]).max()),
              "xi_phi": float(np.abs(p1[:, 7] - p0[:, 7]).max())}
    worst = max(drifts.values())
    return worst < 1e-8, worst, ", ".join(f"{k} {v:.1e}" for k, v in drifts.items())


CHECKS = [
    Check("1", ("toy", "graph-transform"), "toy fixed point", 1e-8, check_toy_fixed_point, 10.0),
    Check("2", ("kerr",), "Schwarzschild trapped radius", 1e-10, check_schwarzschild_radius,
          1.0),
    Check("3", ("kerr", "rates"), "nu_min = 6 sqrt 3", 1e-4, check_nu_min, 1.0),
    Check("4", ("kerr",), "Kerr prograde equatorial orbit", 1e-8, check_kerr_equatorial),
    Check("5", ("torus",), "torus rates and bracket", 1e-6, check_torus_hypotheses),
    *[Check(f"6-torus-{a:g}", ("torus", "decay"), f"torus decay alpha={a:g}", 0.1,
            _decay_check("torus", a), 300.0) for a in DECAY_ALPHAS],
    *[Check(f"6-kerr-{a:g}", ("kerr", "decay"), f"Kerr decay alpha={a:g}", 0.1,
            _decay_check("kerr", a), 300.0) for a in DECAY_ALPHAS],
    Check("7", ("toy", "torus", "kerr", "graph-transform"), "invariance residuals", 1e-6,
          check_invariance),
    Check("8", ("toy", "torus", "graph-transform"), "uniqueness", 1e-6, check_uniqueness),
    Check("9", ("toy", "graph-transform"), "contraction factor", 0.1, check_contraction),
    Check("10", ("kerr", "graph"), "characteristic set graph", 1e-10,
          check_characteristic_graph),
    Check("11", ("kerr", "conservation"), "conservation along null flow", 1e-8,
          check_conservation),
]


def select(only=None):
    """Checks whose id, id prefix (``6`` matches ``6-torus-1``) or tag is in ``only``."""
    if not only:
        return list(CHECKS)
    wanted = {w.strip() for w in (only.split(",") if isinstance(only, str) else only)}
    chosen = [c for c in CHECKS
              if c.id in wanted or c.id.split("-")[0] in wanted or wanted & set(c.tags)]
    if not chosen:
        raise ValueError(f"no acceptance check matches {sorted(wanted)}")
    return chosen


def run_check(check, suite):
    start = time.perf_counter()
    try:
        passed, value, detail = check.run(suite)
        error = None
    except NumericalError as exc:
        passed, value, detail, error = False, float("nan"), str(exc), exc.code
    seconds = time.perf_counter() - start
    if check.max_seconds is not None and seconds > check.max_seconds:
        passed = False
        detail = f"{detail}; over the {check.max_seconds:g} s budget".lstrip("; ")
    return CheckResult(check.id, check.tags, check.description, bool(passed), float(value),
                       check.threshold, seconds, detail, error)


def run_suite(only=None, seed=0, echo=None):
    """Run the selected checks in order; ``echo`` is called with each result."""
    suite = Suite(seed)
    results = []
    for check in select(only):
        res = run_check(check, suite)
        results.append(res)
        if echo is not None:
            echo(res)
    return results
