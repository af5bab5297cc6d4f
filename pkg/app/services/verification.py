import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import HypothesisError, SLBoundsError
from app.schemas.verification import (
    InequalityStats,
    LemmaA6Verdict,
    LemmaFuzzCounts,
    VerificationReport,
    WorstCase,
)
from app.services.bounds import (
    DEFAULT_ETA_GRID,
    DEFAULT_S_GRID,
    GChoice,
    evaluate_bounds,
    select_best,
)
from app.services.coefficients import Problem, check_hypotheses
from app.services.norms import essential_extremum, lp_norm
from app.services.quadrature import integrate_adaptive, integrate_intervals
from app.services.spectral import estimate_min_spectrum, validation_margin

logger = logging.getLogger(__name__)

PULLOVER_EPSILONS = (0.1, 1.0, 10.0)
SUPPORT_SUP_SAMPLES = 1024


@dataclass(frozen=True)
class TestFunction:
    """Continuous piecewise-linear function, zero outside [breakpoints[0], breakpoints[-1]]."""

    __test__ = False

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.breakpoints, dtype=float)
        ys = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise SLBoundsError("breakpoints and values must be 1-d arrays of equal length")
        if xs.size < 3:
            raise SLBoundsError("a test function needs at least 3 breakpoints")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise SLBoundsError("test function data must be finite")
        if np.any(np.diff(xs) <= 0):
            raise SLBoundsError("breakpoints must be strictly increasing")
        if ys[0] != 0 or ys[-1] != 0:
            raise SLBoundsError("a test function vanishes at both ends of its support")
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "values", ys)

    @classmethod
    def hat(cls, lo: float, hi: float, peak: float = 1.0) -> "TestFunction":
        return cls(np.array([lo, 0.5 * (lo + hi), hi]), np.array([0.0, peak, 0.0]))

    @classmethod
    def random(cls, rng: np.random.Generator, window: Tuple[float, float]) -> "TestFunction":
        """Support of width >= 1/2 inside ``window`` with 1 to 8 interior nodes."""
        lo_w, hi_w = window
        width = rng.uniform(0.5, min(8.0, hi_w - lo_w))
        lo = rng.uniform(lo_w, hi_w - width)
        interior = np.sort(rng.uniform(lo, lo + width, size=int(rng.integers(1, 9))))
        xs = np.unique(np.concatenate([[lo], interior, [lo + width]]))
        if xs.size < 3:
            xs = np.array([lo, lo + 0.5 * width, lo + width])
        ys = rng.normal(size=xs.size) * rng.uniform(0.1, 10.0)
        ys[0] = ys[-1] = 0.0
        return cls(xs, ys)

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.breakpoints, factor * self.values)

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        return np.interp(xs, self.breakpoints, self.values, left=0.0, right=0.0)

    def derivative(self, xs: np.ndarray) -> np.ndarray:
        """f' with the right-hand slope at breakpoints; 0 off the support."""
        xs = np.asarray(xs, dtype=float)
        index = np.searchsorted(self.breakpoints, xs, side="right") - 1
        inside = (index >= 0) & (index < self.slopes.size)
        out = np.zeros_like(xs)
        out[inside] = self.slopes[index[inside]]
        return out

    def nodes(self, lo: float = -math.inf, hi: float = math.inf) -> Tuple[np.ndarray, np.ndarray]:
        """Breakpoints and values of f restricted to [lo, hi] (empty when disjoint)."""
        a, b = self.support
        lo, hi = max(lo, a), min(hi, b)
        if not lo < hi:
            return np.empty(0), np.empty(0)
        inner = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        xs = np.concatenate([[lo], inner, [hi]])
        return xs, self.evaluate(xs)

    def sup_abs(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        _, ys = self.nodes(lo, hi)
        return float(np.max(np.abs(ys))) if ys.size else 0.0

    def l2_squared(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        """Exact: h (a^2 + ab + b^2) / 3 per linear piece."""
        xs, ys = self.nodes(lo, hi)
        if xs.size < 2:
            return 0.0
        a, b = ys[:-1], ys[1:]
        return float(np.sum(np.diff(xs) * (a * a + a * b + b * b)) / 3)


class FormTerms(NamedTuple):
    energy: float  # ||sqrt(p) f'||_2^2
    q_plus: float  # ||q_+ f^2||_1
    q_minus: float  # ||q_- f^2||_1
    form: float  # integral of p f'^2 + q f^2, taken in one pass

    @property
    def split_form(self) -> float:
        return self.energy + self.q_plus - self.q_minus

    @property
    def magnitude(self) -> float:
        return abs(self.form) + self.energy + self.q_plus + self.q_minus


def _quad_tol(f: TestFunction) -> float:
    """1e-12 relative to the size of f^2 and of the unit-weight energy of f."""
    a, b = f.support
    squares = f.values**2
    unit_energy = float(np.sum(f.slopes**2 * np.diff(f.breakpoints)))
    return 1e-12 * (
        1.0 + (b - a) * float(np.max(squares)) + float(np.sum(squares)) + unit_energy
    )


def _energy_pieces(
    prob: Problem, f: TestFunction, cuts: Iterable[float] = ()
) -> Tuple[np.ndarray, np.ndarray]:
    """Left ends and energies slope^2 * (integral of p) of the pieces of f split at ``cuts``."""
    a, b = f.support
    edges = np.union1d(f.breakpoints, [c for c in cuts if a < c < b])
    pieces = list(zip(edges[:-1], edges[1:]))
    integrals, _, converged = integrate_intervals(
        prob.p, pieces, _quad_tol(f), breakpoints=prob.p.breakpoints()
    )
    if not np.all(converged):
        logger.warning("integral of p over a test-function piece did not converge")
    slopes = f.derivative(0.5 * (edges[:-1] + edges[1:]))
    return edges[:-1], slopes**2 * integrals


def _weighted_square(prob: Problem, f: TestFunction, weight) -> float:
    """Integral of weight(x) f(x)^2 over the support of f."""

    def integrand(xs: np.ndarray) -> np.ndarray:
        return weight(xs) * f.evaluate(xs) ** 2

    a, b = f.support
    cuts = list(f.breakpoints) + list(prob.q.breakpoints()) + list(prob.p.breakpoints())
    value, _ = integrate_adaptive(integrand, a, b, _quad_tol(f), breakpoints=cuts)
    return value


def quadratic_form_terms(prob: Problem, f: TestFunction) -> FormTerms:
    if not np.any(f.values):
        return FormTerms(0.0, 0.0, 0.0, 0.0)
    _, energies = _energy_pieces(prob, f)
    q_plus = _weighted_square(prob, f, prob.q_plus.evaluate_array)
    q_minus = _weighted_square(prob, f, prob.q_minus.evaluate_array)

    def form_density(xs: np.ndarray) -> np.ndarray:
        return prob.p.evaluate_array(xs) * f.derivative(xs) ** 2 + prob.q.evaluate_array(
            xs
        ) * f.evaluate(xs) ** 2

    a, b = f.support
    cuts = list(f.breakpoints) + list(prob.q.breakpoints()) + list(prob.p.breakpoints())
    form, _ = integrate_adaptive(form_density, a, b, _quad_tol(f), breakpoints=cuts)
    return FormTerms(float(np.sum(energies)), q_plus, q_minus, form)


def check_quadratic_form_identity(f: TestFunction, prob: Problem) -> float:
    """|(integral of p f'^2 + q f^2) - (||sqrt(p) f'||^2 + ||q_+ f^2|| - ||q_- f^2||)|."""
    terms = quadratic_form_terms(prob, f)
    return abs(terms.form - terms.split_form)


def check_lemma_A6(
    prob: Problem, f: TestFunction, terms: Optional[FormTerms] = None
) -> LemmaA6Verdict:
    """Form-nonpositive test functions: the kinetic term and |q| f^2 are controlled by q_- f^2.

    Functions with a positive form value are skipped, not failed.
    """
    terms = terms or quadratic_form_terms(prob, f)
    if terms.form > 0:
        return LemmaA6Verdict(qualifies=False, passed=True, form=terms.form)

    tol = settings.VIOLATION_RTOL * (1.0 + terms.magnitude)
    energy_ok = terms.energy <= terms.q_minus + tol
    potential_ok = terms.q_plus + terms.q_minus <= 2 * terms.q_minus + tol
    # q_- f^2 no larger than q_+ f^2 leaves no room for kinetic energy
    kinetic_vanishes = None
    if terms.q_minus <= terms.q_plus:
        kinetic_vanishes = terms.energy <= tol
    return LemmaA6Verdict(
        qualifies=True,
        passed=energy_ok and potential_ok and kinetic_vanishes is not False,
        form=terms.form,
        energy=terms.energy,
        q_minus=terms.q_minus,
        q_abs=terms.q_plus + terms.q_minus,
        kinetic_vanishes=kinetic_vanishes,
    )


class _Tally:
    """Accumulates per-inequality statistics in trial order."""

    def __init__(self):
        self.stats: Dict[str, InequalityStats] = {}

    def record(
        self, name: str, trial_seed: int, lhs: float, rhs: float, scale: Optional[float] = None
    ) -> None:
        """LHS > RHS + VIOLATION_RTOL (1 + scale) is a violation; scale defaults to |RHS|."""
        stats = self.stats.setdefault(name, InequalityStats())
        stats.trials += 1
        scale = abs(rhs) if scale is None else scale
        if lhs > rhs + settings.VIOLATION_RTOL * (1.0 + scale):
            stats.violations += 1
            logger.warning(f"{name} violated on trial {trial_seed}: {lhs!r} > {rhs!r}")
        slack = (rhs - lhs) / (1.0 + abs(rhs))
        if stats.worst_slack is None or slack < stats.worst_slack:
            stats.worst_slack = slack
            stats.worst_case = WorstCase(trial_seed=trial_seed, inequality=name, lhs=lhs, rhs=rhs)


def _support_sup(prob: Problem, lo: float, hi: float) -> float:
    value, _, _ = essential_extremum(
        prob.inv_p, [(lo, hi, SUPPORT_SUP_SAMPLES)], mode="sup", absolute_value=True
    )
    return value


def fuzz_sobolev_inequalities(
    prob: Problem,
    eta: Sequence[float] = DEFAULT_ETA_GRID,
    trials: Optional[int] = None,
    seed: int = 0,
) -> LemmaFuzzCounts:
    """Check the sup-norm and local Sobolev inequalities on seeded random test functions.

    Trial t draws from ``default_rng(seed + t)``; the norms of 1/p are taken
    over the support of the test function (or the unit interval for the local
    inequality).
    """
    trials = settings.FUZZ_TRIALS if trials is None else trials
    if trials < 1:
        raise SLBoundsError(f"trials must be >= 1, got {trials}")
    etas = [e for e in eta if math.isfinite(e)]
    window = prob.sample_window()
    tally = _Tally()
    unit_sup: Dict[int, float] = {}
    identity_max = 0.0
    identity_failures = 0
    qualifying = 0

    for t in range(trials):
        trial_seed = seed + t
        f = TestFunction.random(np.random.default_rng(trial_seed), window)
        lo, hi = f.support
        cells = range(math.floor(lo), math.ceil(hi))
        starts, energies = _energy_pieces(prob, f, cuts=cells)
        terms = quadratic_form_terms(prob, f)

        slack = abs(terms.form - terms.split_form)
        identity_max = max(identity_max, slack)
        if slack >= settings.IDENTITY_RTOL * (1.0 + terms.magnitude):
            identity_failures += 1
            logger.warning(f"quadratic form identity off by {slack:.3e} on trial {trial_seed}")

        sup_f = f.sup_abs()
        l2 = math.sqrt(f.l2_squared())
        kinetic = math.sqrt(terms.energy)

        inv_p_sup = _support_sup(prob, lo, hi)
        if math.isfinite(inv_p_sup):
            rhs = math.sqrt(2 * math.sqrt(inv_p_sup) * kinetic * l2)
            tally.record("sup_norm", trial_seed, sup_f, rhs)

        for e in etas:
            inv_p_eta = lp_norm(prob.inv_p, e, support=(lo, hi))
            if not inv_p_eta.finite:
                continue
            power = e / (2 * e - 1)
            rhs = ((2 * e - 1) / e * math.sqrt(inv_p_eta.value) * kinetic) ** power * l2 ** (
                (e - 1) / (2 * e - 1)
            )
            tally.record(f"sup_norm_eta={e:g}", trial_seed, sup_f, rhs)

        for n in cells:
            if n not in unit_sup:
                unit_sup[n] = _support_sup(prob, float(n), float(n + 1))
            if not math.isfinite(unit_sup[n]):
                continue
            in_cell = (starts >= n) & (starts < n + 1)
            local_energy = float(np.sum(energies[in_cell]))
            local_l2 = f.l2_squared(n, n + 1)
            lhs = f.sup_abs(n, n + 1) ** 2
            for eps in PULLOVER_EPSILONS:
                rhs = eps * unit_sup[n] * local_energy + (1 + 1 / eps) * local_l2
                tally.record(f"local_eps={eps:g}", trial_seed, lhs, rhs)

        verdict = check_lemma_A6(prob, f, terms)
        if verdict.qualifies:
            qualifying += 1
            scale = terms.magnitude
            tally.record("form_negative_energy", trial_seed, verdict.energy, verdict.q_minus, scale)
            tally.record(
                "form_negative_potential", trial_seed, verdict.q_abs, 2 * verdict.q_minus, scale
            )
            if verdict.kinetic_vanishes is not None:
                tally.record("form_negative_kinetic_zero", trial_seed, verdict.energy, 0.0, scale)

    violations = sum(s.violations for s in tally.stats.values())
    slacks = [s.worst_slack for s in tally.stats.values() if s.worst_slack is not None]
    logger.info(
        f"{prob.identifier}: {trials} fuzz trials, {violations} violations, "
        f"{qualifying} form-nonpositive"
    )
    return LemmaFuzzCounts(
        trials=trials,
        seed=seed,
        violations=violations,
        worst_slack=min(slacks) if slacks else None,
        inequalities=dict(sorted(tally.stats.items())),
        form_identity_max_slack=identity_max,
        form_identity_failures=identity_failures,
        lemma_a6_qualifying=qualifying,
    )


def validate_bounds(
    prob: Problem,
    s_grid: Sequence[float] = DEFAULT_S_GRID,
    eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
    g_strategy: GChoice = "auto",
    tol: Optional[float] = None,
    oracle_tol: Optional[float] = None,
    trials: Optional[int] = None,
    seed: int = 0,
) -> VerificationReport:
    """Every calculator against the spectral oracle, plus the lemma fuzz (``trials=0`` skips it)."""
    report = check_hypotheses(prob)
    if not report.passed:
        raise HypothesisError(report)

    bounds = evaluate_bounds(prob, s_grid, eta_grid, g_strategy, tol, report=report)
    best = select_best(bounds)
    oracle = estimate_min_spectrum(prob, oracle_tol, bound=best.bound)
    margin = validation_margin(oracle)

    # truncation only raises the estimate, so a bound above it is a violation either way
    ceiling = oracle.lambda_min + margin
    offenders = [b for b in bounds if b.applicable and b.bound > ceiling]
    for b in offenders:
        logger.error(
            f"{prob.identifier}: {b.label} bound {b.bound:.10g} exceeds oracle "
            f"{oracle.lambda_min:.10g} + {margin:.3g}"
        )
    if not oracle.converged and not offenders:
        logger.warning(
            f"{prob.identifier}: oracle did not converge; bounds are consistent with "
            f"its last estimate {oracle.lambda_min:.10g}"
        )

    trials = settings.FUZZ_TRIALS if trials is None else trials
    lemma_fuzz = fuzz_sobolev_inequalities(prob, eta_grid, trials, seed) if trials else None
    return VerificationReport(
        problem_id=prob.identifier,
        bounds=bounds,
        best=best,
        oracle=oracle,
        margin=margin,
        all_bounds_below_oracle=not offenders,
        oracle_converged=oracle.converged,
        lemma_fuzz=lemma_fuzz,
    )


def fuzz_rows(counts: LemmaFuzzCounts) -> List[Tuple[int, str, float, float]]:
    """(trial seed, inequality, LHS, RHS) of each inequality's worst trial."""
    return [(w.trial_seed, w.inequality, w.lhs, w.rhs) for w in counts.worst_cases]
