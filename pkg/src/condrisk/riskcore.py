"""Conditional risk measures: the abstraction, built-in instances, checkers.

A conditional risk measure maps payoffs to one finite risk figure per block.
Built-ins cover the negated conditional mean, the conditional worst case, the
conditional entropic measure, and conditional average value at risk; each one
carries its closed-form dual penalty for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CondriskError
from .probspace import ConditionalValue, FiniteProbSpace, RandomVariable

# a dual variable y is an admissible density when y <= 0 and E[y | block] = -1
ADMISSIBLE_TOL = 1e-10


class RiskMeasureError(CondriskError):
    pass


class UndominatedSequenceError(CondriskError):
    """A convergence sequence spec exceeds its declared dominator."""


@dataclass
class CondRiskMeasure:
    """Evaluable payoff-to-conditional-risk map with optional dual metadata.

    ``closed_form_penalty`` maps a raw dual vector (one value per sample atom,
    all <= 0) to the blockwise penalty, +inf where the vector is not an
    admissible density for the measure.  ``evaluate_batch_fn`` is a vectorized
    fast path used by the numeric conjugation engine; ``dual_density_cap`` and
    ``dual_penalty_grad`` steer the dual ascent.
    """

    space: FiniteProbSpace
    evaluate_fn: Callable[[RandomVariable], ConditionalValue]
    label: str
    closed_form_penalty: Optional[Callable[[np.ndarray], ConditionalValue]] = None
    evaluate_batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dual_density_cap: Optional[Callable[[int], Optional[float]]] = None
    dual_penalty_grad: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def evaluate(self, x: RandomVariable) -> ConditionalValue:
        self.space._check_rv(x)
        out = self.evaluate_fn(x)
        vals = self.space._check_cv(out)
        if not np.all(np.isfinite(vals)):
            raise RiskMeasureError(f"{self.label} produced a non-finite risk value")
        return out

    def __call__(self, x: RandomVariable) -> ConditionalValue:
        return self.evaluate(x)

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """Risk of each row of ``xs``; falls back to looping over evaluate."""
        xs = np.asarray(xs, dtype=float)
        if self.evaluate_batch_fn is not None:
            return self.evaluate_batch_fn(xs)
        return np.stack([self.evaluate(RandomVariable(row)).values for row in xs])


def _admissible_mask(space: FiniteProbSpace, y: np.ndarray) -> np.ndarray:
    """Blocks on which -y is a conditional density (within ADMISSIBLE_TOL)."""
    ok = np.empty(space.n_blocks, dtype=bool)
    for j in range(1, space.n_blocks + 1):
        yb = y[space.block_index_array(j)]
        mean = float(np.dot(space.cond_probs(j), yb))
        ok[j - 1] = bool(np.all(yb <= ADMISSIBLE_TOL) and abs(mean + 1.0) <= ADMISSIBLE_TOL)
    return ok


def neg_cond_expectation(space: FiniteProbSpace) -> CondRiskMeasure:
    """rho(x) = -E[x | F]."""

    def ev(x: RandomVariable) -> ConditionalValue:
        return -space.cond_expect(x)

    def ev_batch(xs: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [-(xs[:, space.block_index_array(j)] @ space.cond_probs(j))
             for j in range(1, space.n_blocks + 1)]
        )

    def penalty(y: np.ndarray) -> ConditionalValue:
        out = []
        for j in range(1, space.n_blocks + 1):
            yb = y[space.block_index_array(j)]
            out.append(0.0 if np.all(np.abs(yb + 1.0) <= ADMISSIBLE_TOL) else math.inf)
        return ConditionalValue(out)

    return CondRiskMeasure(
        space, ev, "neg_expectation",
        closed_form_penalty=penalty,
        evaluate_batch_fn=ev_batch,
    )


def cond_worst_case(space: FiniteProbSpace) -> CondRiskMeasure:
    """rho(x) = esssup(-x | F), the conditional worst case."""

    def ev(x: RandomVariable) -> ConditionalValue:
        return space.esssup_cond(-x)

    def ev_batch(xs: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [(-xs[:, space.block_index_array(j)]).max(axis=1)
             for j in range(1, space.n_blocks + 1)]
        )

    def penalty(y: np.ndarray) -> ConditionalValue:
        return ConditionalValue(np.where(_admissible_mask(space, y), 0.0, math.inf))

    return CondRiskMeasure(
        space, ev, "worst_case",
        closed_form_penalty=penalty,
        evaluate_batch_fn=ev_batch,
    )


def _as_block_params(space: FiniteProbSpace, value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(space.n_blocks, float(arr))
    if arr.shape != (space.n_blocks,):
        raise ValueError(f"{name} must be a scalar or one value per block")
    return arr


def cond_entropic(space: FiniteProbSpace, gamma) -> CondRiskMeasure:
    """rho(x) = (1/gamma) log E[exp(-gamma x) | F], gamma > 0 per block."""
    g = _as_block_params(space, gamma, "gamma")
    if np.any(g <= 0):
        raise ValueError("gamma must be strictly positive")

    def ev(x: RandomVariable) -> ConditionalValue:
        out = []
        for j in range(1, space.n_blocks + 1):
            a = -g[j - 1] * x.values[space.block_index_array(j)]
            m = a.max()
            out.append((m + math.log(float(np.dot(space.cond_probs(j), np.exp(a - m))))) / g[j - 1])
        return ConditionalValue(out)

    def ev_batch(xs: np.ndarray) -> np.ndarray:
        cols = []
        for j in range(1, space.n_blocks + 1):
            a = -g[j - 1] * xs[:, space.block_index_array(j)]
            m = a.max(axis=1)
            cols.append((m + np.log(np.exp(a - m[:, None]) @ space.cond_probs(j))) / g[j - 1])
        return np.column_stack(cols)

    def penalty(y: np.ndarray) -> ConditionalValue:
        adm = _admissible_mask(space, y)
        out = []
        for j in range(1, space.n_blocks + 1):
            if not adm[j - 1]:
                out.append(math.inf)
                continue
            d = np.maximum(-y[space.block_index_array(j)], 0.0)
            ent = np.where(d > 0, d * np.log(np.maximum(d, 1e-300)), 0.0)
            out.append(float(np.dot(space.cond_probs(j), ent)) / g[j - 1])
        return ConditionalValue(out)

    def grad(j: int, d: np.ndarray) -> np.ndarray:
        q = space.cond_probs(j)
        return (q / g[j - 1]) * (np.log(np.maximum(d, 1e-300)) + 1.0)

    return CondRiskMeasure(
        space, ev, "entropic",
        closed_form_penalty=penalty,
        evaluate_batch_fn=ev_batch,
        dual_penalty_grad=grad,
        params={"gamma": g},
    )


def cond_avar(space: FiniteProbSpace, lam) -> CondRiskMeasure:
    """Conditional average value at risk at level lambda in (0, 1] per block.

    Per block: sort the losses -x, take conditional mass until lambda is
    filled, splitting the boundary atom fractionally, and average.
    """
    lam_arr = _as_block_params(space, lam, "lambda")
    if np.any(lam_arr <= 0) or np.any(lam_arr > 1):
        raise ValueError("lambda must lie in (0, 1]")

    def _block_value(j: int, xb: np.ndarray) -> float:
        q = space.cond_probs(j)
        lv = lam_arr[j - 1]
        if lv >= 1.0:
            # full tail: plain conditional mean of the loss
            return -float(np.dot(q, xb))
        losses = -xb
        order = np.argsort(-losses, kind="stable")
        acc = 0.0
        total = 0.0
        for i in order:
            take = min(q[i], lv - acc)
            total += take * losses[i]
            acc += take
            if acc >= lv:
                break
        return total / lv

    def ev(x: RandomVariable) -> ConditionalValue:
        return ConditionalValue(
            [_block_value(j, x.values[space.block_index_array(j)])
             for j in range(1, space.n_blocks + 1)]
        )

    def ev_batch(xs: np.ndarray) -> np.ndarray:
        cols = []
        for j in range(1, space.n_blocks + 1):
            q = space.cond_probs(j)
            lv = lam_arr[j - 1]
            losses = -xs[:, space.block_index_array(j)]
            order = np.argsort(-losses, axis=1, kind="stable")
            sorted_losses = np.take_along_axis(losses, order, axis=1)
            masses = q[order]
            prev = np.cumsum(masses, axis=1) - masses
            take = np.clip(lv - prev, 0.0, masses)
            cols.append((take * sorted_losses).sum(axis=1) / lv)
        return np.column_stack(cols)

    def penalty(y: np.ndarray) -> ConditionalValue:
        adm = _admissible_mask(space, y)
        out = []
        for j in range(1, space.n_blocks + 1):
            d = -y[space.block_index_array(j)]
            capped = np.all(d <= 1.0 / lam_arr[j - 1] + ADMISSIBLE_TOL)
            out.append(0.0 if adm[j - 1] and capped else math.inf)
        return ConditionalValue(out)

    return CondRiskMeasure(
        space, ev, "avar",
        closed_form_penalty=penalty,
        evaluate_batch_fn=ev_batch,
        dual_density_cap=lambda j: 1.0 / lam_arr[j - 1],
        params={"lambda": lam_arr},
    )


BUILTIN_FACTORIES = {
    "neg_expectation": lambda space, **kw: neg_cond_expectation(space),
    "worst_case": lambda space, **kw: cond_worst_case(space),
    "entropic": lambda space, **kw: cond_entropic(space, kw["gamma"]),
    "avar": lambda space, **kw: cond_avar(space, kw["lambda"]),
}


# -- axiom checks -------------------------------------------------------------

AXIOMS = (
    "convexity",
    "monotonicity",
    "cash_invariance",
    "local_property",
    "conditional_law_invariance",
)


@dataclass
class AxiomReport:
    axiom: str
    trials: int
    passed: bool
    counterexample: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"axiom": self.axiom, "trials": self.trials, "passed": self.passed}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def _law_preserving_permutation(space: FiniteProbSpace, rng) -> np.ndarray:
    """Permute sample atoms within equal-conditional-mass groups of each block."""
    perm = np.arange(space.n_atoms)
    for j in range(1, space.n_blocks + 1):
        idx = space.block_index_array(j)
        q = space.cond_probs(j)
        for mass in np.unique(np.round(q, 12)):
            group = idx[np.abs(q - mass) <= 1e-12]
            perm[group] = rng.permutation(perm[group])
    return perm


def check_axiom(
    measure: CondRiskMeasure,
    axiom: str,
    trials: int = 100,
    seed: int = 0,
    tol: float = 1e-9,
) -> AxiomReport:
    """Sampled check of one defining axiom; violations become report content."""
    if axiom not in AXIOMS:
        raise ValueError(f"unknown axiom {axiom!r}; choose from {AXIOMS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    space = measure.space
    rng = np.random.default_rng(seed)
    elements = list(space.algebra.elements())

    for trial in range(trials):
        xv = rng.normal(0.0, 2.0, space.n_atoms)
        x = RandomVariable(xv)
        if axiom == "convexity":
            y = RandomVariable(rng.normal(0.0, 2.0, space.n_atoms))
            eta = ConditionalValue(rng.uniform(0.0, 1.0, space.n_blocks))
            weight = space.lift(eta).values
            mix = RandomVariable(weight * x.values + (1.0 - weight) * y.values)
            lhs = measure.evaluate(mix).values
            rhs = eta.values * measure.evaluate(x).values + (
                1.0 - eta.values
            ) * measure.evaluate(y).values
            bad = lhs > rhs + tol
        elif axiom == "monotonicity":
            y = RandomVariable(xv + np.abs(rng.normal(0.0, 1.0, space.n_atoms)))
            lhs = measure.evaluate(y).values
            rhs = measure.evaluate(x).values
            bad = lhs > rhs + tol
        elif axiom == "cash_invariance":
            eta = ConditionalValue(rng.normal(0.0, 2.0, space.n_blocks))
            lhs = measure.evaluate(x + space.lift(eta)).values
            rhs = measure.evaluate(x).values - eta.values
            bad = np.abs(lhs - rhs) > tol
        elif axiom == "local_property":
            a = elements[rng.integers(0, len(elements))]
            cut = RandomVariable(x.values * space.sample_mask(a))
            lhs = measure.evaluate(x).values
            rhs = measure.evaluate(cut).values
            on = np.array([j in a.atoms for j in range(1, space.n_blocks + 1)])
            bad = on & (np.abs(lhs - rhs) > tol)
        else:  # conditional_law_invariance
            perm = _law_preserving_permutation(space, rng)
            y = RandomVariable(xv[perm])
            lhs = measure.evaluate(x).values
            rhs = measure.evaluate(y).values
            bad = np.abs(lhs - rhs) > tol

        if np.any(bad):
            block = int(np.argmax(bad)) + 1
            return AxiomReport(
                axiom,
                trials,
                False,
                {
                    "trial": trial,
                    "block": block,
                    "x": x.values.tolist(),
                    "lhs": float(lhs[block - 1]),
                    "rhs": float(rhs[block - 1]),
                },
            )
    return AxiomReport(axiom, trials, True)


def check_all_axioms(measure: CondRiskMeasure, trials: int = 100, seed: int = 0):
    return {axiom: check_axiom(measure, axiom, trials, seed) for axiom in AXIOMS}


# -- convergence checks --------------------------------------------------------


@dataclass(frozen=True)
class EventuallyConstantSeq:
    """x_n given explicitly for n < switch, constant equal to ``tail`` after."""

    terms: tuple
    tail: RandomVariable
    dominator: RandomVariable

    def check_dominated(self) -> None:
        bound = self.dominator.values
        for t in tuple(self.terms) + (self.tail,):
            if np.any(np.abs(t.values) > bound + 1e-12):
                raise UndominatedSequenceError("a sequence term exceeds the dominator")


@dataclass(frozen=True)
class ShrinkingPerturbationSeq:
    """x_n = x + (1/n) d, truncated at n_max; converges to x."""

    x: RandomVariable
    d: RandomVariable
    n_max: int
    dominator: Optional[RandomVariable] = None

    def limit(self) -> RandomVariable:
        return self.x

    def term(self, n: int) -> RandomVariable:
        return RandomVariable(self.x.values + self.d.values / n)

    def check_dominated(self) -> None:
        if self.dominator is None:
            return
        bound = self.dominator.values
        # |x + t d| over t in [0, 1] peaks at an endpoint
        for t in (self.term(1), self.x):
            if np.any(np.abs(t.values) > bound + 1e-12):
                raise UndominatedSequenceError("a sequence term exceeds the dominator")


@dataclass
class ConvergenceReport:
    property: str
    passed: bool
    exact: bool
    max_deviation: float
    observed_order: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "property": self.property,
            "passed": self.passed,
            "exact": self.exact,
            "max_deviation": self.max_deviation,
        }
        if self.observed_order is not None:
            out["order"] = self.observed_order
        return out


def check_convergence_property(
    measure: CondRiskMeasure,
    prop: str,
    sequence,
    tol: float = 1e-3,
) -> ConvergenceReport:
    """Fatou / Lebesgue verdict for a finitely described dominated sequence.

    Eventually-constant sequences give exact verdicts; shrinking-perturbation
    sequences are sampled at geometrically spaced indices up to n_max and the
    convergence order is estimated from the two largest sampled indices.
    """
    if prop not in ("fatou", "lebesgue"):
        raise ValueError("property must be 'fatou' or 'lebesgue'")
    sequence.check_dominated()

    if isinstance(sequence, EventuallyConstantSeq):
        # lim and liminf of rho(x_n) are rho(tail), and the a.s. limit is tail
        return ConvergenceReport(prop, True, True, 0.0)

    if not isinstance(sequence, ShrinkingPerturbationSeq):
        raise TypeError("unsupported sequence spec")

    limit_vals = measure.evaluate(sequence.limit()).values
    ns = sorted({min(2**k, sequence.n_max) for k in range(0, 64) if 2**k <= sequence.n_max} | {sequence.n_max})
    values = [measure.evaluate(sequence.term(n)).values for n in ns]
    devs = [float(np.max(np.abs(v - limit_vals))) for v in values]
    order = None
    if len(ns) >= 2 and devs[-1] > 0 and devs[-2] > 0:
        order = math.log(devs[-2] / devs[-1]) / math.log(ns[-1] / ns[-2])
    if prop == "fatou":
        # liminf estimated from the last sampled indices; the truncation error
        # there is O(1/n_max), which the caller's tolerance must absorb
        tail = np.min(np.stack(values[-2:]), axis=0)
        passed = bool(np.all(tail >= limit_vals - tol))
    else:
        passed = devs[-1] <= tol
    return ConvergenceReport(prop, passed, False, devs[-1], order)
