"""Module Fenchel transform, dual representation, and stable-set diagnostics.

Everything factorizes over the conditioning blocks: the penalty and the dual
search run independently per block, and the per-block problems are ordinary
finite-dimensional convex duality under the conditional probabilities.
Penalties are the only producers of +inf; an indeterminate inf - inf raises
instead of propagating NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .boolalg import PartitionOfUnity, iter_partitions
from .errors import CondriskError
from .probspace import ConditionalValue, FiniteProbSpace, RandomVariable
from .riskcore import ADMISSIBLE_TOL, CondRiskMeasure


class DualityError(CondriskError):
    pass


class DualVariable:
    """Dual vector: one value <= 0 per sample atom; -y acts as a density."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a dual variable is a nonempty 1-d array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dual variable entries must be finite")
        if np.any(arr > 0):
            raise ValueError("dual variable entries must be <= 0")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("DualVariable is immutable")

    def __len__(self):
        return self.values.size

    def admissibility_gap(self, space: FiniteProbSpace) -> float:
        """max_j |E[y | block j] + 1|; zero means -y is a conditional density."""
        gaps = [
            abs(float(np.dot(space.cond_probs(j), self.values[space.block_index_array(j)])) + 1.0)
            for j in range(1, space.n_blocks + 1)
        ]
        return max(gaps)

    def is_admissible(self, space: FiniteProbSpace, tol: float = ADMISSIBLE_TOL) -> bool:
        return self.admissibility_gap(space) <= tol

    def __repr__(self):
        return f"DualVariable({self.values.tolist()!r})"


def admissible_dual(space: FiniteProbSpace, densities) -> DualVariable:
    """Build y = -d from per-atom densities, renormalized blockwise to mean 1."""
    d = np.asarray(densities, dtype=float)
    if np.any(d < 0):
        raise ValueError("densities must be nonnegative")
    out = np.empty_like(d)
    for j in range(1, space.n_blocks + 1):
        idx = space.block_index_array(j)
        mass = float(np.dot(space.cond_probs(j), d[idx]))
        if mass <= 0:
            raise ValueError(f"density has zero conditional mass on block {j}")
        out[idx] = -d[idx] / mass
    return DualVariable(out)


# -- numeric Fenchel transform --------------------------------------------------


def _pairing_block(space: FiniteProbSpace, j: int, xv: np.ndarray, yv: np.ndarray) -> float:
    idx = space.block_index_array(j)
    return float(np.dot(space.cond_probs(j) * yv[idx], xv[idx]))


def _block_objective_batch(
    measure: CondRiskMeasure, j: int, y_block: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """E[x y | block j] - rho(x)_j for each block payoff in ``points`` (rows)."""
    space = measure.space
    idx = space.block_index_array(j)
    full = np.zeros((points.shape[0], space.n_atoms))
    full[:, idx] = points
    risks = measure.evaluate_batch(full)[:, j - 1]
    return points @ (space.cond_probs(j) * y_block) - risks


def _grid_points(k: int, radius: float, per_axis: int) -> np.ndarray:
    axes = [np.linspace(-radius, radius, per_axis)] * k
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _compass_refine(obj_batch, start: np.ndarray, step: float, best: float, *, min_step=1e-5):
    point = start.copy()
    k = point.size
    directions = np.vstack([np.eye(k), -np.eye(k)])
    for _ in range(600):
        if step <= min_step:
            break
        cand = point[None, :] + step * directions
        vals = obj_batch(cand)
        i = int(np.argmax(vals))
        if vals[i] > best + 1e-15:
            best = float(vals[i])
            point = cand[i]
        else:
            step *= 0.5
    return point, best


@dataclass
class GridConjugateConfig:
    tol: float = 1e-9
    initial_radius: float = 4.0
    per_axis: int = 9
    max_doublings: int = 48
    growth_ratio: float = 1.3


def _block_conjugate_grid(
    measure: CondRiskMeasure,
    j: int,
    y_block: np.ndarray,
    cfg: GridConjugateConfig,
):
    """Numeric sup of the pairing minus risk on one block.

    Doubles the search radius until the increment falls under ``tol`` and the
    interior max is polished by compass search, or until three consecutive
    growing increments certify divergence; the certified ray is returned.
    """
    k = y_block.size

    def obj_batch(points):
        return _block_objective_batch(measure, j, y_block, points)

    radius = cfg.initial_radius
    per_axis = cfg.per_axis if k <= 3 else 5
    best = float(obj_batch(np.zeros((1, k)))[0])
    best_point = np.zeros(k)
    prev_inc = None
    streak = 0
    for _ in range(cfg.max_doublings):
        pts = _grid_points(k, radius, per_axis)
        vals = obj_batch(pts)
        i = int(np.argmax(vals))
        inc = float(vals[i]) - best
        if vals[i] > best:
            best = float(vals[i])
            best_point = pts[i]
        if inc < cfg.tol:
            spacing = 2.0 * radius / (per_axis - 1)
            point, best = _compass_refine(obj_batch, best_point, spacing, best)
            return best, point, None
        if prev_inc is not None and inc >= cfg.growth_ratio * prev_inc:
            streak += 1
            if streak >= 3:
                ray = best_point / max(np.linalg.norm(best_point), 1e-30)
                return math.inf, best_point, ray
        else:
            streak = 0
        prev_inc = inc
        radius *= 2.0
    # radius exhausted while still improving: unbounded for all practical radii
    ray = best_point / max(np.linalg.norm(best_point), 1e-30)
    return math.inf, best_point, ray


def fenchel(
    measure: CondRiskMeasure,
    y: DualVariable,
    method: str = "closed_form",
    *,
    cfg: Optional[GridConjugateConfig] = None,
) -> ConditionalValue:
    """Blockwise penalty rho#(y) = esssup_x (E[x y | F] - rho(x)).

    ``closed_form`` uses the measure's declared penalty; ``grid_refine`` runs
    the numeric sup per block.  +inf entries signal that -y is not an
    admissible density for the measure on that block.
    """
    space = measure.space
    if len(y) != space.n_atoms:
        raise DualityError("dual variable length does not match the space")
    if method == "closed_form":
        if measure.closed_form_penalty is None:
            raise DualityError(f"{measure.label} declares no closed-form penalty")
        return measure.closed_form_penalty(y.values)
    if method != "grid_refine":
        raise ValueError("method must be 'closed_form' or 'grid_refine'")
    cfg = cfg or GridConjugateConfig()
    out = []
    for j in range(1, space.n_blocks + 1):
        val, _, _ = _block_conjugate_grid(measure, j, y.values[space.block_index_array(j)], cfg)
        out.append(val)
    return ConditionalValue(out)


def penalty_of(measure: CondRiskMeasure, y: DualVariable) -> ConditionalValue:
    method = "closed_form" if measure.closed_form_penalty is not None else "grid_refine"
    return fenchel(measure, y, method)


def penalty_map(measure: CondRiskMeasure) -> Callable[[RandomVariable], ConditionalValue]:
    """Penalty as a map on raw payoff vectors, +inf on blocks with positive entries.

    Lets the sublevel-set machinery walk the dual space: vectors with a
    positive entry on a block are outside the density cone there.
    """
    space = measure.space

    def f(v: RandomVariable) -> ConditionalValue:
        vals = v.values
        clipped = np.minimum(vals, 0.0)
        pen = penalty_of(measure, DualVariable(clipped)).values.copy()
        for j in range(1, space.n_blocks + 1):
            if np.any(vals[space.block_index_array(j)] > 0):
                pen[j - 1] = math.inf
        return ConditionalValue(pen)

    return f


# -- dual representation ---------------------------------------------------------


def _project_capped_simplex(v: np.ndarray, w: np.ndarray, cap: Optional[float]) -> np.ndarray:
    """Euclidean projection onto {d : w . d = 1, 0 <= d <= cap}.

    tau -> w . clip(v - tau w, 0, cap) is piecewise linear and nonincreasing;
    the crossing segment is located by breakpoint bisection and solved exactly.
    """
    hi = math.inf if cap is None else cap
    bps = [v / w]
    if cap is not None:
        if float(np.dot(w, np.full_like(v, cap))) < 1.0 - 1e-12:
            raise DualityError("density cap is infeasible for the block")
        bps.append((v - cap) / w)
    bps = np.unique(np.concatenate(bps))

    def total(tau: float) -> float:
        return float(np.dot(w, np.clip(v - tau * w, 0.0, hi)))

    f_lo = total(bps[0])
    if f_lo < 1.0:
        # left of every breakpoint all components move linearly (a finite cap
        # would make this region flat at w.cap >= 1, so it is uncapped here)
        tau = bps[0] - (1.0 - f_lo) / float(np.dot(w, w))
    else:
        lo, hi_i = 0, len(bps) - 1
        while hi_i - lo > 1:
            mid = (lo + hi_i) // 2
            if total(bps[mid]) >= 1.0:
                lo = mid
            else:
                hi_i = mid
        t0, t1 = bps[lo], bps[hi_i]
        f0, f1 = total(t0), total(t1)
        tau = t0 if f0 <= f1 else t0 + (f0 - 1.0) * (t1 - t0) / (f0 - f1)
    d = np.clip(v - tau * w, 0.0, hi)
    s = float(np.dot(w, d))
    if s > 0:
        d = d / s
    return d


@dataclass
class DualSearchConfig:
    max_iters: int = 400
    gap_tol: float = 1e-8
    min_step: float = 1e-13


@dataclass
class DualResult:
    value: ConditionalValue
    maximizer: DualVariable
    converged: List[bool]
    warnings: List[str] = field(default_factory=list)


def _block_penalty_fn(measure: CondRiskMeasure, j: int):
    """Scalar penalty of a block density, via the declared closed form or the grid."""
    space = measure.space
    idx = space.block_index_array(j)

    if measure.closed_form_penalty is not None:

        def pen(d: np.ndarray) -> float:
            y = -np.ones(space.n_atoms)
            y[idx] = -d
            return float(measure.closed_form_penalty(y).values[j - 1])

        return pen

    cfg = GridConjugateConfig()

    def pen_grid(d: np.ndarray) -> float:
        val, _, _ = _block_conjugate_grid(measure, j, -d, cfg)
        return val

    return pen_grid


def _numeric_grad(pen, d: np.ndarray, h: float = 1e-7) -> np.ndarray:
    g = np.zeros_like(d)
    for i in range(d.size):
        dp, dm = d.copy(), d.copy()
        dp[i] += h
        dm[i] = max(dm[i] - h, 0.0)
        fp, fm = pen(dp), pen(dm)
        if math.isfinite(fp) and math.isfinite(fm) and dp[i] != dm[i]:
            g[i] = (fp - fm) / (dp[i] - dm[i])
    return g


def _ascend_block(
    measure: CondRiskMeasure,
    j: int,
    x: RandomVariable,
    target: float,
    cfg: DualSearchConfig,
):
    """Projected-gradient ascent of E[x y | F]_j - penalty over block densities."""
    space = measure.space
    idx = space.block_index_array(j)
    q = space.cond_probs(j)
    xb = x.values[idx]
    lin = -q * xb  # gradient of d -> E[x (-d) | block j]
    cap = measure.dual_density_cap(j) if measure.dual_density_cap else None
    pen = _block_penalty_fn(measure, j)
    grad_pen = measure.dual_penalty_grad

    def obj(d: np.ndarray) -> float:
        p = pen(d)
        return -math.inf if math.isinf(p) else float(np.dot(lin, d)) - p

    k = xb.size
    starts = [np.ones(k)]
    for i in range(k):
        vertex = np.zeros(k)
        vertex[i] = 1.0 / q[i]
        starts.append(_project_capped_simplex(vertex, q, cap))
    scored = sorted(((obj(s), tuple(s)) for s in starts), reverse=True)

    best_d = np.array(scored[0][1])
    best_val = scored[0][0]
    converged = False
    for _, start in scored:
        d = np.array(start)
        val = obj(d)
        if not math.isfinite(val):
            continue
        step_e = step_m = 1.0
        for _ in range(cfg.max_iters):
            if target - val <= cfg.gap_tol:
                converged = True
                break
            if grad_pen is not None:
                g = lin - grad_pen(j, d)
            else:
                g = lin - _numeric_grad(pen, d)
            # propose an additive projected step and a multiplicative
            # (exponentiated-gradient) step; the latter crosses the orders of
            # magnitude that entropy-like penalties put between components
            moved = False
            while max(step_e, step_m) >= cfg.min_step:
                cands = [(_project_capped_simplex(d + step_e * g, q, cap), "e")]
                expo = np.clip(step_m * g / q, -60.0, 60.0)
                db = np.maximum(d, 1e-18) * np.exp(expo)
                s = float(np.dot(q, db))
                if s > 0 and np.all(np.isfinite(db)):
                    cands.append((_project_capped_simplex(db / s, q, cap), "m"))
                cand, kind = max(cands, key=lambda cv: obj(cv[0]))
                cval = obj(cand)
                if cval > val + 1e-15:
                    d, val = cand, cval
                    if kind == "e":
                        step_e *= 1.6
                    else:
                        step_m *= 1.6
                    moved = True
                    break
                step_e *= 0.5
                step_m *= 0.5
            if not moved:
                converged = converged or (target - val <= 10 * cfg.gap_tol)
                break
        if val > best_val:
            best_val, best_d = val, np.asarray(d)
        if target - best_val <= cfg.gap_tol:
            converged = True
            break
    return best_val, best_d, converged


def dual_representation(
    measure: CondRiskMeasure,
    x: RandomVariable,
    cfg: Optional[DualSearchConfig] = None,
) -> DualResult:
    """Blockwise sup over admissible duals of E[x y | F] - rho#(y).

    Runs projected-gradient ascent on each block's conditional-density simplex
    from the barycenter with multistart from the vertices.  The value never
    exceeds rho(x) beyond tolerance (weak duality).
    """
    cfg = cfg or DualSearchConfig()
    space = measure.space
    targets = measure.evaluate(x).values
    values = np.empty(space.n_blocks)
    density = np.empty(space.n_atoms)
    converged = []
    warnings: List[str] = []
    for j in range(1, space.n_blocks + 1):
        val, d, ok = _ascend_block(measure, j, x, float(targets[j - 1]), cfg)
        values[j - 1] = val
        density[space.block_index_array(j)] = d
        converged.append(ok)
        if not ok:
            warnings.append(
                f"block {j}: ascent stopped after {cfg.max_iters} iterations "
                f"with gap {targets[j - 1] - val:.3e}"
            )
    return DualResult(
        ConditionalValue(values), admissible_dual(space, density), converged, warnings
    )


@dataclass
class RepresentationEntry:
    payoff: RandomVariable
    direct: ConditionalValue
    dual: ConditionalValue
    gap: np.ndarray
    maximizer: DualVariable
    attained: bool
    warnings: List[str]

    def to_dict(self) -> dict:
        return {
            "payoff": self.payoff.values.tolist(),
            "direct": self.direct.values.tolist(),
            "dual": self.dual.values.tolist(),
            "gap": self.gap.tolist(),
            "maximizer": self.maximizer.values.tolist(),
            "attained": self.attained,
        }


@dataclass
class RepresentationReport:
    entries: List[RepresentationEntry]
    tol: float

    @property
    def attained_all(self) -> bool:
        return all(e.attained for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "attained_all": self.attained_all,
            "entries": [e.to_dict() for e in self.entries],
        }


def verify_representation(
    measure: CondRiskMeasure,
    payoffs: Sequence[RandomVariable],
    tol: float = 1e-6,
    cfg: Optional[DualSearchConfig] = None,
) -> RepresentationReport:
    """Compare rho(x) against the dual value for each payoff."""
    payoffs = list(payoffs)
    if not payoffs:
        raise ValueError("verify_representation needs at least one payoff")
    entries = []
    for x in payoffs:
        direct = measure.evaluate(x)
        result = dual_representation(measure, x, cfg)
        gap = direct.values - result.value.values
        if np.any(gap < -tol):
            raise DualityError(
                f"weak duality violated by {float(-gap.min()):.3e} for {measure.label}"
            )
        attained = bool(np.all(np.abs(gap) <= tol))
        entries.append(
            RepresentationEntry(x, direct, result.value, gap, result.maximizer, attained, result.warnings)
        )
    return RepresentationReport(entries, tol)


# -- stable-topology diagnostics --------------------------------------------------


def sigma_s_membership(
    space: FiniteProbSpace,
    x: RandomVariable,
    families: Sequence[Sequence[RandomVariable]],
    parts: PartitionOfUnity,
    eps: ConditionalValue,
) -> bool:
    """Whether x lies in the stable weak-neighborhood of 0 given by the data.

    True iff, blockwise, the largest |E[x y | F]| over the family attached to
    the covering part stays strictly below eps.  The comparison is exact;
    tolerance would change the topology.
    """
    if len(families) != len(parts):
        raise ValueError("one family of duals per part is required")
    for fam in families:
        if not fam:
            raise ValueError("families must be nonempty")
    ev = space._check_cv(eps)
    if np.any(ev <= 0):
        raise ValueError("eps must be strictly positive blockwise")
    for part, fam in zip(parts, families):
        for j in part.atoms:
            worst = max(
                abs(_pairing_block(space, j, x.values, y.values)) for y in fam
            )
            if not worst < ev[j - 1]:
                return False
    return True


@dataclass
class SublevelReport:
    """Mixing closure plus probe-resolution boundedness of a sublevel set."""

    mixing_closure_passed: bool
    mixing_violation: Optional[dict]
    members: int
    bounded_per_block: List[bool]
    inf_compact_per_block: List[bool]
    qualifier: str = "at probe resolution"
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mixing_closure_passed": self.mixing_closure_passed,
            "members": self.members,
            "bounded_per_block": self.bounded_per_block,
            "inf_compact_per_block": self.inf_compact_per_block,
            "qualifier": self.qualifier,
            "notes": self.notes,
        }


def stable_sublevel_check(
    space: FiniteProbSpace,
    f: Callable[[RandomVariable], ConditionalValue],
    eta: ConditionalValue,
    probe: Sequence[RandomVariable],
    *,
    ray_bound: float = 2.0**40,
    max_combos: int = 4096,
) -> SublevelReport:
    """Stability and boundedness of the sublevel set {v : f(v) <= eta}.

    Mixing closure is exhaustive over partitions of the block algebra and the
    probe members found inside the set (a consequence of locality, so any
    violation means the caller's local-property certificate was wrong).
    Boundedness is probed by step-doubling rays along +/- each probe member;
    the verdict is only complete up to the span of the probe.
    """
    if not probe:
        raise ValueError("probe must be nonempty")
    level = space._check_cv(eta)

    def inside(v: RandomVariable) -> bool:
        return bool(np.all(f(v).values <= level))

    members = [v for v in probe if inside(v)]
    notes = []
    if not members:
        notes.append("no probe member lies in the sublevel set; verdicts vacuous")

    mixing_ok = True
    violation = None
    if members:
        combos = 0
        for partition in iter_partitions(space.algebra):
            if not mixing_ok or combos > max_combos:
                break
            r = len(partition)
            idxs = [0] * r
            while True:
                choice = [members[i] for i in idxs]
                mixed = space.indicator_mix(partition, choice)
                combos += 1
                if not inside(mixed):
                    mixing_ok = False
                    violation = {
                        "partition": [sorted(p.atoms) for p in partition],
                        "choice": [v.values.tolist() for v in choice],
                    }
                    break
                pos = r - 1
                while pos >= 0:
                    idxs[pos] += 1
                    if idxs[pos] < len(members):
                        break
                    idxs[pos] = 0
                    pos -= 1
                if pos < 0 or combos > max_combos:
                    break

    base = members[0] if members else probe[0]
    bounded = [not bool(members)] * space.n_blocks
    if members:
        bounded = [True] * space.n_blocks
        directions = []
        for v in probe:
            directions.append(v.values)
            directions.append(-v.values)
        for dvec in directions:
            if not np.any(dvec):
                continue
            escaped = np.zeros(space.n_blocks, dtype=bool)
            t = 1.0
            while t <= ray_bound:
                vals = f(RandomVariable(base.values + t * dvec)).values
                escaped |= vals > level
                if escaped.all():
                    break
                t *= 2.0
            for j in range(space.n_blocks):
                if not escaped[j]:
                    bounded[j] = False

    inf_compact = [mixing_ok and b for b in bounded]
    return SublevelReport(
        mixing_closure_passed=mixing_ok,
        mixing_violation=violation,
        members=len(members),
        bounded_per_block=bounded,
        inf_compact_per_block=inf_compact,
        notes=notes,
    )
