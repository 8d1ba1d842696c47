"""Moment-matrix relaxations of quantum behaviors with untrusted sources.

One positive linear functional L_st per source pair (s, t), each represented
by a moment matrix over a shared word basis; probabilities are entries
p(stab|xy) = L_st(A_{a|x} B_{b|y}) after completeness expansion.  Supported
constraints: fixed or free source weights, zero-probability events, general
linear equalities on probabilities, and two-sided residual-randomness bounds

    l * sum_{s't'} p(s't'ab|xy) <= p(stab|xy) <= u * sum_{s't'} p(s't'ab|xy).

Zero events are eliminated by facial reduction rather than equality rows:
p = L(m) with m = F G a product of commuting effect polynomials satisfies
L(m* m) = L(m), so p = 0 forces the moment matrix to annihilate the expansion
of every left multiple w m that stays inside the basis.  Keeping the zeros as
equality rows instead would leave the feasible set without interior and stall
the interior-point iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scenario import ScenarioShape
from . import monomials as mono
from .sdp import Cone, ConicSolution, SolverConfig, Status, solve_conic, svec, svec_dim

_PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class LinearExpr:
    """Affine expression over moment-matrix entries: sum coeff * M_st[u, v] + const.

    Terms are keyed by (s, t, u, v) with u <= v (matrices are symmetric)."""

    terms: dict
    const: float = 0.0

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return LinearExpr(self.terms, self.const + float(other))
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return LinearExpr(terms, self.const + other.const)

    def __mul__(self, scalar: float):
        return LinearExpr({k: v * scalar for k, v in self.terms.items()},
                          self.const * scalar)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, LinearExpr) else -other)


def zero_expr() -> LinearExpr:
    return LinearExpr({}, 0.0)


class MomentBasis:
    """Word basis of one relaxation level plus entry lookaside tables."""

    def __init__(self, shape: ScenarioShape, level: int):
        if not 1 <= level <= 3:
            raise ValueError("level must be between 1 and 3")
        self.shape = shape
        self.level = level
        self.words = mono.build_basis(shape.nx, shape.ny, shape.na, shape.nb, level)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.size = len(self.words)

    def word_entry(self, word) -> tuple[int, int]:
        """Entry (u, v) with u <= v whose moment equals L(word), for words with
        at most one symbol per party (all probability entries qualify)."""
        a_part = tuple(s for s in word if s[0] == mono.ALICE)
        b_part = tuple(s for s in word if s[0] == mono.BOB)
        if len(a_part) > self.level or len(b_part) > self.level:
            raise ValueError(f"word {word} too long for level {self.level}")
        if a_part and b_part:
            u, v = self.index[a_part], self.index[b_part]
        elif a_part or b_part:
            u, v = 0, self.index[a_part or b_part]
        else:
            u = v = 0
        return (u, v) if u <= v else (v, u)

    def prob_expr(self, s: int, t: int, a: int, b: int, x: int, y: int) -> LinearExpr:
        """p(stab|xy) as a linear expression over block (s, t) entries.

        The identity word maps to the (0, 0) entry (the block normalization
        L_st(1) = p(st)), never to a constant."""
        sh = self.shape
        ta = mono.effect_terms(mono.ALICE, a, x, sh.na)
        tb = mono.effect_terms(mono.BOB, b, y, sh.nb)
        terms: dict = {}
        for w, coeff in mono.product_terms(ta, tb).items():
            u, v = self.word_entry(w)
            terms[(s, t, u, v)] = terms.get((s, t, u, v), 0.0) + coeff
        return LinearExpr(terms, 0.0)

    def zero_element_words(self, a: int, b: int, x: int, y: int) -> dict:
        """Expansion of m = F_a|x G_b|y over basis words (the zero element)."""
        sh = self.shape
        ta = mono.effect_terms(mono.ALICE, a, x, sh.na)
        tb = mono.effect_terms(mono.BOB, b, y, sh.nb)
        return mono.product_terms(ta, tb)

    def null_vectors(self, a: int, b: int, x: int, y: int) -> list:
        """Moment-matrix null vectors implied by p(ab|xy) = 0.

        The GNS construction turns L(m* m) = 0 into pi(m)|Omega> = 0, hence
        pi(w m)|Omega> = 0 for every word w; each left multiple expressible in
        the basis contributes one vector.  Right multiples are not valid and
        must not be added."""
        m = self.zero_element_words(a, b, x, y)
        out = []
        for w in self.words:
            vec = np.zeros(self.size)
            ok = True
            for word, coeff in m.items():
                nw = mono.concat(w, word)
                if nw is mono.ZERO:
                    continue
                if nw not in self.index:
                    ok = False
                    break
                vec[self.index[nw]] += coeff
            if ok and np.linalg.norm(vec) > _PRUNE_TOL:
                out.append(vec / np.linalg.norm(vec))
        return out


@dataclass
class MomentProblem:
    """Finite relaxation: one moment block per (s, t) over a shared basis."""

    shape: ScenarioShape
    level: int
    basis: MomentBasis
    weights: dict | None              # {(s,t): p(st)} or None for free weights
    zeros: tuple                      # [(s,t,a,b,x,y)] eliminated by reduction
    equalities: tuple                 # [(LinearExpr, const, tag)]
    inequalities: tuple               # [LinearExpr >= 0]
    objective: LinearExpr             # maximized
    residual_bounds: tuple | None     # (l, u) or None

    @property
    def block_keys(self) -> list:
        return [(s, t) for s in range(self.shape.ns) for t in range(self.shape.nt)]

    def to_json(self) -> dict:
        def expr_json(e: LinearExpr) -> dict:
            return {"const": e.const,
                    "terms": [[list(k), v] for k, v in sorted(e.terms.items())]}

        return {
            "version": "sdp.v1",
            "shape": self.shape.to_json(),
            "level": self.level,
            "weights": None if self.weights is None else
                       {f"{s},{t}": w for (s, t), w in sorted(self.weights.items())},
            "zeros": [list(z) for z in self.zeros],
            "equalities": [[expr_json(e), c] for (e, c, _tag) in self.equalities],
            "inequalities": [expr_json(e) for e in self.inequalities],
            "objective": expr_json(self.objective),
            "residualBounds": list(self.residual_bounds) if self.residual_bounds else None,
        }


def build_moment_problem(shape: ScenarioShape, level: int,
                         weights: dict | None = None,
                         zeros=(),
                         value_constraints=(),
                         objective: LinearExpr | None = None,
                         residual_bounds: tuple | None = None) -> MomentProblem:
    """Assemble the relaxation; raises on inconsistent constant constraints.

    value_constraints is a list of (LinearExpr, const); zeros is a list of
    (s, t, a, b, x, y) events eliminated exactly.
    """
    basis = MomentBasis(shape, level)
    if residual_bounds is not None:
        lo, up = residual_bounds
        if not (0.0 < lo <= up < 1.0):
            raise ValueError("residual bounds need 0 < l <= u < 1")
    zeros = tuple(tuple(int(v) for v in z) for z in zeros)
    zero_set = set(zeros)
    def _proportional(terms_a: dict, terms_b: dict) -> float | None:
        """Factor lam with terms_a = lam * terms_b, or None."""
        if set(terms_a) != set(terms_b) or not terms_b:
            return None
        key = next(iter(terms_b))
        lam = terms_a[key] / terms_b[key]
        for k, vb in terms_b.items():
            if abs(terms_a[k] - lam * vb) > 1e-12:
                return None
        return lam

    eqs = []
    for expr, const in value_constraints:
        eqs.append((expr, float(const), "value"))
        # a value constraint pinning a zeroed event to a nonzero constant is
        # structurally inconsistent; detect it before the solver sees it
        if abs(const) > _PRUNE_TOL:
            for event in zero_set:
                zexpr = basis.prob_expr(*event)
                if _proportional(expr.terms, zexpr.terms) is not None:
                    raise ValueError(
                        f"value constraint (= {const}) conflicts with zero "
                        f"event {event}")
    ineqs = []
    if residual_bounds is not None:
        lo, up = residual_bounds
        for s in range(shape.ns):
            for t in range(shape.nt):
                for a in range(shape.na):
                    for b in range(shape.nb):
                        for x in range(shape.nx):
                            for y in range(shape.ny):
                                p_st = basis.prob_expr(s, t, a, b, x, y)
                                total = zero_expr()
                                for s2 in range(shape.ns):
                                    for t2 in range(shape.nt):
                                        total = total + basis.prob_expr(s2, t2, a, b, x, y)
                                ineqs.append(p_st - lo * total)
                                ineqs.append(up * total - p_st)
    return MomentProblem(shape=shape, level=level, basis=basis,
                         weights=None if weights is None else dict(weights),
                         zeros=zeros, equalities=tuple(eqs),
                         inequalities=tuple(ineqs),
                         objective=objective or zero_expr(),
                         residual_bounds=residual_bounds)


# -------------------------------------------------------------- conic assembly

@dataclass
class ConicData:
    a_mat: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cone: Cone
    const: float                     # objective offset
    faces: dict                      # (s,t) -> Q (N x r) face basis
    row_tags: list                   # provenance per row, for certificates
    block_keys: list

    def lift_block(self, key, reduced: np.ndarray) -> np.ndarray:
        q = self.faces[key]
        return q @ reduced @ q.T


def _entry_matrix(n: int, u: int, v: int, coeff: float = 1.0) -> np.ndarray:
    m = np.zeros((n, n))
    if u == v:
        m[u, u] = coeff
    else:
        m[u, v] = m[v, u] = 0.5 * coeff
    return m


def to_conic(problem: MomentProblem) -> ConicData:
    """Assemble solver data; applies facial reduction per block."""
    basis = problem.basis
    n_words = basis.size
    block_keys = problem.block_keys

    faces = {}
    for key in block_keys:
        nulls = []
        for (s, t, a, b, x, y) in problem.zeros:
            if (s, t) == key:
                nulls.extend(basis.null_vectors(a, b, x, y))
        if nulls:
            nmat = np.array(nulls).T
            u, sv, _ = np.linalg.svd(nmat, full_matrices=True)
            rank = int(np.sum(sv > 1e-10))
            faces[key] = u[:, rank:]
        else:
            faces[key] = np.eye(n_words)

    sizes = {key: faces[key].shape[1] for key in block_keys}
    n_lin = len(problem.inequalities)
    cone = Cone(n_lin, [sizes[key] for key in block_keys])
    block_offset = {key: cone.offsets[i] for i, key in enumerate(block_keys)}

    def expr_row(expr: LinearExpr) -> np.ndarray:
        """Row vector of an expression on the reduced cone variables."""
        per_block: dict = {}
        for (s, t, u, v), coeff in expr.terms.items():
            per_block.setdefault((s, t), []).append((u, v, coeff))
        row = np.zeros(cone.dim)
        for key, entries in per_block.items():
            full = np.zeros((n_words, n_words))
            for u, v, coeff in entries:
                full += _entry_matrix(n_words, u, v, coeff)
            q = faces[key]
            red = q.T @ full @ q
            off = block_offset[key]
            row[off:off + svec_dim(red.shape[0])] = svec(red)
        return row

    rows, rhs, tags = [], [], []

    def add_row(row: np.ndarray, const: float, tag):
        norm = float(np.linalg.norm(row))
        if norm <= _PRUNE_TOL:
            if abs(const) > 1e-9:
                raise ValueError(f"inconsistent constraint with empty row: {tag}")
            return
        rows.append(row)
        rhs.append(const)
        tags.append(tag)

    # structural: equal-moment entries and algebraically zero entries
    for key in block_keys:
        q = faces[key]
        reps: dict = {}
        for u in range(n_words):
            for v in range(u, n_words):
                word = mono.concat(mono.adjoint(basis.words[u]), basis.words[v])
                k = mono.adjoint_key(word)
                full = _entry_matrix(n_words, u, v)
                if k is mono.ZERO:
                    red = q.T @ full @ q
                    add_row(_block_row(cone, block_offset[key], red), 0.0,
                            ("structural_zero", key, u, v))
                elif k in reps:
                    ru, rv = reps[k]
                    red = q.T @ (full - _entry_matrix(n_words, ru, rv)) @ q
                    add_row(_block_row(cone, block_offset[key], red), 0.0,
                            ("structural_eq", key, u, v))
                else:
                    reps[k] = (u, v)

    # normalization
    if problem.weights is not None:
        for key in block_keys:
            expr = LinearExpr({(key[0], key[1], 0, 0): 1.0})
            add_row(expr_row(expr), float(problem.weights[key]), ("weight", key))
    else:
        expr = LinearExpr({(s, t, 0, 0): 1.0 for (s, t) in block_keys})
        add_row(expr_row(expr), 1.0, ("norm_free",))

    # zero events not captured by the face (level too low for the null vectors)
    for (s, t, a, b, x, y) in problem.zeros:
        expr = basis.prob_expr(s, t, a, b, x, y)
        row = expr_row(expr)
        if np.linalg.norm(row) > 1e-10:
            add_row(row, -expr.const, ("zero", (s, t, a, b, x, y)))

    # user equalities
    for expr, const, tag in problem.equalities:
        add_row(expr_row(expr), const - expr.const, (tag, len(rows)))

    # inequalities via slack variables: expr - slack = -const
    for j, expr in enumerate(problem.inequalities):
        row = expr_row(expr)
        row[j] = -1.0
        rows.append(row)
        rhs.append(-expr.const)
        tags.append(("slack", j))

    a_mat = np.array(rows) if rows else np.zeros((0, cone.dim))
    b = np.array(rhs)
    c = -expr_row(problem.objective)
    return ConicData(a_mat=a_mat, b=b, c=c, cone=cone,
                     const=problem.objective.const, faces=faces,
                     row_tags=tags, block_keys=block_keys)


def _block_row(cone: Cone, offset: int, reduced: np.ndarray) -> np.ndarray:
    row = np.zeros(cone.dim)
    row[offset:offset + svec_dim(reduced.shape[0])] = svec(reduced)
    return row


# ------------------------------------------------------------------- solving

@dataclass
class SDPSolution:
    """Solved relaxation; for Optimal, value is the certified bound on the
    maximized objective (taken from the dual side)."""

    status: Status
    value: float
    block_matrices: dict
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    conic: ConicData | None = None
    raw: ConicSolution | None = None

    def to_json(self) -> dict:
        return {
            "version": "sdp.v1",
            "status": self.status.value,
            "value": self.value,
            "residuals": {"primal": self.primal_residual,
                          "dual": self.dual_residual, "gap": self.gap},
            "iterations": self.iterations,
            "blocks": {f"{s},{t}": m.tolist()
                       for (s, t), m in sorted(self.block_matrices.items())}
            if self.block_matrices else {},
        }


def solve_sdp(problem: MomentProblem,
              config: SolverConfig | None = None) -> SDPSolution:
    """Solve the relaxation, maximizing the problem objective."""
    conic = to_conic(problem)
    sol = solve_conic(conic.a_mat, conic.b, conic.c, conic.cone, config)
    blocks = {}
    if sol.x is not None and sol.status in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        mats = conic.cone.mats(sol.x)
        for key, m in zip(conic.block_keys, mats):
            blocks[key] = conic.lift_block(key, m)
    if sol.status is Status.OPTIMAL:
        value = -sol.dual_value + conic.const
    elif sol.status is Status.MAX_ITERATIONS and sol.x is not None:
        # stalled at the numerical floor: the best iterate is still carried;
        # prefer the dual side when it is (approximately) feasible
        dv = sol.dual_value
        value = (-dv if np.isfinite(dv) else -sol.primal_value) + conic.const
    else:
        value = np.nan
    return SDPSolution(status=sol.status, value=float(value),
                       block_matrices=blocks,
                       primal_residual=sol.primal_residual,
                       dual_residual=sol.dual_residual, gap=sol.gap,
                       iterations=sol.iterations, conic=conic, raw=sol)


def max_value(shape: ScenarioShape, level: int, objective: LinearExpr,
              zeros=(), residual_bounds=None, weights=None,
              value_constraints=(),
              config: SolverConfig | None = None) -> tuple[float, SDPSolution]:
    """Upper bound on a Bell expression under the given constraints."""
    problem = build_moment_problem(shape, level, weights=weights, zeros=zeros,
                                   value_constraints=value_constraints,
                                   objective=objective,
                                   residual_bounds=residual_bounds)
    sol = solve_sdp(problem, config)
    return sol.value, sol


# --------------------------------------------------------- common expressions

def correlator_expr(basis: MomentBasis, s: int, t: int, x: int, y: int) -> LinearExpr:
    """<(A_0 - A_1)(B_0 - B_1)> at settings (x, y) in block (s, t)."""
    e = zero_expr()
    for a in range(2):
        for b in range(2):
            e = e + ((-1.0) ** (a + b)) * basis.prob_expr(s, t, a, b, x, y)
    return e


def chsh_objective(basis: MomentBasis, observed_only: bool = True) -> LinearExpr:
    """Normalized CHSH with untrusted sources, from observed slices:
    sum_xy (-1)^{xy} <A_x B_y>_{st=xy}."""
    e = zero_expr()
    for x in range(2):
        for y in range(2):
            sgn = -1.0 if x * y else 1.0
            if observed_only:
                e = e + sgn * correlator_expr(basis, x, y, x, y)
            else:
                e = e + sgn * correlator_expr(basis, 0, 0, x, y)
    return e


def tilted_hardy_objective(basis: MomentBasis, w: float,
                           s: int = 0, t: int = 0) -> LinearExpr:
    """p(st00|00) + w p(st11|00) on the violation slice."""
    return basis.prob_expr(s, t, 0, 0, 0, 0) + w * basis.prob_expr(s, t, 1, 1, 0, 0)


def hardy_zero_events(shape: ScenarioShape, all_sources: bool = True):
    """The three zero events, for every (s, t) when all_sources is set."""
    zeros = []
    triples = ((0, 1, 0, 1), (1, 0, 1, 0), (0, 0, 1, 1))
    sources = [(s, t) for s in range(shape.ns) for t in range(shape.nt)] \
        if all_sources else [(0, 0)]
    for (s, t) in sources:
        for (a, b, x, y) in triples:
            zeros.append((s, t, a, b, x, y))
    return zeros
