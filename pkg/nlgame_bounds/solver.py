"""Primal-dual interior-point method for `SDPProblem` (HKM direction, Mehrotra corrector)."""
import enum
import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from .sdp import Form, SDPProblem, block_inner, block_norm

logger = logging.getLogger(__name__)

BACKTRACK_FACTOR = 0.8
BACKTRACK_LIMIT = 40
REFINEMENT_STEPS = 3


class Status(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


class SolverOptions:
    """Interior-point settings.

    Args:
    - tol (float, optional): Tolerance on the relative primal/dual residuals and duality gap. Defaults to 1e-8.
    - max_iter (int, optional): Iteration limit. Defaults to 200.
    - step_frac (float, optional): Fraction of the step to the boundary of the cone. Defaults to 0.98.
    - verbose (bool, optional): Log every iteration at INFO level instead of DEBUG. Defaults to False.
    - regularization (float, optional): Initial Schur complement regularization (relative to its diagonal). Defaults to 1e-12.
    - max_regularization (float, optional): Largest regularization tried before giving up. Defaults to 1e-8.
    - stall_iterations (int, optional): Consecutive negligible steps tolerated. Defaults to 8.
    """

    TYPES: Dict[str, type] = {
        "tol": float,
        "max_iter": int,
        "step_frac": float,
        "verbose": bool,
        "regularization": float,
        "max_regularization": float,
        "stall_iterations": int,
    }

    def __init__(
        self,
        tol: float = 1e-8,
        max_iter: int = 200,
        step_frac: float = 0.98,
        verbose: bool = False,
        regularization: float = 1e-12,
        max_regularization: float = 1e-8,
        stall_iterations: int = 8,
    ) -> None:
        if tol <= 0:
            raise ValueError("tol must be positive, got {}".format(tol))
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1, got {}".format(max_iter))
        if not 0 < step_frac < 1:
            raise ValueError("step_frac must be in (0, 1), got {}".format(step_frac))
        if not 0 < regularization <= max_regularization:
            raise ValueError(
                "Invalid regularization range [{}, {}]".format(regularization, max_regularization)
            )
        self.tol = tol
        self.max_iter = max_iter
        self.step_frac = step_frac
        self.verbose = verbose
        self.regularization = regularization
        self.max_regularization = max_regularization
        self.stall_iterations = stall_iterations

    @staticmethod
    def from_pairs(pairs: Iterable[str], **kwargs: Any) -> "SolverOptions":
        """Builds options from "key=value" strings, on top of keyword arguments.

        Raises:
        - ValueError: Unknown key or invalid value
        """
        values: Dict[str, Any] = dict(kwargs)
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            key = key.strip()
            if not sep or key not in SolverOptions.TYPES:
                raise ValueError("Unknown solver option {}".format(pair))
            kind = SolverOptions.TYPES[key]
            try:
                if kind is bool:
                    values[key] = raw.strip().lower() in ("yes", "true", "t", "1", "on")
                else:
                    values[key] = kind(raw.strip())
            except ValueError:
                raise ValueError("Invalid value for solver option {}: {}".format(key, raw))
        return SolverOptions(**values)

    def as_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in SolverOptions.TYPES}

    def __repr__(self) -> str:
        return "SolverOptions({})".format(", ".join("{}={}".format(k, v) for k, v in self.as_dict().items()))


class SDPSolution:
    """Result of `solve`, read in the form of the problem.

    - standard form: primal_matrix is X, dual_matrix is C + sum x_k A_k, vector is x (dual variables)
    - inequality form: primal_matrix is C + sum x_k A_k, dual_matrix is X, vector is x
    primal_value is the objective of the form's primal problem, dual_value the one of its dual.
    """

    def __init__(
        self,
        form: Form,
        status: Status,
        primal_value: float,
        dual_value: float,
        primal_matrix: List[np.ndarray],
        dual_matrix: List[np.ndarray],
        vector: np.ndarray,
        iterations: int,
        primal_residual: float,
        dual_residual: float,
        gap: float,
    ) -> None:
        self.form = form
        self.status = status
        self.primal_value = primal_value
        self.dual_value = dual_value
        self.primal_matrix = primal_matrix
        self.dual_matrix = dual_matrix
        self.vector = vector
        self.iterations = iterations
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.gap = gap

    @property
    def gram(self) -> List[np.ndarray]:
        """Blocks of C + sum x_k A_k (the positive semidefinite matrix of the inequality side)."""
        return self.dual_matrix if self.form == Form.STANDARD else self.primal_matrix

    @property
    def moments(self) -> List[np.ndarray]:
        """Blocks of X (the matrix variable of the standard side)."""
        return self.primal_matrix if self.form == Form.STANDARD else self.dual_matrix

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL

    def __repr__(self) -> str:
        return "SDPSolution({}, primal={}, dual={}, iterations={})".format(
            self.status.value, self.primal_value, self.dual_value, self.iterations
        )


class _NumericalFailure(Exception):
    pass


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def _cholesky(blocks: Sequence[np.ndarray]) -> Optional[List[np.ndarray]]:
    """Lower Cholesky factors of every block, None if one of them is not positive definite."""
    factors = []
    for block in blocks:
        try:
            factors.append(scipy.linalg.cholesky(block, lower=True))
        except np.linalg.LinAlgError:
            return None
    return factors


def _inverse(lower: np.ndarray) -> np.ndarray:
    return _sym(scipy.linalg.cho_solve((lower, True), np.eye(lower.shape[0])))


def _max_step(lowers: Sequence[np.ndarray], dx: Sequence[np.ndarray]) -> float:
    """Largest alpha such that L L^T + alpha dx stays positive semidefinite (inf if unbounded).

    Read from the smallest eigenvalue of L^-1 dx L^-T.
    """
    step = np.inf
    for lower, dxb in zip(lowers, dx):
        half = scipy.linalg.solve_triangular(lower, dxb, lower=True)
        scaled = scipy.linalg.solve_triangular(lower, half.T, lower=True)
        smallest = scipy.linalg.eigvalsh(_sym(scaled))[0]
        if smallest < 0:
            step = min(step, -1.0 / smallest)
    return step


def _advance(
    blocks: Sequence[np.ndarray], direction: Sequence[np.ndarray], alpha: float
) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """Moves along direction, shortening alpha until every moved block has a Cholesky factor."""
    for _ in range(BACKTRACK_LIMIT):
        moved = [_sym(b + alpha * d) for b, d in zip(blocks, direction)]
        factors = _cholesky(moved)
        if factors is not None:
            return alpha, moved, factors
        alpha *= BACKTRACK_FACTOR
    raise _NumericalFailure("iterate lost positive definiteness")


def _schur_solve(schur: np.ndarray, factor: Tuple[np.ndarray, bool], rhs: np.ndarray) -> np.ndarray:
    # iterative refinement against the unregularized matrix, kept while the residual shrinks
    dy = scipy.linalg.cho_solve(factor, rhs)
    residual = rhs - schur @ dy
    norm = float(np.linalg.norm(residual))
    for _ in range(REFINEMENT_STEPS):
        candidate = dy + scipy.linalg.cho_solve(factor, residual)
        candidate_residual = rhs - schur @ candidate
        candidate_norm = float(np.linalg.norm(candidate_residual))
        if candidate_norm >= norm:
            break
        dy, residual, norm = candidate, candidate_residual, candidate_norm
    return dy


def _schur(problem: SDPProblem, x: Sequence[np.ndarray], w: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix S_kl = <A_k, X A_l W> with W = Z^-1."""
    m = problem.num_constraints
    schur = np.zeros((m, m))
    for ab, xb, wb, n in zip(problem.a, x, w, problem.dims):
        if ab.nnz == 0:
            continue
        coo = ab.tocoo()
        rows, cols = np.divmod(coo.col, n)
        # A_1 .. A_m stacked vertically as an (m n) x n matrix
        stacked = scipy.sparse.csr_matrix((coo.data, (coo.row * n + rows, cols)), shape=(m * n, n))
        products = np.matmul(xb, np.asarray(stacked @ wb).reshape(m, n, n))
        schur += np.asarray(ab @ products.reshape(m, n * n).T)
    return _sym(schur)


class _Iterate:
    def __init__(
        self,
        x: List[np.ndarray],
        y: np.ndarray,
        z: List[np.ndarray],
        lx: List[np.ndarray],
        lz: List[np.ndarray],
    ) -> None:
        self.x = x
        self.y = y
        self.z = z
        # lower Cholesky factors of x and z
        self.lx = lx
        self.lz = lz


def solve(problem: SDPProblem, options: Optional[SolverOptions] = None) -> SDPSolution:
    """Solves a semidefinite program.

    Every problem is solved internally as: minimize <C, X> subject to <A_k, X> = b_k, X psd, with dual
    (y, Z), Z = C - sum_k y_k A_k.

    Args:
    - problem (SDPProblem): Problem, in standard or inequality form
    - options (Optional[SolverOptions], optional): Settings. Defaults to SolverOptions().

    Raises:
    - ValueError: Problem without constraints

    Returns:
    - SDPSolution: Solution; status is optimal only when residuals and gap are all within tol.
      Otherwise the best iterate seen is returned with status max_iterations or numerical_failure.
    """
    options = options or SolverOptions()
    log = logger.info if options.verbose else logger.debug
    m = problem.num_constraints
    if m == 0:
        raise ValueError("Problem has no constraints")
    dims = problem.dims
    total = sum(dims)
    c, b = problem.c, problem.b

    # X = Z = eta I, eta = 1 + max(largest constraint row norm, norm of C)
    row_norms = np.sqrt(sum(np.asarray(ab.multiply(ab).sum(axis=1)).reshape(-1) for ab in problem.a))
    eta = 1.0 + max(float(np.max(row_norms)), block_norm(c))
    start = [eta * np.eye(n) for n in dims]
    roots = [np.sqrt(eta) * np.eye(n) for n in dims]
    current = _Iterate(start, np.zeros(m), [s.copy() for s in start], roots, [r.copy() for r in roots])
    norm_b = 1.0 + float(np.max(np.abs(b)))
    norm_c = 1.0 + block_norm(c)

    best: Optional[Tuple[float, _Iterate, Tuple[float, float, float]]] = None
    status = Status.MAX_ITERATIONS
    iteration = 0
    stalled = 0
    while True:
        x, y, z = current.x, current.y, current.z
        rp = b - problem.apply(x)
        rd = [cb - sb - zb for cb, sb, zb in zip(c, problem.combine(y), z)]
        primal_objective = block_inner(c, x)
        dual_objective = float(b @ y)
        residuals = (
            float(np.max(np.abs(rp))) / norm_b,
            block_norm(rd) / norm_c,
            abs(primal_objective - dual_objective) / (1.0 + abs(primal_objective) + abs(dual_objective)),
        )
        merit = max(residuals)
        if best is None or merit < best[0]:
            best = (merit, current, residuals)
        mu = block_inner(x, z) / total
        log(
            "iteration {}: primal {:.10g} dual {:.10g} pres {:.2e} dres {:.2e} gap {:.2e} mu {:.2e}".format(
                iteration, -primal_objective, -dual_objective, residuals[0], residuals[1], residuals[2], mu
            )
        )
        if merit <= options.tol:
            status = Status.OPTIMAL
            best = (merit, current, residuals)
            break
        if iteration >= options.max_iter:
            status = Status.MAX_ITERATIONS
            break

        try:
            w = [_inverse(lb) for lb in current.lz]
            schur = _schur(problem, x, w)
            scale = max(1.0, float(np.max(np.abs(np.diag(schur)))))
            regularization = options.regularization
            while True:
                try:
                    factor = scipy.linalg.cho_factor(schur + regularization * scale * np.eye(m), lower=True)
                    break
                except np.linalg.LinAlgError:
                    regularization *= 10
                    if regularization > options.max_regularization * (1 + 1e-9):
                        raise _NumericalFailure("Schur complement is not positive definite")
                    logger.debug("Raising Schur regularization to {:.0e}".format(regularization))

            xrdw = problem.apply([xb @ rdb @ wb for xb, rdb, wb in zip(x, rd, w)])

            def direction(rcw: List[np.ndarray]) -> Tuple[List[np.ndarray], np.ndarray, List[np.ndarray]]:
                # rcw is R_c Z^-1 for the complementarity target R_c
                dy = _schur_solve(schur, factor, rp - problem.apply(rcw) + xrdw)
                dz = [rdb - sb for rdb, sb in zip(rd, problem.combine(dy))]
                dx = [_sym(rb - xb @ dzb @ wb) for rb, xb, dzb, wb in zip(rcw, x, dz, w)]
                return dx, dy, dz

            dx, dy, dz = direction([-xb for xb in x])
            alpha_p = min(1.0, _max_step(current.lx, dx))
            alpha_d = min(1.0, _max_step(current.lz, dz))
            mu_affine = (
                block_inner(
                    [xb + alpha_p * dxb for xb, dxb in zip(x, dx)],
                    [zb + alpha_d * dzb for zb, dzb in zip(z, dz)],
                )
                / total
            )
            sigma = min(1.0, max(0.0, mu_affine / mu)) ** 3 if mu > 0 else 0.0
            dx, dy, dz = direction(
                [sigma * mu * wb - xb - dxb @ dzb @ wb for wb, xb, dxb, dzb in zip(w, x, dx, dz)]
            )
            alpha_p = min(1.0, options.step_frac * _max_step(current.lx, dx))
            alpha_d = min(1.0, options.step_frac * _max_step(current.lz, dz))
            alpha_p, next_x, lx = _advance(x, dx, alpha_p)
            alpha_d, next_z, lz = _advance(z, dz, alpha_d)
        except (_NumericalFailure, np.linalg.LinAlgError) as e:
            logger.warning("Interior-point method stopped at iteration {}: {}".format(iteration, e))
            status = Status.NUMERICAL_FAILURE
            break

        stalled = stalled + 1 if max(alpha_p, alpha_d) < 1e-8 else 0
        if stalled >= options.stall_iterations:
            logger.warning("Interior-point method stalled at iteration {}".format(iteration))
            status = Status.NUMERICAL_FAILURE
            break

        current = _Iterate(next_x, y + alpha_d * dy, next_z, lx, lz)
        iteration += 1

    assert best is not None
    _, chosen, (primal_residual, dual_residual, gap) = best
    internal_primal = block_inner(c, chosen.x)
    internal_dual = float(b @ chosen.y)
    vector = -chosen.y
    logger.info(
        "Interior-point method: {} after {} iterations (objective {:.10g})".format(
            status.value, iteration, -internal_primal
        )
    )
    if problem.form == Form.STANDARD:
        return SDPSolution(
            problem.form,
            status,
            -internal_primal,
            -internal_dual,
            chosen.x,
            chosen.z,
            vector,
            iteration,
            primal_residual,
            dual_residual,
            gap,
        )
    return SDPSolution(
        problem.form,
        status,
        -internal_dual,
        -internal_primal,
        chosen.z,
        chosen.x,
        vector,
        iteration,
        primal_residual,
        dual_residual,
        gap,
    )
