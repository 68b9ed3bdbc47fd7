import numpy as np
import pytest
import scipy.linalg
import scipy.sparse

from nlgame_bounds.sdp import Form, SDPProblem
from nlgame_bounds.solver import SolverOptions, Status, solve


def scalar_problem(form: Form) -> SDPProblem:
    # standard: max 2x s.t. x = 3, x >= 0 ; inequality: min 3x s.t. x - 2 >= 0
    return SDPProblem.from_entries(form, [1], [(0, 0, 0, 0, -2.0), (1, 0, 0, 0, 1.0)], [3.0])


def eigenvalue_problem(blocks) -> SDPProblem:
    # max <M, X> s.t. tr X = 1, X psd, whose value is the largest eigenvalue of M
    dims = [b.shape[0] for b in blocks]
    a = [scipy.sparse.csr_matrix(np.eye(n).reshape(1, -1)) for n in dims]
    return SDPProblem(Form.STANDARD, dims, [-b for b in blocks], a, np.ones(1))


def test_options() -> None:
    options = SolverOptions()
    assert options.tol == 1e-8
    assert options.max_iter == 200
    assert options.as_dict()["step_frac"] == 0.98

    options = SolverOptions.from_pairs(["max_iter=50", "verbose=yes", "step_frac = 0.9"], tol=1e-6)
    assert options.tol == 1e-6
    assert options.max_iter == 50
    assert options.verbose is True
    assert options.step_frac == 0.9


def test_options_errors() -> None:
    with pytest.raises(ValueError) as e:
        SolverOptions(tol=0)
    assert str(e.value) == "tol must be positive, got 0"

    with pytest.raises(ValueError) as e:
        SolverOptions(max_iter=0)
    assert str(e.value) == "max_iter must be at least 1, got 0"

    with pytest.raises(ValueError) as e:
        SolverOptions(step_frac=1.0)
    assert str(e.value) == "step_frac must be in (0, 1), got 1.0"

    with pytest.raises(ValueError) as e:
        SolverOptions.from_pairs(["colour=blue"])
    assert str(e.value) == "Unknown solver option colour=blue"

    with pytest.raises(ValueError) as e:
        SolverOptions.from_pairs(["max_iter"])
    assert str(e.value) == "Unknown solver option max_iter"

    with pytest.raises(ValueError) as e:
        SolverOptions.from_pairs(["max_iter=many"])
    assert str(e.value) == "Invalid value for solver option max_iter: many"


def test_scalar_standard() -> None:
    solution = solve(scalar_problem(Form.STANDARD))
    assert solution.status == Status.OPTIMAL
    assert solution.optimal
    assert solution.primal_value == pytest.approx(6, abs=1e-6)
    assert solution.dual_value == pytest.approx(6, abs=1e-6)
    assert solution.vector[0] == pytest.approx(2, abs=1e-6)
    assert solution.moments[0][0, 0] == pytest.approx(3, abs=1e-6)
    assert solution.gram[0][0, 0] == pytest.approx(0, abs=1e-6)


def test_scalar_inequality() -> None:
    solution = solve(scalar_problem(Form.INEQUALITY))
    assert solution.status == Status.OPTIMAL
    assert solution.primal_value == pytest.approx(6, abs=1e-6)
    assert solution.vector[0] == pytest.approx(2, abs=1e-6)
    # the inequality-form matrix is C + x A
    assert solution.primal_matrix[0][0, 0] == pytest.approx(0, abs=1e-6)
    assert solution.dual_matrix[0][0, 0] == pytest.approx(3, abs=1e-6)


def test_largest_eigenvalue() -> None:
    rng = np.random.default_rng(7)
    for dims in ([3], [4, 2], [5, 1, 3]):
        blocks = []
        for n in dims:
            m = rng.normal(size=(n, n))
            blocks.append((m + m.T) / 2)
        expected = max(scipy.linalg.eigvalsh(b)[-1] for b in blocks)
        solution = solve(eigenvalue_problem(blocks))
        assert solution.status == Status.OPTIMAL
        assert solution.primal_value == pytest.approx(expected, abs=1e-6)
        assert solution.dual_value == pytest.approx(expected, abs=1e-6)
        assert solution.gap <= 1e-8
        for gram in solution.gram:
            assert scipy.linalg.eigvalsh(gram)[0] >= -1e-7


def test_iteration_limit() -> None:
    solution = solve(eigenvalue_problem([np.diag([1.0, 2.0, 3.0])]), SolverOptions(max_iter=1))
    assert solution.status == Status.MAX_ITERATIONS
    assert not solution.optimal
    assert solution.iterations == 1


def test_no_constraints() -> None:
    problem = SDPProblem.from_entries(Form.STANDARD, [1], [(0, 0, 0, 0, 1.0)], [])
    with pytest.raises(ValueError) as e:
        solve(problem)
    assert str(e.value) == "Problem has no constraints"


def planted_problem(rng: np.random.Generator, n: int = 6):
    """Random standard-form program with a known optimal pair (X*, y*, Z*), X* Z* = 0.

    The constraints are traceless, so X* + t I is strictly feasible, and the first one is PD on the range
    of X*, so some dual slack is positive definite too.
    """
    rank = int(rng.integers(1, n))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    head, tail = q[:, :rank], q[:, rank:]
    x_opt = head @ np.diag(rng.uniform(0.5, 2.0, rank)) @ head.T
    z_opt = tail @ np.diag(rng.uniform(0.5, 2.0, n - rank)) @ tail.T
    x_opt, z_opt = (x_opt + x_opt.T) / 2, (z_opt + z_opt.T) / 2

    matrices = [head @ head.T]
    for _ in range(int(rng.integers(1, 8))):
        g = rng.normal(size=(n, n))
        matrices.append(g + g.T)
    rows = []
    for matrix in matrices:
        matrix = (matrix + matrix.T) / 2
        rows.append((matrix - np.trace(matrix) / n * np.eye(n)).reshape(-1))
    a = np.array(rows)
    y_opt = rng.normal(size=len(rows))
    c = z_opt + (y_opt @ a).reshape(n, n)
    c = (c + c.T) / 2
    problem = SDPProblem(Form.STANDARD, [n], [c], [scipy.sparse.csr_matrix(a)], a @ x_opt.reshape(-1))
    return problem, -float(np.sum(c * x_opt))


def test_planted_optimum() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(50):
        problem, expected = planted_problem(rng)
        solution = solve(problem)
        assert solution.status == Status.OPTIMAL
        assert solution.primal_value == pytest.approx(expected, abs=1e-4 * (1 + abs(expected)))
        assert solution.dual_value == pytest.approx(expected, abs=1e-4 * (1 + abs(expected)))
        assert scipy.linalg.eigvalsh(solution.moments[0])[0] >= -1e-7
        scale = 1 + np.abs(problem.b).max()
        np.testing.assert_allclose(problem.apply(solution.moments), problem.b, atol=1e-6 * scale)
