"""Block-diagonal semidefinite programs, and their SDPA sparse text format.

One set of data (C, A_1..A_m, b) reads two ways:
- standard form: maximize -<C, X> subject to <A_k, X> = b_k, X psd
- inequality form: minimize b.x subject to C + sum_k x_k A_k psd
The two are Lagrange duals of each other.
"""
import enum
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from .notation import dump_real, str2real

logger = logging.getLogger(__name__)

DEPENDENCY_TOLERANCE = 1e-10

Entry = Tuple[int, int, int, int, float]


class Form(enum.Enum):
    STANDARD = "standard"
    INEQUALITY = "inequality"


class SDPAFormatError(ValueError):
    """SDPA file could not be parsed. `line` is the 1-based line number when known."""

    def __init__(self, line: Optional[int], message: str) -> None:
        self.line = line
        super().__init__(message if line is None else "Line {}: {}".format(line, message))


class SDPProblem:
    """Semidefinite program data.

    Args:
    - form (Form): How the data is read
    - block_sizes (Sequence[int]): Block sizes (negative for diagonal blocks, as in SDPA; stored dense)
    - c (Sequence[np.ndarray]): Dense symmetric blocks of C (G0 in standard form, F0 in inequality form)
    - a (Sequence[scipy.sparse.csr_matrix]): One m x n_b^2 matrix per block, row k is vec(A_k) (full symmetric)
    - b (np.ndarray): Vector of size m

    Raises:
    - ValueError: Inconsistent shapes
    """

    def __init__(
        self,
        form: Form,
        block_sizes: Sequence[int],
        c: Sequence[np.ndarray],
        a: Sequence[scipy.sparse.csr_matrix],
        b: np.ndarray,
    ) -> None:
        self.form = form
        self.block_sizes: Tuple[int, ...] = tuple(int(s) for s in block_sizes)
        self.c: List[np.ndarray] = [np.asarray(blk, dtype=float) for blk in c]
        self.a: List[scipy.sparse.csr_matrix] = [scipy.sparse.csr_matrix(blk, dtype=float) for blk in a]
        self.b = np.asarray(b, dtype=float).reshape(-1)

        if not self.block_sizes or any(s == 0 for s in self.block_sizes):
            raise ValueError("Invalid block sizes {}".format(self.block_sizes))
        if len(self.c) != len(self.block_sizes) or len(self.a) != len(self.block_sizes):
            raise ValueError("Expected {} blocks".format(len(self.block_sizes)))
        for n, cb, ab in zip(self.dims, self.c, self.a):
            if cb.shape != (n, n):
                raise ValueError("Block of C has shape {}, expected {}".format(cb.shape, (n, n)))
            if not np.array_equal(cb, cb.T):
                raise ValueError("C is not symmetric")
            if ab.shape != (self.num_constraints, n * n):
                expected = (self.num_constraints, n * n)
                raise ValueError("Constraint block has shape {}, expected {}".format(ab.shape, expected))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(abs(s) for s in self.block_sizes)

    @property
    def num_constraints(self) -> int:
        return int(self.b.shape[0])

    @staticmethod
    def from_entries(
        form: Form, block_sizes: Sequence[int], entries: Iterable[Entry], b: Sequence[float]
    ) -> "SDPProblem":
        """Builds a problem from matrix entries.

        Args:
        - form (Form): How the data is read
        - block_sizes (Sequence[int]): Block sizes
        - entries (Iterable[Entry]): (k, block, i, j, value), 0-based; k = 0 is C and k >= 1 is A_k.
          The entry sets both (i, j) and (j, i); repeated entries add up.
        - b (Sequence[float]): Right-hand side / objective vector

        Returns:
        - SDPProblem: Problem
        """
        dims = [abs(s) for s in block_sizes]
        m = len(b)
        c = [np.zeros((n, n)) for n in dims]
        rows: List[List[int]] = [[] for _ in dims]
        cols: List[List[int]] = [[] for _ in dims]
        data: List[List[float]] = [[] for _ in dims]
        for k, block, i, j, value in entries:
            if not 0 <= block < len(dims):
                raise ValueError("No block {}".format(block))
            n = dims[block]
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError("Entry ({}, {}) out of block {} of size {}".format(i, j, block, n))
            if block_sizes[block] < 0 and i != j:
                raise ValueError("Off-diagonal entry ({}, {}) in diagonal block {}".format(i, j, block))
            if not 0 <= k <= m:
                raise ValueError("No matrix {}".format(k))
            positions = [(i, j)] if i == j else [(i, j), (j, i)]
            for r, s in positions:
                if k == 0:
                    c[block][r, s] += value
                else:
                    rows[block].append(k - 1)
                    cols[block].append(r * n + s)
                    data[block].append(value)
        a = [
            scipy.sparse.csr_matrix((d, (r, s)), shape=(m, n * n))
            for d, r, s, n in zip(data, rows, cols, dims)
        ]
        for blk in a:
            blk.sum_duplicates()
            blk.eliminate_zeros()
        return SDPProblem(form, block_sizes, c, a, np.asarray(b, dtype=float))

    def constraint(self, k: int) -> List[np.ndarray]:
        """Dense blocks of A_k (k >= 1)."""
        return [np.asarray(blk.getrow(k - 1).todense()).reshape(n, n) for blk, n in zip(self.a, self.dims)]

    def apply(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Vector (<A_1, X>, ..., <A_m, X>)."""
        result = np.zeros(self.num_constraints)
        for ab, xb in zip(self.a, blocks):
            result += ab @ np.asarray(xb).reshape(-1)
        return result

    def combine(self, vector: np.ndarray) -> List[np.ndarray]:
        """Blocks of sum_k vector_k A_k."""
        return [(ab.T @ vector).reshape(n, n) for ab, n in zip(self.a, self.dims)]

    def affine(self, vector: np.ndarray) -> List[np.ndarray]:
        """Blocks of C + sum_k vector_k A_k (the inequality-form matrix, or the Gram matrix of a standard-form dual)."""
        return [cb + sb for cb, sb in zip(self.c, self.combine(vector))]

    def translate(self) -> "SDPProblem":
        """Same data, read in the other form."""
        other = Form.INEQUALITY if self.form == Form.STANDARD else Form.STANDARD
        return SDPProblem(other, self.block_sizes, self.c, self.a, self.b)

    def independent_rows(self, tol: float = DEPENDENCY_TOLERANCE, required: Sequence[int] = ()) -> List[int]:
        """Indices of a maximal linearly independent subset of the constraint matrices (QR with column pivoting).

        Rows in `required` are kept first (they must be independent of each other).
        """
        if self.num_constraints == 0:
            return []
        columns = scipy.sparse.hstack(self.a).toarray().T
        kept = set(required)
        others = [k for k in range(self.num_constraints) if k not in kept]
        if not others:
            return sorted(kept)
        candidates = columns[:, others]
        if required:
            basis, _ = np.linalg.qr(columns[:, list(required)])
            candidates = candidates - basis @ (basis.T @ candidates)
        scale = max(float(np.max(np.abs(columns))), 1.0)
        _, r, pivots = scipy.linalg.qr(candidates, mode="economic", pivoting=True)
        diagonal = np.abs(np.diag(r))
        rank = int(np.sum(diagonal > tol * scale))
        return sorted(list(required) + [others[int(p)] for p in pivots[:rank]])

    def select(self, rows: Sequence[int]) -> "SDPProblem":
        """Problem restricted to the given constraints."""
        index = np.asarray(rows, dtype=int)
        return SDPProblem(self.form, self.block_sizes, self.c, [ab[index, :] for ab in self.a], self.b[index])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SDPProblem)
            and self.form == other.form
            and self.block_sizes == other.block_sizes
            and np.array_equal(self.b, other.b)
            and all(np.array_equal(x, y) for x, y in zip(self.c, other.c))
            and all((x != y).nnz == 0 for x, y in zip(self.a, other.a))
        )

    def __repr__(self) -> str:
        return "SDPProblem({}, blocks={}, constraints={})".format(
            self.form.value, self.block_sizes, self.num_constraints
        )


def dump_sdpa(problem: SDPProblem) -> str:
    """Serializes a problem in SDPA sparse format.

    SDPA reads: minimize c.x subject to sum_k x_k F_k - F_0 psd, so F_0 = -C and F_k = A_k.
    Entries are written 1-based with i <= j, values with 17 significant digits.
    """
    lines = [
        str(problem.num_constraints),
        str(len(problem.block_sizes)),
        " ".join(str(s) for s in problem.block_sizes),
        " ".join(dump_real(v) for v in problem.b),
    ]
    entries: List[Tuple[int, int, int, int, float]] = []
    for block, cb in enumerate(problem.c):
        rows, cols = np.nonzero(np.triu(cb))
        for i, j in zip(rows, cols):
            entries.append((0, block, int(i), int(j), -float(cb[i, j])))
    for block, (ab, n) in enumerate(zip(problem.a, problem.dims)):
        coo = ab.tocoo()
        for k, position, value in zip(coo.row, coo.col, coo.data):
            i, j = divmod(int(position), n)
            if i <= j and value != 0:
                entries.append((int(k) + 1, block, i, j, float(value)))
    for k, block, i, j, value in sorted(entries):
        lines.append("{} {} {} {} {}".format(k, block + 1, i + 1, j + 1, dump_real(value)))
    return "\n".join(lines) + "\n"


def export_sdpa(problem: SDPProblem, path: str) -> None:
    """Writes a problem as an SDPA .dat-s file."""
    with open(path, "w") as f:
        f.write(dump_sdpa(problem))
    logger.info("Wrote SDPA file {} ({} constraints)".format(path, problem.num_constraints))


def _numbers(line: str) -> List[str]:
    for c in "{}(),":
        line = line.replace(c, " ")
    return line.split()


def parse_sdpa(text: str, form: Form = Form.INEQUALITY) -> SDPProblem:
    """Parses an SDPA sparse file (leading comment lines start with " or *).

    Args:
    - text (str): File content
    - form (Form, optional): How to read the data. Defaults to Form.INEQUALITY (the SDPA shape).

    Raises:
    - SDPAFormatError: Syntax error, with its line number

    Returns:
    - SDPProblem: Problem
    """
    lines = [(n, line) for n, line in enumerate(text.splitlines(), start=1) if line.strip()]
    while lines and lines[0][1].lstrip()[0] in "\"*":
        lines.pop(0)
    if len(lines) < 4:
        raise SDPAFormatError(None, "truncated header")

    def integer(n: int, token: str) -> int:
        try:
            return int(token)
        except ValueError:
            raise SDPAFormatError(n, "expected an integer, got {}".format(token))

    def real(n: int, token: str) -> float:
        try:
            return str2real(token)
        except ValueError as e:
            raise SDPAFormatError(n, str(e))

    n_m, line_m = lines[0]
    tokens = _numbers(line_m)
    if not tokens:
        raise SDPAFormatError(n_m, "missing number of constraint matrices")
    m = integer(n_m, tokens[0])
    n_blocks, line_blocks = lines[1]
    tokens = _numbers(line_blocks)
    if not tokens:
        raise SDPAFormatError(n_blocks, "missing number of blocks")
    nblocks = integer(n_blocks, tokens[0])
    n_sizes, line_sizes = lines[2]
    sizes = [integer(n_sizes, t) for t in _numbers(line_sizes)]
    if len(sizes) != nblocks or any(s == 0 for s in sizes):
        raise SDPAFormatError(n_sizes, "expected {} non-zero block sizes".format(nblocks))
    n_c, line_c = lines[3]
    b = [real(n_c, t) for t in _numbers(line_c)]
    if len(b) != m:
        raise SDPAFormatError(n_c, "expected {} objective coefficients, got {}".format(m, len(b)))

    entries: List[Entry] = []
    for n, line in lines[4:]:
        tokens = _numbers(line)
        if len(tokens) != 5:
            raise SDPAFormatError(n, "expected 5 values, got {}".format(len(tokens)))
        k, block, i, j = (integer(n, t) for t in tokens[:4])
        value = real(n, tokens[4])
        if not 0 <= k <= m or not 1 <= block <= nblocks:
            raise SDPAFormatError(n, "no matrix {} block {}".format(k, block))
        size = abs(sizes[block - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SDPAFormatError(n, "entry ({}, {}) out of block of size {}".format(i, j, size))
        entries.append((k, block - 1, min(i, j) - 1, max(i, j) - 1, -value if k == 0 else value))
    try:
        return SDPProblem.from_entries(form, sizes, entries, b)
    except ValueError as e:
        raise SDPAFormatError(None, str(e))


def read_sdpa(path: str, form: Form = Form.INEQUALITY) -> SDPProblem:
    with open(path) as f:
        return parse_sdpa(f.read(), form)


def block_inner(x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> float:
    """Trace inner product of block matrices."""
    return float(sum(np.sum(xb * yb) for xb, yb in zip(x, y)))


def block_norm(blocks: Sequence[np.ndarray]) -> float:
    """Frobenius norm of block matrices."""
    return float(np.sqrt(sum(np.sum(blk * blk) for blk in blocks)))


