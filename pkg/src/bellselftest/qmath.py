"""Dense complex linear algebra kernel.

Everything downstream (scenarios, Hardy tests, qudit protocols, the moment
engine) works with plain ``numpy`` complex matrices.  This module collects the
structural predicates (Hermitian, unitary, projector), the two decompositions
the verification machinery relies on (Schmidt, simultaneous Jordan blocks of a
projector pair), and the JSON matrix encoding shared by the file formats.

All tolerances default to the module constants below and can be overridden per
call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
PROJECTOR_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10
NORM_TOL = 1e-12
CLUSTER_TOL = 1e-8  # eigenvalue clustering threshold for Jordan blocks


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of ndim {a.ndim}")
    return a


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, (i*rowsB + k, j*colsB + l) -> A[i,j]*B[k,l]."""
    return np.kron(as_matrix(a), as_matrix(b))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - dag(m))) <= tol


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dag(m) @ m - np.eye(m.shape[0]))) <= tol


def is_projector(m: np.ndarray, tol: float = PROJECTOR_TOL) -> bool:
    m = as_matrix(m)
    return is_hermitian(m, tol) and np.max(np.abs(m @ m - m)) <= tol


def is_psd(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(m)
    if not is_hermitian(m, tol):
        return False
    return float(np.linalg.eigvalsh(0.5 * (m + dag(m)))[0]) >= -tol


def eig_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL):
    """Eigenvalues (ascending) and unitary eigenbasis of a Hermitian matrix."""
    h = as_matrix(h)
    if not is_hermitian(h, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (h + dag(h)))
    return vals, vecs


def matrix_to_json(m: np.ndarray) -> dict:
    """Encode as {"rows", "cols", "entries"} with flat row-major [re, im] pairs."""
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    entries = obj["entries"]
    if len(entries) != rows * cols:
        raise ValueError("entry count does not match rows*cols")
    flat = np.array([complex(float(re), float(im)) for re, im in entries])
    return flat.reshape(rows, cols)


@dataclass(frozen=True)
class PureState:
    """Bipartite pure state, possibly subnormalized."""

    dims: tuple[int, int]
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        da, db = self.dims
        if len(amps) != da * db:
            raise ValueError(f"amplitude length {len(amps)} != {da}*{db}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def matrix(self) -> np.ndarray:
        """Coefficient matrix, amplitudes reshaped to (d_A, d_B)."""
        return self.amplitudes.reshape(self.dims)


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Ordered list of projector effects, one per outcome.

    Effects must be Hermitian idempotents, mutually orthogonal, and sum to the
    identity.  Zero effects are allowed (padding outcomes that never occur).
    """

    dim: int
    effects: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "effects", tuple(as_matrix(e) for e in self.effects)
        )

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def validate(self, tol: float = PROJECTOR_TOL) -> None:
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for i, e in enumerate(self.effects):
            if e.shape != (self.dim, self.dim):
                raise ValueError(f"effect {i} has shape {e.shape}, expected {(self.dim,)*2}")
            if not is_projector(e, tol):
                raise ValueError(f"effect {i} is not a projector within {tol}")
            total += e
        if np.max(np.abs(total - np.eye(self.dim))) > tol:
            raise ValueError("effects do not sum to the identity")
        for i in range(len(self.effects)):
            for j in range(i + 1, len(self.effects)):
                if np.max(np.abs(self.effects[i] @ self.effects[j])) > tol:
                    raise ValueError(f"effects {i} and {j} are not orthogonal")

    def to_json(self) -> dict:
        return {"dim": self.dim, "effects": [matrix_to_json(e) for e in self.effects]}

    @classmethod
    def from_json(cls, obj: dict) -> "ProjectiveMeasurement":
        return cls(dim=int(obj["dim"]),
                   effects=tuple(matrix_from_json(e) for e in obj["effects"]))


def measurement_from_vectors(vectors) -> ProjectiveMeasurement:
    """Rank-1 projective measurement from an orthonormal family of vectors."""
    vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
    dim = len(vecs[0])
    effects = [np.outer(v, np.conj(v)) for v in vecs]
    return ProjectiveMeasurement(dim=dim, effects=tuple(effects))


def dichotomic_qubit_measurement(angle: float, dim: int = 2, span: tuple[int, int] = (0, 1),
                                 pad_outcomes: int = 2) -> ProjectiveMeasurement:
    """Two-outcome measurement whose outcome-0 effect projects onto
    cos(angle)|m> + sin(angle)|n> inside span=(m, n); the orthogonal complement
    of that vector (including everything outside the span) is outcome 1.

    ``pad_outcomes`` appends zero effects so the measurement can live in a
    scenario with a larger outcome alphabet.
    """
    m, n = span
    v = np.zeros(dim, dtype=complex)
    v[m] = np.cos(angle)
    v[n] = np.sin(angle)
    e0 = np.outer(v, np.conj(v))
    e1 = np.eye(dim) - e0
    effects = [e0, e1] + [np.zeros((dim, dim), dtype=complex)] * max(0, pad_outcomes - 2)
    return ProjectiveMeasurement(dim=dim, effects=tuple(effects))


@dataclass(frozen=True)
class SchmidtDecomposition:
    """coefficients are nonincreasing and nonnegative; columns of the bases are
    the local Schmidt vectors."""

    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray

    def reconstruct(self, dims: tuple[int, int]) -> np.ndarray:
        da, db = dims
        amp = np.zeros(da * db, dtype=complex)
        for k, c in enumerate(self.coefficients):
            amp += c * np.kron(self.left_basis[:, k], self.right_basis[:, k])
        return amp


def schmidt(state: PureState) -> SchmidtDecomposition:
    """Schmidt decomposition via SVD of the coefficient matrix."""
    if state.norm < NORM_TOL:
        raise ValueError("cannot Schmidt-decompose the zero vector")
    u, sv, vh = np.linalg.svd(state.matrix())
    # columns of vh.T are the B-side amplitude vectors: the amplitudes equal
    # sum_k c_k u[:, k] (x) vh[k, :]
    return SchmidtDecomposition(coefficients=sv, left_basis=u, right_basis=vh.T)


@dataclass(frozen=True)
class JordanBlock:
    size: int
    p_block: np.ndarray  # restriction of P, shape (size, size)
    q_block: np.ndarray  # restriction of Q


@dataclass(frozen=True)
class JordanDecomposition:
    block_basis: np.ndarray  # unitary; columns grouped by block, in order
    blocks: tuple

    def block_slices(self):
        off = 0
        for blk in self.blocks:
            yield blk, slice(off, off + blk.size)
            off += blk.size


def jordan_blocks(p: np.ndarray, q: np.ndarray, tol: float = PROJECTOR_TOL,
                  cluster_tol: float = CLUSTER_TOL) -> JordanDecomposition:
    """Simultaneously block-diagonalize two projectors into blocks of size <= 2.

    Diagonalizes P + Q; eigenvalues 0, 1, 2 give one-dimensional invariant
    blocks, and each eigenvalue 1 + c with 0 < c < 1 pairs with its mirror
    1 - c into a two-dimensional block spanned by the P and (1-P) components
    of the eigenvector.
    """
    p = as_matrix(p)
    q = as_matrix(q)
    if not is_projector(p, tol):
        raise ValueError("first input is not a projector within tolerance")
    if not is_projector(q, tol):
        raise ValueError("second input is not a projector within tolerance")
    n = p.shape[0]
    vals, vecs = eig_hermitian(p + q, tol=10 * tol)

    # cluster eigenvalues within cluster_tol
    clusters: list[list[int]] = []
    for i in range(n):
        if clusters and vals[i] - vals[clusters[-1][0]] < cluster_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    def rotate_by_p(cols: np.ndarray) -> np.ndarray:
        """Diagonalize P restricted to the span of the columns."""
        psub = dag(cols) @ p @ cols
        _, u = np.linalg.eigh(0.5 * (psub + dag(psub)))
        return cols @ u

    basis_cols: list[np.ndarray] = []
    blocks: list[JordanBlock] = []

    def add_1x1(v: np.ndarray):
        v = v / np.linalg.norm(v)
        pb = np.array([[dag(v) @ p @ v]])
        qb = np.array([[dag(v) @ q @ v]])
        basis_cols.append(v)
        blocks.append(JordanBlock(size=1, p_block=pb, q_block=qb))

    consumed = np.zeros(n, dtype=bool)
    for cl in clusters:
        if all(consumed[i] for i in cl):
            continue
        lam = float(np.mean(vals[cl]))
        cols = vecs[:, cl]
        if lam < cluster_tol or lam > 2 - cluster_tol or abs(lam - 1) < cluster_tol:
            # commuting sector: split by P
            for v in rotate_by_p(cols).T:
                add_1x1(v)
            consumed[cl] = True
        elif lam > 1:
            # pair each eigenvector with its mirror via the action of P
            for v in rotate_by_p(cols).T:
                u1 = p @ v
                u2 = v - u1
                n1, n2 = np.linalg.norm(u1), np.linalg.norm(u2)
                if n1 < cluster_tol or n2 < cluster_tol:
                    add_1x1(v)
                    continue
                u1, u2 = u1 / n1, u2 / n2
                pb = np.array([[dag(u1) @ p @ u1, dag(u1) @ p @ u2],
                               [dag(u2) @ p @ u1, dag(u2) @ p @ u2]])
                qb = np.array([[dag(u1) @ q @ u1, dag(u1) @ q @ u2],
                               [dag(u2) @ q @ u1, dag(u2) @ q @ u2]])
                basis_cols.append(u1)
                basis_cols.append(u2)
                blocks.append(JordanBlock(size=2, p_block=pb, q_block=qb))
            consumed[cl] = True
            # the mirror cluster 1 - c is spanned by the second block vectors
            mirror = 2.0 - lam
            for cl2 in clusters:
                if abs(vals[cl2[0]] - mirror) < cluster_tol:
                    consumed[cl2] = True
        # lam < 1 clusters are consumed as mirrors of their 1 + c partners

    basis = np.column_stack(basis_cols)
    dec = JordanDecomposition(block_basis=basis, blocks=tuple(blocks))

    if not is_unitary(basis, 100 * tol):
        raise ValueError("block basis failed unitarity; degenerate eigenstructure")
    for mat, attr in ((p, "p_block"), (q, "q_block")):
        rec = np.zeros((n, n), dtype=complex)
        for blk, sl in dec.block_slices():
            cols = basis[:, sl]
            rec += cols @ getattr(blk, attr) @ dag(cols)
        if np.max(np.abs(rec - mat)) > 1000 * tol:
            raise ValueError("block reconstruction failed; degenerate eigenstructure")
    return dec
