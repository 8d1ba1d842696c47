"""Shared fixtures and random-instance helpers (all generators seeded)."""

import numpy as np
import pytest

from bellselftest.qmath import ProjectiveMeasurement
from bellselftest.scenario import (
    CHSH_SHAPE,
    ClassicalQuantumState,
    Realization,
    source_independent,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_projector_pair(rng, d):
    """Two random rank-r projectors in dimension d."""
    out = []
    for _ in range(2):
        u = random_unitary(rng, d)
        r = int(rng.integers(1, d))
        cols = u[:, :r]
        out.append(cols @ cols.conj().T)
    return out


def random_dichotomic(rng, d=2):
    u = random_unitary(rng, d)
    r = int(rng.integers(1, d))
    cols = u[:, :r]
    e0 = cols @ cols.conj().T
    return ProjectiveMeasurement(dim=d, effects=(e0, np.eye(d) - e0))


def random_density(rng, d, full_rank=True):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    if full_rank:
        rho = rho + 0.05 * np.eye(d)
    return rho / np.real(np.trace(rho))


def random_source_independent(rng, dim=2):
    """Random device uncorrelated with the sources (wired CHSH shape)."""
    rho = random_density(rng, dim * dim)
    alice = (random_dichotomic(rng, dim), random_dichotomic(rng, dim))
    bob = (random_dichotomic(rng, dim), random_dichotomic(rng, dim))
    return source_independent(CHSH_SHAPE, (dim, dim), rho, alice, bob)


def random_untrusted(rng, dim=2):
    """Random full-support realization with source-correlated states."""
    weights = rng.dirichlet(np.ones(4)).reshape(2, 2)
    states = {}
    for s in range(2):
        for t in range(2):
            states[(s, t)] = weights[s, t] * random_density(rng, dim * dim)
    cq = ClassicalQuantumState(shape=CHSH_SHAPE, dims=(dim, dim), states=states)
    alice = (random_dichotomic(rng, dim), random_dichotomic(rng, dim))
    bob = (random_dichotomic(rng, dim), random_dichotomic(rng, dim))
    return Realization(cq=cq, alice=alice, bob=bob)
