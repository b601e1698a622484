"""Shared random generators for the test suite (all explicitly seeded)."""

import numpy as np

from locc_forge import BipartiteState
from locc_forge.majorize import BirkhoffDecomposition
from locc_forge.numkit import rect_diag


def random_unitary(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_complex(rows, cols, rng):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_state(da, db, rng, rank=None):
    """Haar-ish random pure state, optionally with restricted Schmidt rank."""
    if rank is None:
        amp = random_complex(da, db, rng)
    else:
        amp = random_complex(da, rank, rng) @ random_complex(rank, db, rng)
    return BipartiteState(amp / np.linalg.norm(amp))


def random_spectrum(d, rng):
    """Random point of the probability simplex, sorted non-increasing."""
    w = rng.dirichlet(np.ones(d))
    return np.sort(w)[::-1]


def random_bistochastic(d, rng, terms=None):
    """Convex mix of random permutation matrices."""
    terms = terms or max(2, d + 2)
    weights = rng.dirichlet(np.ones(terms))
    out = np.zeros((d, d))
    for w in weights:
        out += w * BirkhoffDecomposition.permutation_matrix(rng.permutation(d))
    return out


def comparable_spectra(d, rng):
    """Pair (a, b) with a majorized by b, both sorted non-increasing."""
    b = random_spectrum(d, rng)
    a = np.sort(random_bistochastic(d, rng) @ b)[::-1]
    return a, b


def state_with_spectrum(spec, da, db, rng):
    """Random-basis state whose squared Schmidt coefficients are ``spec``."""
    amp = (
        random_unitary(da, rng)
        @ rect_diag(np.sqrt(spec), da, db)
        @ random_unitary(db, rng)
    )
    return BipartiteState(amp)


def random_contraction(d, rng, norm=None):
    g = random_complex(d, d, rng)
    target = norm if norm is not None else rng.uniform(0.3, 1.0)
    return g * (target / np.linalg.norm(g, 2))
