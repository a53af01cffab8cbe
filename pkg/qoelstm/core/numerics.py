"""
Minimal dense linear algebra, elementwise nonlinearities and seeded random
sources used by all other modules of the package.

All arrays are 64-bit floats. Random numbers come from numpy's PCG64 bit
generator: two generators created with the same seed produce the same draws,
and independent child generators (e.g. one per cross-validation fold) are
derived by spawning the seed with :class:`numpy.random.SeedSequence`.
"""
import numpy as np
from scipy.special import expit


DTYPE = np.float64

# Name of the bit generator, written in model provenance blocks:
RNG_ALGORITHM = 'PCG64'


class ShapeError(ValueError):
    """Raised when array dimensions do not match"""


def matrix(values, rows=None, cols=None):
    """Return a read-only 2D float64 numpy array from `values`

    :param values: a nested list (row-major) or any array-like. If `rows` and
        `cols` are given, `values` can also be a flat sequence of
        rows x cols numbers in row-major order
    :param rows: the number of rows (optional)
    :param cols: the number of columns (optional)
    """
    mat = np.array(values, dtype=DTYPE)
    if rows is not None and cols is not None:
        if mat.size != rows * cols:
            raise ShapeError(f'Expected {rows} x {cols} = {rows * cols} '
                             f'values, found {mat.size}')
        mat = mat.reshape((rows, cols))
    if mat.ndim != 2:
        raise ShapeError(f'Expected a 2D matrix, found shape {mat.shape}')
    if not np.isfinite(mat).all():
        raise ValueError('Matrix entries must be finite')
    mat.flags.writeable = False
    return mat


def matvec(mat, vec):
    """Return the matrix-vector product `mat @ vec`

    :param mat: numpy array of shape (rows, cols)
    :param vec: numpy array of shape (cols,)
    """
    mat = np.asarray(mat, dtype=DTYPE)
    vec = np.asarray(vec, dtype=DTYPE)
    if mat.ndim != 2 or vec.ndim != 1 or mat.shape[1] != vec.shape[0]:
        raise ShapeError(f'Cannot multiply matrix of shape {mat.shape} '
                         f'with vector of shape {vec.shape}')
    return mat @ vec


def sigmoid(x):
    """Logistic sigmoid, elementwise. Saturates without overflow warnings"""
    return expit(x)


def tanh(x):
    """Hyperbolic tangent, elementwise"""
    return np.tanh(x)


def make_rng(seed):
    """Return a new numpy random Generator (PCG64) seeded with `seed`

    :param seed: a non-negative integer or a :class:`numpy.random.SeedSequence`
    """
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, count):
    """Return `count` independent child SeedSequence derived from `seed`.
    The i-th child depends only on (`seed`, i), so work items seeded this way
    give the same results regardless of execution order

    :param seed: a non-negative integer
    :param count: the number of child seeds
    """
    return np.random.SeedSequence(seed).spawn(count)


def child_rng(seed, index):
    """Return the generator of the `index`-th child seed of `seed`"""
    return make_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def child_seed(seed, index):
    """Return the integer seed (in [0, 2**32)) of the `index`-th child of
    `seed`, e.g. the training seed of a cross-validation fold"""
    return int(np.random.SeedSequence(seed, spawn_key=(index,))
               .generate_state(1)[0])


def orthogonal(size, rng):
    """Return a random orthogonal matrix of shape (size, size), computed from
    the QR decomposition of a standard Gaussian matrix with the signs of R's
    diagonal transferred to Q (so that the result is uniformly distributed)
    """
    gauss = rng.standard_normal((size, size))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def glorot_uniform(rows, cols, rng):
    """Return a (rows, cols) matrix drawn from U(-a, a), with
    a = sqrt(6 / (rows + cols))"""
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))
