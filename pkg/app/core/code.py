"""
Time-invariant (Toeplitz) causal linear codes and their systematic encoder.

A code is specified by parity blocks H_1, H_2, ..., each nbar x n with
nbar = n - k. The t-step parity check matrix is block lower triangular with
H_1 on the diagonal and H_{i-j+1} at block (i, j). Codewords c_1, c_2, ...
satisfy sum_{j=1..tau} H_j c_{tau-j+1} = 0 for every tau.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from core.gf2 import BitMatrix
from utils.errors import CodeFormatError, ParameterError
from utils.logger import get_logger
from utils.seeding import CODE_DOMAIN, PRNG_ID, counter_uniforms

logger = get_logger()

FORMAT_HEADER = "anytime-code v1"
_PARAMS_LINE = re.compile(
    r"^n=(?P<n>\d+) k=(?P<k>\d+) p=(?P<p>[0-9.eE+-]+) "
    r"seed=(?P<seed>\d+) prng=(?P<prng>\S+)$"
)


@dataclass(frozen=True)
class CodeParams:
    """Parameters of a code drawn from the Toeplitz ensemble."""

    n: int
    k: int
    p: float = 0.5
    seed: int = 0
    prng_id: str = PRNG_ID

    def __post_init__(self) -> None:
        if not (1 <= self.k < self.n):
            raise ParameterError(f"need 1 <= k < n, got n={self.n}, k={self.k}")
        if not (0.0 < self.p <= 1.0):
            raise ParameterError(f"block density p must lie in (0, 1], got {self.p}")
        if not (0 <= self.seed < 2**64):
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.prng_id != PRNG_ID:
            raise ParameterError(f"unknown prng id '{self.prng_id}'")

    @property
    def nbar(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n


class ToeplitzCode:
    """
    A causal code with Toeplitz parity structure.

    H_1 = [A | I_nbar] with A drawn Bernoulli(p); for tau >= 2 every entry of
    H_tau is Bernoulli(p). Blocks are generated on demand and cached, and
    each block is a pure function of (seed, tau).
    """

    def __init__(self, params: CodeParams, fixed_blocks: list[BitMatrix] | None = None) -> None:
        self.params = params
        self._fixed = fixed_blocks is not None
        self._blocks: list[BitMatrix] = list(fixed_blocks or [])
        self._zero = BitMatrix.zeros(params.nbar, params.n)
        self._dense: dict[int, np.ndarray] = {}
        self._stacked = np.zeros((0, 0), dtype=np.uint8)

    @classmethod
    def from_blocks(cls, n: int, k: int, blocks: list) -> "ToeplitzCode":
        """
        Builds a code from explicit blocks H_1..H_L; blocks past L are zero.

        Raises:
            ParameterError: If a block has the wrong shape or H_1 is rank
                deficient.
        """
        params = CodeParams(n=n, k=k)
        matrices = [b if isinstance(b, BitMatrix) else BitMatrix.from_dense(b) for b in blocks]
        for tau, block in enumerate(matrices, 1):
            if block.shape != (params.nbar, n):
                raise ParameterError(f"H_{tau} has shape {block.shape}, expected {(params.nbar, n)}")
        if not matrices:
            raise ParameterError("at least H_1 is required")
        h1 = matrices[0].to_dense()
        if not np.array_equal(h1[:, k:], np.eye(params.nbar, dtype=np.uint8)):
            raise ParameterError("H_1 must have the form [A | I]")
        return cls(params, fixed_blocks=matrices)

    def _sample_block(self, tau: int) -> BitMatrix:
        nbar, n, k = self.params.nbar, self.params.n, self.params.k
        if tau == 1:
            draws = counter_uniforms(self.params.seed, CODE_DOMAIN, 1, nbar * k)
            dense = np.hstack(
                [
                    (draws < self.params.p).astype(np.uint8).reshape(nbar, k),
                    np.eye(nbar, dtype=np.uint8),
                ]
            )
        else:
            draws = counter_uniforms(self.params.seed, CODE_DOMAIN, tau, nbar * n)
            dense = (draws < self.params.p).astype(np.uint8).reshape(nbar, n)
        return BitMatrix.from_dense(dense)

    def block(self, tau: int) -> BitMatrix:
        """Returns H_tau (1-based), extending the cache if needed."""
        if tau < 1:
            raise IndexError(f"block index must be >= 1, got {tau}")
        if self._fixed:
            return self._blocks[tau - 1] if tau <= len(self._blocks) else self._zero
        while len(self._blocks) < tau:
            self._blocks.append(self._sample_block(len(self._blocks) + 1))
        return self._blocks[tau - 1]

    def dense_block(self, tau: int) -> np.ndarray:
        """Returns H_tau as a 0/1 uint8 array (cached, read-only)."""
        if tau not in self._dense:
            dense = self.block(tau).to_dense()
            dense.setflags(write=False)
            self._dense[tau] = dense
        return self._dense[tau]

    def stacked_dense(self, t: int) -> np.ndarray:
        """
        Returns the (nbar*t) x (n*t) leading block of the parity matrix as a
        0/1 array. Block (i, j) is H_{i-j+1} for i >= j and zero otherwise.
        """
        nbar, n = self.params.nbar, self.params.n
        if self._stacked.shape[0] < nbar * t:
            # Grow geometrically; smaller windows are leading sub-blocks.
            size = max(t, 2 * (self._stacked.shape[0] // max(nbar, 1)))
            full = np.zeros((nbar * size, n * size), dtype=np.uint8)
            for i in range(size):
                for j in range(i + 1):
                    full[i * nbar : (i + 1) * nbar, j * n : (j + 1) * n] = self.dense_block(i - j + 1)
            full.setflags(write=False)
            self._stacked = full
        return self._stacked[: nbar * t, : n * t]

    @property
    def systematic_part(self) -> np.ndarray:
        """The nbar x k matrix A of H_1 = [A | I]."""
        return self.dense_block(1)[:, : self.params.k]


def sample_code(params: CodeParams) -> ToeplitzCode:
    """
    Samples a code from the Toeplitz ensemble.

    Args:
        params: Validated code parameters; identical params give identical
            blocks on every platform.

    Returns:
        The lazily extended code.
    """
    code = ToeplitzCode(params)
    logger.debug(
        f"Sampled code n={params.n} k={params.k} p={params.p} seed={params.seed}"
    )
    return code


def stacked_parity(code: ToeplitzCode, t: int) -> BitMatrix:
    """Materializes the (nbar*t) x (n*t) leading block of the parity matrix."""
    return BitMatrix.from_dense(code.stacked_dense(t))


@dataclass
class EncoderState:
    """Encoder history for a single session."""

    code: ToeplitzCode
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def t(self) -> int:
        return len(self.history)


def encode_step(state: EncoderState, message: np.ndarray) -> np.ndarray:
    """
    Encodes the next k message bits into an n-bit codeword.

    The first k bits carry the message; the parity bits are
    p_t = A b_t + sum_{j>=2} H_j c_{t-j+1}, which makes the parity row of time
    t vanish.

    Args:
        state: The encoder state, extended in place.
        message: k message bits.

    Returns:
        The codeword c_t.
    """
    params = state.code.params
    b = np.asarray(message, dtype=np.uint8).reshape(-1) & 1
    if b.size != params.k:
        raise ParameterError(f"message has {b.size} bits, expected {params.k}")

    t = state.t + 1
    parity = state.code.systematic_part.astype(np.int64) @ b
    for j in range(2, t + 1):
        parity = parity + state.code.dense_block(j).astype(np.int64) @ state.history[t - j]

    codeword = np.concatenate([b, (parity & 1).astype(np.uint8)])
    state.history.append(codeword)
    return codeword


def serialize_code(code: ToeplitzCode) -> str:
    """Serializes the code parameters; blocks are derived, not stored."""
    p = code.params
    return f"{FORMAT_HEADER}\nn={p.n} k={p.k} p={p.p!r} seed={p.seed} prng={p.prng_id}\n"


def parse_code(text: str) -> ToeplitzCode:
    """
    Parses a code file produced by `serialize_code`.

    Raises:
        CodeFormatError: On a version mismatch, an unknown prng id or
            malformed text.
    """
    lines = [line.strip() for line in text.strip().splitlines()]
    if not lines or lines[0] != FORMAT_HEADER:
        found = lines[0] if lines else "<empty>"
        raise CodeFormatError(f"unsupported code file header '{found}', expected '{FORMAT_HEADER}'")
    if len(lines) != 2:
        raise CodeFormatError(f"expected 2 lines, found {len(lines)}")

    match = _PARAMS_LINE.match(lines[1])
    if match is None:
        raise CodeFormatError(f"malformed parameter line '{lines[1]}'")
    if match["prng"] != PRNG_ID:
        raise CodeFormatError(f"unknown prng id '{match['prng']}'")

    try:
        params = CodeParams(
            n=int(match["n"]),
            k=int(match["k"]),
            p=float(match["p"]),
            seed=int(match["seed"]),
            prng_id=match["prng"],
        )
    except (ValueError, ParameterError) as e:
        raise CodeFormatError(f"invalid code parameters: {e}") from e

    return sample_code(params)
