"""Pure numpy versions of the hot kernels.

Each function mirrors ``_ckernels`` operation for operation, including the
floating-point order of the BWS recurrences, so both backends agree bit for bit.
"""
import numpy as np

# sign of w_b * w_c for w = (1, 2, 4, -8); indexed [b, c]
_NEG = np.zeros((4, 4), dtype=bool)
_NEG[3, :3] = True
_NEG[:3, 3] = True


def rbl_popcount(qbits, kbits):
    """AND-popcount of one broadcast q bit plane against every stored k row.

    qbits: uint8 (64,); kbits: uint8 (T, 4, 64). Returns int32 (T, 4).
    """
    q = np.ascontiguousarray(qbits, dtype=np.int32)
    k = np.ascontiguousarray(kbits, dtype=np.int32)
    return (k @ q).astype(np.int32)


def bws_differential(droop):
    """Signed Q-BWS over q bits then K-BWS over k rows, pos rail minus neg rail.

    droop: float64 (4, T, 4) indexed [b, token, c]. Returns float64 (T,).
    """
    droop = np.ascontiguousarray(droop, dtype=np.float64)
    _, n_tok, _ = droop.shape
    kpos = np.zeros(n_tok)
    kneg = np.zeros(n_tok)
    for c in range(4):
        pos = np.zeros(n_tok)
        neg = np.zeros(n_tok)
        for b in range(4):
            x = droop[b, :, c]
            if _NEG[b, c]:
                neg = 0.5 * neg + 0.5 * x
                pos = 0.5 * pos
            else:
                pos = 0.5 * pos + 0.5 * x
                neg = 0.5 * neg
        kpos = 0.5 * kpos + 0.5 * pos
        kneg = 0.5 * kneg + 0.5 * neg
    return kpos - kneg


def exact_scores(q, k_msb, k_lsb):
    """INT8 dot products with keys rebuilt from their nibbles. Returns int64 (T,)."""
    q = np.asarray(q, dtype=np.int64)
    k = 16 * np.asarray(k_msb, dtype=np.int64) + np.asarray(k_lsb, dtype=np.int64)
    return k @ q
