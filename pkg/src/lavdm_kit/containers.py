"""Binary container for matrices, frames, and spectral output.

Layout (all little-endian):

    magic   4 bytes  b"LVDM"
    version u32      currently 1
    count   u32      number of sections

    section header: tag 4 bytes (ASCII, NUL-padded), kind u8
      kind 0 (dense):  ndim u32, shape i64[ndim], values f64[prod(shape)]
      kind 1 (csr):    nrows u64, ncols u64, nnz u64,
                       indptr i64[nrows+1], indices i64[nnz], values f64[nnz]

Conventional tags: AFF (affinity matrix), FRM (frame stacks), CON
(connection blocks), EDG (edge index pairs), SPC (spectral vectors),
VAL (eigen/singular values), EMB (embedding matrices).
"""

from __future__ import annotations

import struct

import numpy as np
import scipy.sparse as sparse

from .errors import LavdmError

MAGIC = b"LVDM"
VERSION = 1

_DENSE = 0
_CSR = 1


def _write_array(fh, arr: np.ndarray):
    arr = np.asarray(arr, dtype=float)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(np.asarray(arr.shape, dtype="<i8").tobytes())
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(fh) -> np.ndarray:
    (ndim,) = struct.unpack("<I", fh.read(4))
    shape = np.frombuffer(fh.read(8 * ndim), dtype="<i8")
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
    return data.reshape(shape)


def write_container(path, sections):
    """Write [(tag, array-or-csr), ...] to path in the LVDM layout."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(sections)))
        for tag, obj in sections:
            tag_bytes = tag.encode("ascii")[:4].ljust(4, b"\0")
            fh.write(tag_bytes)
            if sparse.issparse(obj):
                mat = obj.tocsr()
                fh.write(struct.pack("<B", _CSR))
                fh.write(struct.pack("<QQQ", mat.shape[0], mat.shape[1], mat.nnz))
                fh.write(np.asarray(mat.indptr, dtype="<i8").tobytes())
                fh.write(np.asarray(mat.indices, dtype="<i8").tobytes())
                fh.write(np.asarray(mat.data, dtype="<f8").tobytes())
            else:
                fh.write(struct.pack("<B", _DENSE))
                _write_array(fh, obj)


def read_container(path):
    """Read an LVDM file; returns a list of (tag, array-or-csr) sections."""
    out = []
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise LavdmError(f"{path}: not an LVDM container")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise LavdmError(f"{path}: unsupported container version {version}")
        for _ in range(count):
            tag = fh.read(4).rstrip(b"\0").decode("ascii")
            (kind,) = struct.unpack("<B", fh.read(1))
            if kind == _DENSE:
                out.append((tag, _read_array(fh)))
            elif kind == _CSR:
                nrows, ncols, nnz = struct.unpack("<QQQ", fh.read(24))
                indptr = np.frombuffer(fh.read(8 * (nrows + 1)), dtype="<i8").copy()
                indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8").copy()
                data = np.frombuffer(fh.read(8 * nnz), dtype="<f8").copy()
                out.append(
                    (tag, sparse.csr_matrix((data, indices, indptr), shape=(nrows, ncols)))
                )
            else:
                raise LavdmError(f"{path}: unknown section kind {kind}")
    return out
