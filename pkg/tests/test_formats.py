"""Byte-level round-trips and corruption handling for the four binary formats."""
import struct

import numpy as np
import pytest

from helpers import random_pbp
from pbpkit import blocksparse, pbp, perm, prune
from pbpkit.errors import FormatError


def random_dense(rng):
    shape = tuple(int(v) for v in rng.integers(1, 40, size=2))
    return rng.standard_normal(shape).astype(np.float32)


CODECS = {
    "PBPD": (random_dense, prune.dense_to_bytes, prune.dense_from_bytes,
             lambda a, b: a.shape == b.shape and np.array_equal(a, b)),
    "PBPP": (lambda rng: perm.random_permutation(int(rng.integers(1, 200)), rng),
             perm.to_bytes, perm.from_bytes, lambda a, b: a == b),
    "PBPB": (lambda rng: random_pbp(rng, 64).packed,
             blocksparse.to_bytes, blocksparse.from_bytes, lambda a, b: a == b),
    "PBPX": (lambda rng: random_pbp(rng, 64),
             pbp.to_bytes, pbp.from_bytes, lambda a, b: a == b),
}


def roundtrip_all(name, seed=0, count=100):
    """Write, read, write again; returns the number of mismatching artifacts."""
    make, enc, dec, same = CODECS[name]
    rng = np.random.default_rng([seed, sum(name.encode())])
    bad = 0
    for _ in range(count):
        obj = make(rng)
        buf = enc(obj)
        back = dec(buf)
        if enc(back) != buf or not same(obj, back) or buf[:4] != name.encode():
            bad += 1
    return bad


@pytest.mark.parametrize("name", sorted(CODECS))
def test_roundtrip_100(name):
    assert roundtrip_all(name) == 0


@pytest.mark.parametrize("name", sorted(CODECS))
def test_file_roundtrip(name, tmp_path, rng):
    make, enc, _, same = CODECS[name]
    save = {"PBPD": prune.save_dense, "PBPP": perm.save,
            "PBPB": blocksparse.save, "PBPX": pbp.save}[name]
    load = {"PBPD": prune.load_dense, "PBPP": perm.load,
            "PBPB": blocksparse.load, "PBPX": pbp.load}[name]
    obj = make(rng)
    path = tmp_path / "x.bin"
    save(obj, path)
    assert path.read_bytes() == enc(obj)
    assert same(load(path), obj)
    assert [p.name for p in tmp_path.iterdir()] == ["x.bin"]


@pytest.mark.parametrize("name", sorted(CODECS))
def test_truncation_and_trailing_bytes(name, rng):
    make, enc, dec, _ = CODECS[name]
    buf = enc(make(rng))
    for cut in (0, 3, 5, len(buf) - 1):
        with pytest.raises(FormatError):
            dec(buf[:cut])
    with pytest.raises(FormatError):
        dec(buf + b"\0")


@pytest.mark.parametrize("name", sorted(CODECS))
def test_bad_magic_and_version(name, rng):
    make, enc, dec, _ = CODECS[name]
    buf = enc(make(rng))
    with pytest.raises(FormatError):
        dec(b"XXXX" + buf[4:])
    with pytest.raises(FormatError):
        dec(buf[:4] + bytes([buf[4] + 1]) + buf[5:])


def test_pbpp_header_layout():
    buf = perm.to_bytes(perm.Permutation([2, 0, 1]))
    assert buf == b"PBPP\x01" + struct.pack("<4I", 3, 2, 0, 1)


def test_pbpp_rejects_non_bijection():
    buf = b"PBPP\x01" + struct.pack("<3I", 2, 1, 1)
    with pytest.raises(ValueError):
        perm.from_bytes(buf)


def test_pbpd_header_layout():
    W = np.arange(6, dtype=np.float32).reshape(2, 3)
    buf = prune.dense_to_bytes(W)
    assert buf[:13] == b"PBPD\x01" + struct.pack("<2I", 2, 3)
    assert np.frombuffer(buf[13:], "<f4").tolist() == list(range(6))


def test_pbpb_rejects_bad_layout_tag(rng):
    buf = bytearray(blocksparse.to_bytes(random_pbp(rng, 16).packed))
    buf[5] = 7
    with pytest.raises(FormatError):
        blocksparse.from_bytes(bytes(buf))
