import hashlib

import numpy as np

from app.services.random_stream import GENERATOR_FAMILY, RandomStream, derive_seed


def test_uniform_matches_raw_outputs():
    """Test every draw maps one raw 64-bit output to [0, 1) with 53 bits"""
    raw = np.random.PCG64(123).random_raw(20)
    expected = [(int(w) >> 11) * 2.0 ** -53 for w in raw]
    stream = RandomStream(123, block_size=7)
    assert [stream.uniform() for _ in range(20)] == expected
    assert stream.draws == 20


def test_block_size_does_not_change_the_sequence():
    """Test prefetching is invisible to the consumer"""
    small, large = RandomStream(99, block_size=3), RandomStream(99)
    assert [small.uniform() for _ in range(50)] == [large.uniform() for _ in range(50)]


def test_index_and_sign_ranges():
    """Test index stays in [0, n) and sign yields both values"""
    stream = RandomStream(5)
    indices = {stream.index(7) for _ in range(2000)}
    signs = {stream.sign() for _ in range(200)}
    assert indices == set(range(7))
    assert signs == {-1, 1}


def test_derive_seed_is_stable():
    """Test seeds hash the '/'-joined parts with SHA-256"""
    expected = int.from_bytes(hashlib.sha256(b"0/1/2/3/4/bounded").digest()[:8], "big")
    assert derive_seed(0, 1, 2, 3, 4, "bounded") == expected
    assert derive_seed(0, 1, 2, 3, 4, "bounded") != derive_seed(0, 1, 2, 3, 4, "unbounded")
    assert 0 <= expected < 2 ** 64


def test_family_is_declared():
    """Test the stream reports its generator family"""
    assert RandomStream(0).family == GENERATOR_FAMILY
