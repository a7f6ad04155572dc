import struct

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from telcofed import codec
from telcofed.crypto import KeyAgreement, Signer, key_id, verify_signature
from telcofed.rng import CounterRng, derive_seed

import oracles

seeds = st.integers(min_value=0, max_value=2**64 - 1)


@given(seeds, st.integers(min_value=0, max_value=10_000))
def test_word_matches_reference_splitmix(seed, i):
    assert CounterRng(seed).word(i) == oracles.splitmix_word(seed, i)


@given(seeds, st.integers(min_value=1, max_value=64), st.integers(min_value=0, max_value=1000))
def test_vectorized_words_match_scalar(seed, n, start):
    rng = CounterRng(seed)
    assert rng.words(n, start).tolist() == [rng.word(start + i) for i in range(n)]


def test_normals_match_reference_box_muller():
    got = CounterRng(42).normals(50)
    want = [oracles.normal(42, t) for t in range(50)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_uniforms_are_in_open_unit_interval():
    u = CounterRng(7).uniforms(10_000)
    assert u.min() > 0.0 and u.max() <= 1.0


@given(seeds, st.integers(min_value=1, max_value=50), st.data())
def test_sample_indices_distinct_sorted_in_range(seed, population, data):
    k = data.draw(st.integers(min_value=0, max_value=population))
    idx = CounterRng(seed).sample_indices(population, k)
    assert idx == sorted(set(idx))
    assert len(idx) == k
    assert all(0 <= i < population for i in idx)


def test_derive_seed_matches_reference_and_separates_labels():
    assert derive_seed(3, "a", 1) == oracles.derive_seed(3, "a", 1)
    assert derive_seed(3, "ab") != derive_seed(3, "a", "b")
    assert derive_seed(3, "x") != derive_seed(4, "x")


def test_codec_layout():
    assert codec.enc_int(-1) == b"\xff" * 8
    assert codec.enc_float(1.5) == struct.pack("<d", 1.5)
    assert codec.enc_str("hé") == (3).to_bytes(8, "little") + "hé".encode()
    assert codec.enc_bool(True) == codec.enc_int(1)
    assert codec.enc_seq([b"ab", b"c"]) == (2).to_bytes(8, "little") + b"abc"
    assert codec.digest(b"GENESIS").hex() == (
        "901131d838b17aac0f7885b81e03cbdc9f5157a00343d30ab22083685ed1416a"
    )


def test_signatures_deterministic_and_key_bound():
    a = Signer.from_seed(1, "alice")
    assert Signer.from_seed(1, "alice").public_key == a.public_key
    assert key_id(a.public_key) == a.key_id and len(a.key_id) == 16
    sig = a.sign(b"msg")
    assert sig == a.sign(b"msg")
    assert verify_signature(a.public_key, b"msg", sig)
    assert not verify_signature(Signer.from_seed(1, "bob").public_key, b"msg", sig)
    assert not verify_signature(a.public_key, b"msh", sig)


def test_key_agreement_is_symmetric():
    a = KeyAgreement.from_seed(5, "a")
    b = KeyAgreement.from_seed(5, "b")
    assert a.shared_secret(b.public_key) == b.shared_secret(a.public_key)
