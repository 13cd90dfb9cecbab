import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from numba import njit

from rwcre.streams import (ENV, MASK64, WALK, Stream, derive_key, mix64, nb_derive_key, nb_mix64,
                           nb_site_uniform, seed_to_u64, site_uniform)

u64 = st.integers(0, MASK64)


@njit
def _nb_triplet(key, gen, site, master, label, index, z):
    return nb_site_uniform(key, gen, site), nb_derive_key(master, label, index), nb_mix64(z)


@given(u64, st.integers(0, 10 ** 6), st.integers(-(2 ** 40), 2 ** 40), u64, u64, st.integers(0, 2 ** 40), u64)
def test_compiled_hashes_match_python(key, gen, site, master, label, index, z):
    a, b, c = _nb_triplet(np.uint64(key), gen, site, np.uint64(master), np.uint64(label), index, np.uint64(z))
    assert a == site_uniform(key, gen, site)
    assert int(b) == derive_key(master, label, index)
    assert int(c) == mix64(z)


@given(u64, st.integers(0, 1000), st.integers(-1000, 1000))
def test_site_uniform_in_unit_interval(key, gen, site):
    u = site_uniform(key, gen, site)
    assert 0.0 <= u < 1.0


def test_streams_are_reproducible_and_label_separated():
    a, b = Stream(derive_key(7, WALK, 3)), Stream(derive_key(7, WALK, 3))
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    keys = {derive_key(7, lab, i) for lab in (WALK, ENV) for i in range(100)}
    assert len(keys) == 200


def test_stream_uniforms_look_uniform():
    s = Stream(derive_key(1, WALK, 0))
    u = np.array([s.uniform() for _ in range(20000)])
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))


def test_seed_range():
    assert seed_to_u64(MASK64) == MASK64
    for bad in (-1, MASK64 + 1):
        try:
            seed_to_u64(bad)
        except ValueError:
            continue
        raise AssertionError("seed outside 64 bits accepted")
