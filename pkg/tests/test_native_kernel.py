"""Equivalence of the native alignment-search kernel with the pure-Python
reference. Skipped entirely when the shared library has not been built."""

import concurrent.futures

import numpy as np
import pytest

from styletts import alignment, masbackend

LIB = masbackend.find_native_library()

pytestmark = pytest.mark.skipif(
    LIB is None, reason="native kernel not built (mas-kernel/target/release)")


@pytest.fixture(scope="module")
def native():
    return masbackend.NativeBackend(LIB)


@pytest.fixture(scope="module")
def reference():
    return masbackend.ReferenceBackend()


def _random_matrix(rng, max_n=64, max_t=512):
    n = int(rng.integers(1, max_n + 1))
    t = int(rng.integers(n, max_t + 1))
    # float32 inputs so both backends see bit-identical values
    return rng.normal(size=(n, t)).astype(np.float32)


class TestEquivalence:
    def test_random_instances_bit_exact(self, native, reference):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            logw = _random_matrix(rng)
            assert np.array_equal(native.search(logw),
                                  reference.search(logw))

    def test_tie_heavy_instances(self, native, reference):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(1, 7))
            t = int(rng.integers(n, 11))
            logw = rng.integers(-2, 2, size=(n, t)).astype(np.float32)
            assert np.array_equal(native.search(logw),
                                  reference.search(logw))

    def test_batch_matches_serial(self, native):
        rng = np.random.default_rng(2)
        items = [_random_matrix(rng, max_n=16, max_t=64) for _ in range(32)]
        batched = native.search_batch(items)
        serial = [native.search(m) for m in items]
        assert len(batched) == len(serial)
        for a, b in zip(batched, serial):
            assert np.array_equal(a, b)

    def test_empty_batch(self, native):
        assert native.search_batch([]) == []

    def test_concurrent_matches_serial(self, native):
        rng = np.random.default_rng(3)
        items = [_random_matrix(rng, max_n=24, max_t=128) for _ in range(64)]
        serial = [native.search(m) for m in items]
        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            parallel = list(pool.map(native.search, items))
        for a, b in zip(serial, parallel):
            assert np.array_equal(a, b)


class TestStatusCodes:
    def test_infeasible(self, native):
        status, out = native.search_raw(
            np.zeros((4, 3), dtype=np.float32))
        assert status == masbackend.STATUS_INFEASIBLE
        with pytest.raises(alignment.InfeasibleAlignmentError):
            native.search(np.zeros((4, 3), dtype=np.float32))

    def test_infeasible_output_untouched(self, native):
        out = np.full(4, 7, dtype=np.uint32)
        import ctypes
        status = native._lib.mas_search(
            np.zeros(12, dtype=np.float32).ctypes.data_as(
                ctypes.POINTER(ctypes.c_float)),
            ctypes.c_uint32(4), ctypes.c_uint32(3),
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)))
        assert status == masbackend.STATUS_INFEASIBLE
        assert out.tolist() == [7, 7, 7, 7]

    def test_nonfinite(self, native):
        logw = np.zeros((2, 3), dtype=np.float32)
        logw[0, 1] = np.nan
        status, _ = native.search_raw(logw)
        assert status == masbackend.STATUS_NONFINITE
        with pytest.raises(masbackend.BackendError):
            native.search(logw)

    def test_batch_per_item_status(self, native):
        good = np.zeros((2, 4), dtype=np.float32)
        bad = np.zeros((3, 2), dtype=np.float32)
        status, results, statuses = native.search_batch_raw([bad, good])
        assert status == masbackend.STATUS_INFEASIBLE
        assert statuses.tolist() == [masbackend.STATUS_INFEASIBLE,
                                     masbackend.STATUS_OK]
        assert results[1].sum() == 4


class TestBackendSelection:
    def test_get_backend_native(self, monkeypatch):
        masbackend._cached.clear()
        monkeypatch.setenv(masbackend.ENV_BACKEND, "native")
        backend = masbackend.get_backend()
        assert backend.name == "native"
        masbackend._cached.clear()

    def test_unknown_backend_rejected(self):
        with pytest.raises(masbackend.BackendError):
            masbackend.get_backend("turbo")
