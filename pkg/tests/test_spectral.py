import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdgc.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
)
from hdgc.numeric import hermitian_eig
from hdgc.spectral import (
    DynamicEigs,
    DynamicFilterSet,
    FrequencyGrid,
    SpectralDensity,
    autocov,
    choose_k,
    dpc_scores,
    dynamic_eigs,
    dynamic_pca,
    explained_variance,
    filters_from_eigs,
    spectral_density,
)


def brute_autocov(Z, h):
    T, n = Z.shape
    zbar = Z.mean(axis=0)
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for t in range(T - h):
                acc += (Z[t + h, a] - zbar[a]) * (Z[t, b] - zbar[b])
            out[a, b] = acc / T
    return out


def brute_spectrum(lagcov, L, weights, omega):
    n = lagcov.n
    F = np.zeros((n, n), dtype=complex)
    for h in range(-L, L + 1):
        F += weights[h + L] * lagcov.lag(h) * np.exp(-1j * h * omega)
    return F


def constant_spectrum(matrix, n_freq=32, L=0):
    grid = FrequencyGrid(n_freq)
    mats = np.broadcast_to(np.asarray(matrix, dtype=complex), (n_freq,) + np.shape(matrix)).copy()
    return SpectralDensity(grid=grid, matrices=mats, kernel_name="flat", L_window=L)


def eig_field(grid, vector_fn, value=1.0):
    """DynamicEigs with a single prescribed eigenvector field."""
    vecs = np.stack([vector_fn(w) for w in grid.points])[:, :, None]
    n = vecs.shape[1]
    vals = np.full((grid.n_freq, n), value)
    return DynamicEigs(grid=grid, eigenvalues=vals, eigenvectors=vecs, trace=vals.sum(axis=1))


class TestAutocov:
    def test_constant_series_is_zero(self):
        ac = autocov(np.full((20, 3), 4.2), 3)
        np.testing.assert_allclose(ac.matrices, 0.0, atol=1e-24)

    def test_negative_lags_are_transposes(self):
        Z = np.random.default_rng(0).normal(size=(50, 3))
        ac = autocov(Z, 5)
        for h in range(1, 6):
            assert np.array_equal(ac.lag(-h), ac.lag(h).T)

    def test_matches_double_loop(self):
        Z = np.random.default_rng(1).normal(size=(40, 3))
        ac = autocov(Z, 4)
        for h in range(5):
            np.testing.assert_allclose(ac.lag(h), brute_autocov(Z, h), rtol=0, atol=1e-12)

    def test_zero_lag_psd(self):
        Z = np.random.default_rng(2).normal(size=(30, 5))
        w = np.linalg.eigvalsh(autocov(Z, 2).lag(0))
        assert w.min() >= -1e-10

    def test_rejects_window_too_long(self):
        with pytest.raises(InvalidParameterError):
            autocov(np.zeros((5, 2)), 5)


class TestSpectralDensity:
    def test_zero_window_is_covariance(self):
        Z = np.random.default_rng(3).normal(size=(60, 3))
        ac = autocov(Z, 0)
        sd = spectral_density(ac, "bartlett", FrequencyGrid(16))
        for F in sd.matrices:
            np.testing.assert_allclose(F, ac.lag(0), atol=1e-15)

    @pytest.mark.parametrize("kernel", ["bartlett", "parzen", "flat"])
    def test_matches_brute_force(self, kernel):
        from hdgc.spectral import kernel_weights

        Z = np.random.default_rng(4).normal(size=(200, 2))
        ac = autocov(Z, 4)
        grid = FrequencyGrid(64)
        sd = spectral_density(ac, kernel, grid)
        w = kernel_weights(kernel, 4)
        for F, omega in zip(sd.matrices, grid.points):
            np.testing.assert_allclose(F, brute_spectrum(ac, 4, w, omega), rtol=0, atol=1e-12)

    @pytest.mark.xfail(strict=True, reason=(
        "max deviation < 0.15 is below the sampling spread of a Bartlett "
        "estimate at T=4096, L=32 (per-frequency sd ~0.07 over 128 points)"))
    def test_white_noise_flat_stated_bound(self):
        Z = np.random.default_rng(5).normal(size=(4096, 2))
        sd = spectral_density(autocov(Z, 32), "bartlett", FrequencyGrid(128))
        assert np.max(np.abs(sd.matrices - np.eye(2))) < 0.15

    def test_white_noise_flat(self):
        Z = np.random.default_rng(5).normal(size=(4096, 2))
        sd = spectral_density(autocov(Z, 32), "bartlett", FrequencyGrid(128))
        dev = np.abs(sd.matrices - np.eye(2))
        # sd of each entry is about sqrt(2L/(3T)) = 0.072; allow ~5 sd
        assert dev.max() < 0.36
        assert np.abs(sd.matrices.mean(axis=0) - np.eye(2)).max() < 0.05

    def test_unknown_kernel(self):
        with pytest.raises(InvalidParameterError):
            spectral_density(autocov(np.random.default_rng(0).normal(size=(20, 2)), 2), "hann")

    def test_grid_too_coarse(self):
        ac = autocov(np.random.default_rng(0).normal(size=(50, 2)), 8)
        with pytest.raises(InvalidParameterError):
            spectral_density(ac, "bartlett", FrequencyGrid(16))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 8), st.integers(17, 40), st.integers(0, 2**32 - 1))
    def test_hermitian_and_conjugate_symmetric(self, n, L, n_freq, seed):
        Z = np.random.default_rng(seed).normal(size=(60, n))
        sd = spectral_density(autocov(Z, L), "bartlett", FrequencyGrid(n_freq))
        mats = sd.matrices
        assert np.max(np.abs(mats - np.conj(np.swapaxes(mats, 1, 2)))) <= 1e-10
        idx = list(sd.grid.index)
        for i, s in enumerate(idx):
            if -s in idx:
                np.testing.assert_allclose(mats[idx.index(-s)], np.conj(mats[i]), atol=1e-10)
        tr = np.real(np.trace(mats, axis1=1, axis2=2))
        for F, t in zip(mats, tr):
            assert np.linalg.eigvalsh(F).min() >= -1e-8 * max(t, 1e-300)


class TestFrequencyGrid:
    @pytest.mark.parametrize("n", [7, 8])
    def test_points(self, n):
        pts = FrequencyGrid(n).points
        assert np.all(np.diff(pts) > 0)
        assert pts[0] >= -np.pi and pts[-1] < np.pi
        assert len(pts) == n


class TestDynamicEigs:
    def test_diagonal(self):
        e = dynamic_eigs(constant_spectrum(np.diag([3.0, 1.0])), 1)
        np.testing.assert_allclose(e.eigenvalues[:, 0], 3.0)
        np.testing.assert_allclose(e.eigenvectors[:, :, 0], np.tile([1.0, 0.0], (32, 1)))

    def test_identity_ties(self):
        e = dynamic_eigs(constant_spectrum(np.eye(3)), 3)
        np.testing.assert_allclose(e.eigenvalues, 1.0)
        for vecs in e.eigenvectors:
            np.testing.assert_allclose(vecs, np.eye(3))

    def test_matches_hermitian_eig(self):
        Z = np.random.default_rng(6).normal(size=(300, 4))
        Z[:, 1] += 0.7 * np.roll(Z[:, 0], 1)
        sd = spectral_density(autocov(Z, 6), "bartlett", FrequencyGrid(33))
        e = dynamic_eigs(sd, 4)
        for i, F in enumerate(sd.matrices):
            w, v = hermitian_eig(F)
            np.testing.assert_allclose(e.eigenvalues[i], w, atol=1e-10)
            # same eigenvectors up to a unit-modulus phase
            overlap = np.abs(np.sum(np.conj(v) * e.eigenvectors[i], axis=0))
            np.testing.assert_allclose(overlap, 1.0, atol=1e-8)

    def test_phase_and_conjugate_symmetry(self):
        Z = np.random.default_rng(7).normal(size=(200, 3))
        sd = spectral_density(autocov(Z, 5), "bartlett", FrequencyGrid(20))
        e = dynamic_eigs(sd, 2)
        idx = list(sd.grid.index)
        for i, s in enumerate(idx):
            v = e.eigenvectors[i]
            lead = v[np.argmax(np.abs(v), axis=0), [0, 1]]
            if s >= 0:
                assert np.all(lead.real > 0) and np.allclose(lead.imag, 0)
            if -s in idx:
                np.testing.assert_allclose(e.eigenvectors[idx.index(-s)], np.conj(v))

    def test_too_many_components(self):
        with pytest.raises(InvalidParameterError):
            dynamic_eigs(constant_spectrum(np.eye(2)), 3)


class TestFilters:
    def test_constant_field_gives_impulse(self):
        v = np.array([0.6, 0.8])
        eigs = eig_field(FrequencyGrid(31), lambda w: v.astype(complex))
        f = filters_from_eigs(eigs, 5)
        np.testing.assert_allclose(f.tap(0, 0), v, atol=1e-14)
        for k in range(-5, 6):
            if k:
                np.testing.assert_allclose(f.tap(0, k), 0.0, atol=1e-14)

    def test_single_fourier_mode(self):
        # taps are (1/2pi) int phi(w) exp(-ikw) dw, so exp(iw) v sits at lag +1
        v = np.array([1.0, 0.0])
        eigs = eig_field(FrequencyGrid(31), lambda w: np.exp(1j * w) * v)
        f = filters_from_eigs(eigs, 4)
        np.testing.assert_allclose(f.tap(0, 1), v, atol=1e-14)
        others = [k for k in range(-4, 5) if k != 1]
        assert max(np.abs(f.tap(0, k)).max() for k in others) < 1e-14

    def test_parseval(self):
        Z = np.random.default_rng(8).normal(size=(500, 4))
        Z[:, 2] += np.roll(Z[:, 3], 2)
        sd = spectral_density(autocov(Z, 10), "bartlett", FrequencyGrid(41))
        eigs = dynamic_eigs(sd, 2)
        f = filters_from_eigs(eigs, 20)
        energy = np.sum(f.coefficients**2, axis=(1, 2))
        field = np.mean(np.sum(np.abs(eigs.eigenvectors) ** 2, axis=1), axis=0)
        np.testing.assert_allclose(energy, field, atol=1e-6)
        np.testing.assert_allclose(energy, 1.0, atol=1e-6)
        assert f.max_imag_residue < 1e-10

    def test_one_sided(self):
        Z = np.random.default_rng(9).normal(size=(300, 3))
        sd = spectral_density(autocov(Z, 6), "bartlett", FrequencyGrid(25))
        f = filters_from_eigs(dynamic_eigs(sd, 2), 6, "one_sided")
        assert np.all(f.coefficients[:, :6, :] == 0.0)
        np.testing.assert_allclose(np.sum(f.coefficients**2, axis=(1, 2)), 1.0)

    def test_span_too_large(self):
        eigs = dynamic_eigs(constant_spectrum(np.eye(2), n_freq=9), 1)
        with pytest.raises(InvalidParameterError):
            filters_from_eigs(eigs, 5)

    def test_taps_maximize_variance(self):
        # Z2 is Z1 delayed by one step: the best unit-norm score combines
        # Z1[t] with Z2[t+1]; the reversed tap order cannot align them.
        rng = np.random.default_rng(10)
        e = rng.normal(size=20001)
        Z = np.column_stack([e[1:], e[:-1]]) + 0.05 * rng.normal(size=(20000, 2))
        res = dynamic_pca(Z, k_scores=1, L_window=10, L_filter=5)
        reversed_taps = DynamicFilterSet(
            res.filters.coefficients[:, ::-1, :].copy(), 5, "two_sided")
        good = res.scores.values.var()
        bad = dpc_scores(Z, reversed_taps).values.var()
        assert good > 1.5 and bad < 1.1


class TestScores:
    def test_identity_filter(self):
        Z = np.random.default_rng(11).normal(size=(50, 3)) + 5.0
        coef = np.zeros((1, 3, 3))
        coef[0, 1, 0] = 1.0
        f = DynamicFilterSet(coef, 1, "two_sided")
        s = dpc_scores(Z, f)
        np.testing.assert_allclose(s.values[:, 0], Z[:, 0] - Z[:, 0].mean(), atol=1e-12)

    def test_boundary_truncation(self):
        Z = np.arange(10.0)[:, None]
        coef = np.zeros((1, 3, 1))
        coef[0, 2, 0] = 1.0  # lag +1: score[t] = Z[t-1]
        s = dpc_scores(Z, DynamicFilterSet(coef, 1, "two_sided"))
        raw = np.concatenate([[0.0], Z[:-1, 0] - Z[:, 0].mean()])
        np.testing.assert_allclose(s.values[:, 0], raw - raw.mean(), atol=1e-12)

    def test_static_reduction(self):
        rng = np.random.default_rng(12)
        Z = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
        res = dynamic_pca(Z, k_scores=1, L_window=0, L_filter=0)
        Zc = Z - Z.mean(axis=0)
        w, V = np.linalg.eigh(Zc.T @ Zc / len(Z))
        v = V[:, -1]
        v = v * np.sign(v[np.argmax(np.abs(v))])
        np.testing.assert_allclose(res.scores.values[:, 0], Zc @ v, atol=1e-8)

    def test_white_noise_components_uncorrelated(self):
        Z = np.random.default_rng(13).normal(size=(4096, 4))
        res = dynamic_pca(Z, k_scores=2)
        rho = np.corrcoef(res.scores.values.T)[0, 1]
        assert abs(rho) < 0.1

    def test_dimension_mismatch(self):
        f = DynamicFilterSet(np.zeros((1, 1, 3)), 0, "two_sided")
        with pytest.raises(DimensionMismatchError):
            dpc_scores(np.zeros((10, 2)), f)

    def test_too_short(self):
        f = DynamicFilterSet(np.zeros((1, 11, 2)), 5, "two_sided")
        with pytest.raises(InvalidParameterError):
            dpc_scores(np.zeros((10, 2)), f)


class TestExplainedVariance:
    def test_identity(self):
        v = explained_variance(dynamic_eigs(constant_spectrum(np.eye(4))))
        np.testing.assert_allclose(v, 0.25)

    def test_diagonal(self):
        v = explained_variance(dynamic_eigs(constant_spectrum(np.diag([3.0, 1.0]))))
        np.testing.assert_allclose(v, [0.75, 0.25])

    def test_zero_trace(self):
        with pytest.raises(DegenerateInputError):
            explained_variance(dynamic_eigs(constant_spectrum(np.zeros((2, 2)))))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_sums_to_one(self, n, seed):
        Z = np.random.default_rng(seed).normal(size=(80, n))
        sd = spectral_density(autocov(Z, 4), "bartlett", FrequencyGrid(17))
        v = explained_variance(dynamic_eigs(sd))
        assert abs(v.sum() - 1.0) < 1e-9
        assert np.all(np.diff(v) <= 1e-12) and np.all((v >= 0) & (v <= 1))


class TestChooseK:
    @pytest.mark.parametrize("v, expected", [
        ([0.8, 0.2], 1),
        ([0.4, 0.3, 0.2, 0.1], 3),
        ([0.1] * 10, 8),
    ])
    def test_examples(self, v, expected):
        assert choose_k(v, 0.75) == expected

    def test_empty(self):
        with pytest.raises(InvalidParameterError):
            choose_k([], 0.75)

    def test_bad_threshold(self):
        with pytest.raises(InvalidParameterError):
            choose_k([1.0], 0.0)
