"""File-format round-trip tests."""

import numpy as np
import pytest

from tensorfen import fileio
from tensorfen.grid import TensorShape
from tensorfen.selection import FitResult
from tensorfen.simulate import ShapeMask, make_setting, six_mask
from tensorfen.spline import basis_from_samples


class TestTensorFile:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        shape = TensorShape((3, 4))
        x = rng.uniform(size=(7, 12))
        path = tmp_path / "x.txt"
        fileio.write_tensor_file(path, x, shape)
        back, shape_back = fileio.read_tensor_file(path)
        assert shape_back.dims == (3, 4)
        np.testing.assert_array_equal(back, x)

    def test_header_is_first_line(self, tmp_path):
        shape = TensorShape((2, 5))
        path = tmp_path / "x.txt"
        fileio.write_tensor_file(path, np.zeros((3, 10)), shape)
        assert path.read_text().splitlines()[0] == "3 2 5"

    def test_file_layout_is_row_major(self, tmp_path):
        # entry (i, j) of the tensor appears at file position (i-1)*P2 + j
        shape = TensorShape((2, 3))
        x = np.arange(6.0)[None, :]  # internal column-major order
        path = tmp_path / "x.txt"
        fileio.write_tensor_file(path, x, shape)
        file_row = np.array(path.read_text().splitlines()[1].split(), float)
        np.testing.assert_array_equal(
            file_row, x[0].reshape((2, 3), order="F").ravel(order="C")
        )

    def test_malformed_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2 2\n0.1 0.2 0.3 0.4\n0.5 0.6\n")
        with pytest.raises(ValueError):
            fileio.read_tensor_file(path)


class TestValueAndMatrixFiles:
    def test_values_round_trip(self, tmp_path):
        y = np.random.default_rng(1).standard_normal(9)
        path = tmp_path / "y.txt"
        fileio.write_value_file(path, y)
        np.testing.assert_array_equal(fileio.read_value_file(path), y)
        assert len(path.read_text().splitlines()) == 9

    def test_matrix_round_trip(self, tmp_path):
        m = np.random.default_rng(2).standard_normal((4, 6))
        path = tmp_path / "m.txt"
        fileio.write_matrix_file(path, m)
        np.testing.assert_array_equal(fileio.read_matrix_file(path), m)

    def test_keyvalue_round_trip(self, tmp_path):
        path = tmp_path / "cfg.txt"
        fileio.write_keyvalue_file(path, {"alpha": 1.5, "name": "x"})
        doc = fileio.read_keyvalue_file(path)
        assert doc == {"alpha": "1.5", "name": "x"}

    def test_keyvalue_rejects_garbage(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("not a key value line\n")
        with pytest.raises(ValueError):
            fileio.read_keyvalue_file(path)


class TestMaskFile:
    def test_round_trip(self, tmp_path):
        mask = six_mask()
        path = tmp_path / "mask.txt"
        fileio.write_mask_file(path, mask)
        back = fileio.read_mask_file(path)
        np.testing.assert_array_equal(back.weights, mask.weights)
        np.testing.assert_array_equal(back.active, mask.active)

    def test_zero_means_inactive(self, tmp_path):
        weights = np.array([[0.0, 0.5], [1.0, 0.0]])
        path = tmp_path / "mask.txt"
        fileio.write_mask_file(path, ShapeMask.from_weights(weights))
        back = fileio.read_mask_file(path)
        np.testing.assert_array_equal(back.active, weights > 0)


class TestTruthManifest:
    def test_round_trip_preserves_functions(self, tmp_path):
        setting = make_setting(5, rng=np.random.default_rng(3))
        path = tmp_path / "truth.json"
        fileio.write_truth_manifest(path, setting, sigma2_eps=0.37)
        back, sigma2 = fileio.read_truth_manifest(path)
        assert sigma2 == 0.37
        assert back.setting_id == 5 and back.snr == setting.snr
        xs = np.linspace(0, 1, 13)
        t = int(np.flatnonzero(setting.active_flat)[4])
        np.testing.assert_allclose(
            back.component(t)(xs), setting.component(t)(xs), rtol=1e-15
        )


class TestFitFile:
    def test_round_trip_preserves_predictions(self, tmp_path):
        rng = np.random.default_rng(4)
        basis = basis_from_samples(rng.uniform(size=400), 3)
        fit = FitResult(
            shape=TensorShape((2, 2)),
            inclusion_prob=rng.uniform(size=4),
            cutoff=0.4,
            degenerate_cutoff=False,
            active=np.array([True, False, True, False]),
            beta_hat=rng.standard_normal((4, 3)),
            mu_hat=0.23,
            basis=basis,
            eps0=0.17,
        )
        path = tmp_path / "fit.json"
        fileio.write_fit_file(path, fit, y_mean=1.5, y_scale=2.0)
        back, mean, scale = fileio.read_fit_file(path)
        assert (mean, scale) == (1.5, 2.0)
        x = rng.uniform(size=(11, 4))
        np.testing.assert_array_equal(back.predict(x), fit.predict(x))
        np.testing.assert_array_equal(back.beta_hat, fit.beta_hat)
