# -*- coding: utf-8 -*-
"""Quarter-car EKF baseline."""

import numpy as np
import pytest

from dbpnet.channels import SensorSample
from dbpnet.dynamics import QuarterCarParams, quarter_car_force
from dbpnet.ekf import CornerFilter, QuarterCarModel, ekf_estimate, ekf_estimate_split
from dbpnet.models import CORNERS, EkfConfig
from dbpnet.validation import CovarianceNotPSD, ShapeError


MOTION_RATIO = 0.8
DT = 0.05


@pytest.fixture(scope="module")
def prior(vehicle):
    return QuarterCarParams.from_vehicle(vehicle, MOTION_RATIO, MOTION_RATIO)


def _model_series(vehicle, q, n=40):
    """Measurements generated by the filter's own model, released from a displaced state."""
    t = np.arange(n) * DT
    channels = np.empty((4, n, 4))
    for j, corner in enumerate(CORNERS):
        model = QuarterCarModel.for_corner(vehicle, q, corner, MOTION_RATIO)
        x = np.array([0.01, 0.0, -0.002, 0.0])
        for i in range(n):
            channels[:, i, j] = model.measure(x)
            x = model.propagate(x, DT, 50)
    d_sus, dd_sus, a_spr, a_unspr = channels
    return SensorSample(t=t, delta=np.zeros(n), a_spr=a_spr, a_unspr=a_unspr, d_sus=d_sus, dd_sus=dd_sus, F_p=np.zeros((n, 4)))


class TestFilter:

    def test_noiseless_measurements_give_the_quarter_car_load(self, vehicle, prior):
        sample = _model_series(vehicle, prior)
        cfg = EkfConfig(measurement_std=[1e-7, 1e-6, 1e-4, 1e-4], iterations=10)
        loads, states = ekf_estimate(sample, vehicle, cfg, prior, MOTION_RATIO)
        expected = quarter_car_force(sample.d_sus, sample.dd_sus, sample.a_unspr, prior)
        # The filter starts at rest; the released state is caught within the first second
        np.testing.assert_allclose(loads.values[20:], expected[20:], rtol=0, atol=1e-6)
        assert states.shape == (40, 4, 4)

    def test_noisy_measurements_give_smoother_loads(self, vehicle, prior, rng):
        clean = _model_series(vehicle, prior, n=200)
        cfg = EkfConfig()
        sigma = dict(zip(("d_sus", "dd_sus", "a_spr", "a_unspr"), cfg.measurement_std))
        noisy = clean.copy()
        for name, std in sigma.items():
            values = getattr(noisy, name)
            setattr(noisy, name, values + rng.normal(0.0, std, values.shape))
        loads, _ = ekf_estimate(noisy, vehicle, cfg, prior, MOTION_RATIO)
        raw = quarter_car_force(noisy.d_sus, noisy.dd_sus, noisy.a_unspr, prior)
        assert np.all(np.isfinite(loads.values))
        filtered_roughness = np.var(np.diff(loads.values[5:], axis=0), axis=0)
        raw_roughness = np.var(np.diff(raw[5:], axis=0), axis=0)
        assert np.all(filtered_roughness < raw_roughness)

    def test_covariance_stays_positive_semi_definite(self, vehicle, prior, rng):
        sample = _model_series(vehicle, prior)
        filt = CornerFilter(QuarterCarModel.for_corner(vehicle, prior, "fl", MOTION_RATIO), EkfConfig())
        for i in range(len(sample)):
            if i:
                filt.predict(DT)
            z = np.array([sample.d_sus[i, 0], sample.dd_sus[i, 0], sample.a_spr[i, 0], sample.a_unspr[i, 0]])
            filt.update(z + rng.normal(0.0, 1e-3, 4))
            assert np.linalg.eigvalsh(filt.P).min() >= -1e-10

    def test_indefinite_covariance_is_reported(self, vehicle, prior):
        filt = CornerFilter(QuarterCarModel.for_corner(vehicle, prior, "rr", MOTION_RATIO), EkfConfig())
        filt.P = -np.eye(4)
        with pytest.raises(CovarianceNotPSD):
            filt._check_covariance()

    def test_jacobian_matches_finite_differences(self, vehicle, prior):
        model = QuarterCarModel.for_corner(vehicle, prior, "fl", MOTION_RATIO)
        x = np.array([0.004, 0.05, -0.001, -0.2])
        h = 1e-7
        numeric = np.column_stack([
            (model.rates(x + h * e) - model.rates(x - h * e)) / (2.0 * h) for e in np.eye(4)
        ])
        np.testing.assert_allclose(model.jacobian(x), numeric, rtol=1e-5, atol=1e-3)


class TestRestarts:

    def test_restart_repeats_the_first_run(self, vehicle, prior):
        one = _model_series(vehicle, prior, n=20)
        both = SensorSample.from_matrix(np.concatenate([one.t, one.t]), np.vstack([one.to_matrix(), one.to_matrix()]))
        starts = np.zeros(40, dtype=bool)
        starts[20] = True
        loads, _ = ekf_estimate(both, vehicle, EkfConfig(), prior, MOTION_RATIO, starts)
        np.testing.assert_array_equal(loads.values[20:], loads.values[:20])

    def test_run_starts_must_match_the_series(self, vehicle, prior):
        sample = _model_series(vehicle, prior, n=5)
        with pytest.raises(ShapeError):
            ekf_estimate(sample, vehicle, EkfConfig(), prior, MOTION_RATIO, np.zeros(4, dtype=bool))

    def test_split_estimate_on_plant_data(self, small_dataset):
        test = small_dataset.test
        loads = ekf_estimate_split(test, small_dataset.vehicle, EkfConfig(), small_dataset.quarter_car, small_dataset.motion_ratio)
        assert loads.values.shape == (len(test), 4)
        assert np.all(np.isfinite(loads.values))
