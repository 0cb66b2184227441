"""Delta-method propagation, percentile intervals, bootstrap behavior."""

import numpy as np
import pytest

from bidiv import (
    DegenerateRatio,
    DomainError,
    ExcessiveFailureRate,
    FeasibilityBoundary,
    RngStream,
    bootstrap,
    delta_method_se,
    estimate_iv,
    fit_probit,
    percentile_interval,
    stacked_baseline_map,
)
from conftest import XI_BENCH


class TestPercentileInterval:
    def test_small_sample_ranks(self):
        values = list(range(1, 11))  # order statistics are 1..10
        lo, hi = percentile_interval(values, 0.9)
        # ceil(0.05*10)=1 and ceil(0.95*10)=10
        assert (lo, hi) == (1.0, 10.0)

    def test_typical_bootstrap_size(self):
        values = np.arange(1, 201, dtype=float)
        lo, hi = percentile_interval(values, 0.95)
        # ranks ceil(0.025*200)=5 and ceil(0.975*200)=195
        assert (lo, hi) == (5.0, 195.0)

    def test_order_invariance(self):
        rng = np.random.default_rng(1)
        values = rng.standard_normal(73)
        assert percentile_interval(values, 0.9) == percentile_interval(
            np.sort(values)[::-1], 0.9
        )

    def test_single_value_clamps(self):
        assert percentile_interval([2.5], 0.95) == (2.5, 2.5)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            percentile_interval([], 0.95)
        with pytest.raises(ValueError):
            percentile_interval([1.0], 1.0)


class TestDeltaMethod:
    def test_mapping_recovers_effects_at_exact_point(self):
        mapping = stacked_baseline_map(split=3)
        stacked = np.array(
            [0.0, XI_BENCH.xi_xz, XI_BENCH.xi_xw, 0.0, XI_BENCH.xi_yz, XI_BENCH.xi_yw]
        )
        np.testing.assert_allclose(mapping(stacked), [-0.25, 0.45], atol=1e-12)

    def test_standard_errors_scale(self, large_dataset):
        design = large_dataset.design_matrix()
        fit_x = fit_probit(large_dataset.x, design)
        fit_y = fit_probit(large_dataset.y, design)
        se_xy, se_yx = delta_method_se(
            fit_x, fit_y, stacked_baseline_map(design.shape[1])
        )
        # MC sds at n=10^4 are about 0.021/0.024; at n=2*10^4 expect ~1/sqrt(2)
        assert 0.7 * 0.0147 < se_xy < 1.3 * 0.0147
        assert 0.7 * 0.0171 < se_yx < 1.3 * 0.0171

    def test_boundary_failures_become_feasibility_errors(self, medium_dataset):
        design = medium_dataset.design_matrix()
        fit_x = fit_probit(medium_dataset.x, design)
        fit_y = fit_probit(medium_dataset.y, design)

        def broken_map(stacked):
            raise DomainError("identification undefined here")

        with pytest.raises(FeasibilityBoundary):
            delta_method_se(fit_x, fit_y, broken_map)


class TestBootstrap:
    def test_deterministic(self, medium_dataset):
        a = bootstrap(medium_dataset, estimate_iv, B=25, rng=RngStream(50))
        b = bootstrap(medium_dataset, estimate_iv, B=25, rng=RngStream(50))
        assert a.estimates == b.estimates
        assert a.ci_xy == b.ci_xy

    def test_summary_fields(self, medium_dataset):
        result = bootstrap(medium_dataset, estimate_iv, B=30, level=0.9, rng=RngStream(51))
        assert result.replicates == 30
        assert result.successes == len(result.estimates)
        assert result.sd_xy > 0 and result.sd_yx > 0
        assert result.ci_xy[0] < result.ci_xy[1]
        assert result.level == 0.9

    def test_failures_tallied_by_reason(self, medium_dataset):
        calls = {"count": 0}

        def flaky(d):
            calls["count"] += 1
            if calls["count"] % 5 == 0:
                raise DegenerateRatio("synthetic failure")
            return estimate_iv(d)

        result = bootstrap(
            medium_dataset, flaky, B=20, rng=RngStream(52), failure_ceiling=0.5
        )
        assert result.failure_reasons == {"DegenerateRatio": 4}
        assert result.successes == 16

    def test_excessive_failures_abort(self, medium_dataset):
        def always_fails(d):
            raise DegenerateRatio("synthetic failure")

        with pytest.raises(ExcessiveFailureRate) as exc_info:
            bootstrap(medium_dataset, always_fails, B=40, rng=RngStream(53))
        assert exc_info.value.total == 40
        # aborts as soon as the ceiling is crossed, not after all replicates
        assert exc_info.value.failures <= 6

    def test_rejects_tiny_replicate_count(self, medium_dataset):
        with pytest.raises(ValueError):
            bootstrap(medium_dataset, estimate_iv, B=1)

    def test_configuration_errors_propagate(self, medium_dataset):
        def misconfigured(d):
            raise TypeError("not a statistical failure")

        with pytest.raises(TypeError):
            bootstrap(medium_dataset, misconfigured, B=5, rng=RngStream(54))
