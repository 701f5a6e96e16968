"""功耗模型服务测试"""
import pytest
from pydantic import ValidationError

from app.errors import DomainError
from app.models import PonOwcPowerParams, SpineLeafPowerParams
from app.services.power_service import (
    compare_power,
    params_for_racks,
    pon_owc_power,
    savings,
    spine_leaf_power,
)


class TestTotals:
    def test_default_baseline(self):
        assert spine_leaf_power(SpineLeafPowerParams()) == 5056.0

    def test_default_proposed(self):
        assert pon_owc_power(PonOwcPowerParams()) == pytest.approx(2899.2, rel=1e-12)

    def test_default_savings(self):
        report = compare_power(SpineLeafPowerParams(), PonOwcPowerParams())
        assert report.savings == pytest.approx(1 - 2899.2 / 5056, rel=1e-12)
        assert 0.41 <= report.savings <= 0.44

    def test_terms_sum_to_totals(self):
        report = compare_power(SpineLeafPowerParams(), PonOwcPowerParams())
        assert sum(report.baseline_terms.values()) == pytest.approx(report.baseline_w, rel=1e-12)
        assert sum(report.proposed_terms.values()) == pytest.approx(report.proposed_w, rel=1e-12)
        assert report.baseline_terms["spine"] == 2640.0
        assert report.proposed_terms["olt"] == 480.0

    def test_linear_in_counts(self):
        base = spine_leaf_power(SpineLeafPowerParams(spines=0, leaves=0, server_transceivers=0))
        assert base == 0.0
        one_more = spine_leaf_power(SpineLeafPowerParams(spines=5))
        assert one_more - spine_leaf_power(SpineLeafPowerParams()) == 660.0

    def test_olt_independent_of_scale(self):
        small = pon_owc_power(PonOwcPowerParams(leaves=0, server_transceivers=0, owc_transceivers=0))
        assert small == 480.0


class TestSavings:
    def test_equal_power(self):
        assert savings(100.0, 100.0) == 0.0

    def test_negative_savings_allowed(self):
        assert savings(100.0, 150.0) == pytest.approx(-0.5)

    @pytest.mark.parametrize("baseline", [0.0, -1.0, float("inf"), float("nan")])
    def test_invalid_baseline(self, baseline):
        with pytest.raises(DomainError):
            savings(baseline, 10.0)

    def test_zero_baseline_through_report(self):
        with pytest.raises(DomainError):
            compare_power(
                SpineLeafPowerParams(spines=0, leaves=0, server_transceivers=0),
                PonOwcPowerParams(),
            )


class TestParamsForRacks:
    def test_four_racks_reproduce_defaults(self):
        baseline, proposed = params_for_racks(4, 32)
        assert baseline == SpineLeafPowerParams()
        assert proposed == PonOwcPowerParams()

    def test_four_owc_transceivers_still_in_range(self):
        baseline, proposed = params_for_racks(4, 32, owc_transceivers=4)
        assert 0.41 <= compare_power(baseline, proposed).savings <= 0.44

    def test_scaling(self):
        baseline, proposed = params_for_racks(8, 16)
        assert baseline.leaves == 8 and baseline.server_transceivers == 128
        assert proposed.owc_transceivers == 16

    def test_negative_counts(self):
        with pytest.raises(DomainError):
            params_for_racks(-1, 32)
        with pytest.raises(ValidationError):
            SpineLeafPowerParams(spine_w=-1.0)
