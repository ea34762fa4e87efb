"""Certification machinery: the energy ledger, weak-form residuals,
bound tables, and the refinement study.
"""

import dataclasses

import numpy as np
import pytest

from gelstep import (
    Grid,
    ValidationError,
    Verdict,
    check_apriori,
    check_edi,
    check_el_residuals,
    refinement_study,
)
from gelstep.verification import scalar_test_battery

from conftest import canonical_config


class TestEnergyLedger:
    def test_passes_on_canonical_runs(self, canonical_trajs):
        for name, traj in canonical_trajs.items():
            report = check_edi(traj)
            assert report.passed, f"{name}:\n{report.summary()}"

    def test_verdicts_carry_numbers(self, spinodal_traj):
        report = check_edi(spinodal_traj)
        names = {v.name for v in report.verdicts}
        assert names == {
            "edi_inequality_gap",
            "prox_gradmu_identity",
            "incremental_descent",
            "ledger_consistency",
        }
        for v in report.verdicts:
            assert np.isfinite(v.value) and np.isfinite(v.threshold)
        assert "ledger" in report.tables

    def test_tampered_ledger_is_detected(self, spinodal_traj):
        records = list(spinodal_traj.records)
        records[4] = dataclasses.replace(records[4], edi_lhs=records[4].edi_lhs + 1e-3)
        doctored = dataclasses.replace(spinodal_traj, records=records)
        report = check_edi(doctored)
        failed = {v.name for v in report.verdicts if not v.passed}
        assert "ledger_consistency" in failed

    def test_summary_format(self, equilibrium_traj):
        report = check_edi(equilibrium_traj)
        text = report.summary()
        assert "== energy_dissipation ==" in text
        assert "overall = PASS" in text


class TestResiduals:
    def test_canonical_runs_satisfy_weak_forms(self, canonical_trajs):
        for name, traj in canonical_trajs.items():
            report = check_el_residuals(traj, n_tests=10, seed=1)
            assert report.passed, f"{name}:\n{report.summary()}"

    def test_thresholds_scale_with_grad_tol(self, equilibrium_traj):
        loose = check_el_residuals(equilibrium_traj, n_tests=4, kappa=1e6)
        tight = check_el_residuals(equilibrium_traj, n_tests=4, kappa=100.0)
        for a, b in zip(loose.verdicts, tight.verdicts):
            assert a.threshold == pytest.approx(1e4 * b.threshold)


class TestAprioriBounds:
    def test_equilibrium_table_is_trivial(self, equilibrium_traj):
        report = check_apriori(equilibrium_traj)
        assert report.passed
        s = report.scalars
        assert s["l2h1_rate_y"] == pytest.approx(0.0, abs=1e-7)
        assert s["dual_v0_rate_psi"] == pytest.approx(0.0, abs=1e-7)
        assert s["l2h1_mu"] == pytest.approx(0.0, abs=1e-7)
        assert s["sup_det_inv"] == pytest.approx(1.0, rel=1e-6)
        assert s["mass_drift"] <= 1e-10

    def test_bound_keys_complete(self, stretch_traj):
        report = check_apriori(stretch_traj)
        expected = {
            "linf_w1p_y",
            "linf_w2beta_y",
            "sup_det_inv",
            "l2h1_rate_y",
            "linf_h1_psi",
            "dual_v0_rate_psi",
            "l2h1_mu",
            "gronwall_ratio",
        }
        assert expected <= set(report.scalars)
        for key in expected:
            assert np.isfinite(report.scalars[key]), key

    def test_gronwall_ceiling_enforced(self, spinodal_traj):
        report = check_apriori(spinodal_traj, gronwall_ceiling=1e-9)
        assert not report.passed


class TestRefinementStudy:
    def test_spinodal_ladder_contracts(self, spinodal_ladder):
        assert spinodal_ladder.report.passed
        assert len(spinodal_ladder.trajectories) == 4
        rows = spinodal_ladder.rows
        assert [r["M_coarse"] for r in rows] == [8, 16, 32]
        dists = [r["dist_h1_psi"] for r in rows]
        assert dists[0] > dists[1] > dists[2]
        assert "order_psi" in rows[1]

    def test_gate_selects_the_binding_field(self, spinodal_ladder):
        verdicts = {v.name: v for v in spinodal_ladder.report.verdicts}
        assert "advisory" in verdicts["refine_y_contraction"].note
        assert "advisory" not in verdicts["refine_psi_contraction"].note

    def test_stationary_problem_gives_zero_distances(self):
        cfg = canonical_config("equilibrium")
        res = refinement_study(cfg, [2, 4, 8])
        assert res.report.passed
        for row in res.rows:
            assert row["dist_h1_y"] == 0.0
            assert row["dist_h1_psi"] == 0.0

    def test_nested_spatial_refinement(self):
        cfg = canonical_config("equilibrium")
        res = refinement_study(cfg, [2, 4, 8], n_list=[5, 9, 17])
        assert res.report.passed

    def test_rejects_bad_ladders(self):
        cfg = canonical_config("equilibrium")
        with pytest.raises(ValidationError, match="three"):
            refinement_study(cfg, [8, 16])
        with pytest.raises(ValidationError, match="increasing"):
            refinement_study(cfg, [16, 8, 4])
        with pytest.raises(ValidationError, match="gate"):
            refinement_study(cfg, [2, 4, 8], gate="mu")
        with pytest.raises(ValidationError, match="length"):
            refinement_study(cfg, [2, 4, 8], n_list=[5, 9])
        with pytest.raises(ValidationError, match="nested"):
            refinement_study(cfg, [2, 4, 8], n_list=[5, 9, 13])


class TestBattery:
    def test_composition_and_determinism(self):
        grid = Grid(2, 9)
        fields = scalar_test_battery(grid, n_random=20, seed=0)
        again = scalar_test_battery(grid, n_random=20, seed=0)
        other = scalar_test_battery(grid, n_random=20, seed=3)
        # 1 constant + d linears + d(d+1)/2 quadratics + 20 random
        assert len(fields) == 1 + 2 + 3 + 20
        for a, b in zip(fields, again):
            np.testing.assert_array_equal(a, b)
        assert any(
            float(np.abs(a - b).max()) > 1e-8 for a, b in zip(fields[6:], other[6:])
        )

    def test_fields_have_grid_shape(self):
        grid = Grid(2, 9)
        for f in scalar_test_battery(grid, n_random=3):
            assert f.shape == grid.shape


def test_verdict_line_format():
    v = Verdict("gap", 1.5e-9, 1e-8, True, note="max over steps")
    assert v.line() == "PASS gap: 1.500000e-09 <= 1.000000e-08  [max over steps]"
    w = Verdict("drift", 2.0, 1.0, False)
    assert w.line().startswith("FAIL drift")
