"""Configuration parsing and the delimited on-disk formats."""

import numpy as np
import pytest

from gelstep import (
    FormatError,
    Grid,
    ParseError,
    ValidationError,
    load_config,
    parse_config,
    run_simulation,
)
from gelstep.snapshots import (
    check_snapshot_header,
    read_energy_csv,
    read_snapshot,
    write_energy_csv,
    write_snapshot,
    write_trajectory,
)
from gelstep.solver import NodalState

from conftest import CONFIG_DIR

TINY_RUN = """
[grid]
n = 9

[time]
t_final = 0.05
num_steps = 3

[initial]
psi = noise
amplitude = 0.05
seed = 3
"""


def demo_state(n=5, seed=0):
    grid = Grid(2, n)
    rng = np.random.default_rng(seed)
    y = grid.identity_map() + 0.01 * rng.standard_normal((2,) + grid.shape)
    psi = rng.standard_normal(grid.shape)
    mu = rng.standard_normal(grid.shape)
    return NodalState(t=0.375, y=y, psi=psi, grid=grid, mu=mu, lam=0.25)


class TestParsing:
    def test_empty_text_is_all_defaults(self):
        cfg = parse_config("")
        assert (cfg.d, cfg.n, cfg.dirichlet) == (2, 17, "both")
        assert (cfg.family, cfg.psi_kind, cfg.y_init) == (
            "identity",
            "constant",
            "identity",
        )
        assert cfg.material == {} and cfg.solver == {}

    def test_defaults_are_echoed(self):
        cfg = parse_config("[grid]\nn = 9\n")
        echoed = set(cfg.echo)
        assert "grid.d = 2 (default)" in echoed
        assert "time.t_final = 0.5 (default)" in echoed
        assert not any(line.startswith("grid.n ") for line in echoed)

    def test_case_comments_and_whitespace(self):
        cfg = parse_config(
            "# leading comment\n\n[GRID]\n  N = 9\n; alt comment\ndirichlet = min\n"
        )
        assert cfg.n == 9 and cfg.dirichlet == "min"

    def test_resolved_lines_reparse_to_same_config(self):
        cfg = load_config(CONFIG_DIR / "spinodal.cfg")
        again = parse_config("\n".join(cfg.resolved_lines()))
        for name in (
            "d",
            "n",
            "dirichlet",
            "t_final",
            "num_steps",
            "family",
            "psi_kind",
            "psi_mean",
            "psi_amplitude",
            "psi_seed",
            "y_init",
            "viscous_rate",
        ):
            assert getattr(again, name) == getattr(cfg, name), name
        a, b = cfg.make_params(), again.make_params()
        assert (a.p, a.beta, a.q, a.a_dw, a.b_kw, a.eta_visc) == (
            b.p,
            b.beta,
            b.q,
            b.a_dw,
            b.b_kw,
            b.eta_visc,
        )
        assert again.make_solver_config() == cfg.make_solver_config()

    def test_unknown_section_names_line(self):
        with pytest.raises(ParseError, match=r"line 2: unknown section \[shape\]"):
            parse_config("# ok\n[shape]\n")

    def test_unknown_key_names_key_and_line(self):
        with pytest.raises(ParseError, match=r"line 2: unknown key 'm'"):
            parse_config("[time]\nm = 4\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ParseError, match="duplicate key 'n'"):
            parse_config("[grid]\nn = 9\nn = 17\n")

    def test_key_outside_section_rejected(self):
        with pytest.raises(ParseError, match=r"outside any \[section\]"):
            parse_config("n = 9\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ParseError, match="expected key = value"):
            parse_config("[grid]\nnine\n")

    @pytest.mark.parametrize(
        "text, hint",
        [
            ("[grid]\nn = five\n", "integer"),
            ("[time]\nt_final = later\n", "number"),
            ("[verify]\nedi = maybe\n", "boolean"),
        ],
    )
    def test_type_errors_name_the_expectation(self, text, hint):
        with pytest.raises(ParseError, match=hint):
            parse_config(text)


class TestValidation:
    def test_exponent_chain_violation_cites_assumption(self):
        with pytest.raises(ValidationError, match="exponent chain"):
            parse_config("[material]\nbeta = 2.0\n")

    def test_empty_dirichlet_set_rejected(self):
        with pytest.raises(ValidationError, match="nonempty"):
            parse_config("[grid]\ndirichlet = none\n")

    def test_unknown_family_lists_choices(self):
        with pytest.raises(ValidationError, match="identity, bend, affine"):
            parse_config("[boundary]\nfamily = spiral\n")

    def test_unknown_psi_kind_rejected(self):
        with pytest.raises(ValidationError, match="constant, noise, stripe"):
            parse_config("[initial]\npsi = checkerboard\n")

    def test_grid_floor(self):
        with pytest.raises(ValidationError, match="at least 5"):
            parse_config("[grid]\nn = 4\n")

    def test_relaxed_y_needs_problem_data(self):
        cfg = parse_config("[initial]\ny = relaxed\n")
        with pytest.raises(ValidationError, match="relaxed"):
            cfg.make_initial_y(cfg.make_grid())

    def test_snapshot_y_init_shape_mismatch(self, tmp_path):
        path = tmp_path / "start.csv"
        write_snapshot(str(path), demo_state(n=5), 4, 4)
        cfg = parse_config(f"[grid]\nn = 9\n\n[initial]\ny = {path}\n")
        with pytest.raises(ValidationError, match="n = 5"):
            cfg.make_initial_y(cfg.make_grid())


class TestSnapshotFormat:
    def test_round_trip_is_exact(self, tmp_path):
        state = demo_state()
        path = tmp_path / "state.csv"
        write_snapshot(str(path), state, 8, 3)
        header, fields = read_snapshot(str(path))
        assert header == {"d": 2, "n": 5, "t": 0.375, "M": 8, "step": 3}
        np.testing.assert_array_equal(fields["x"], state.grid.coords)
        np.testing.assert_array_equal(fields["y"], state.y)
        np.testing.assert_array_equal(fields["psi"], state.psi)
        np.testing.assert_array_equal(fields["mu"], state.mu)

    def test_write_is_reproducible(self, tmp_path):
        state = demo_state()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_snapshot(str(a), state, 8, 3)
        write_snapshot(str(b), state, 8, 3)
        assert a.read_bytes() == b.read_bytes()

    def test_initial_state_writes_zero_mu(self, tmp_path):
        state = demo_state()
        state.mu = None
        path = tmp_path / "state.csv"
        write_snapshot(str(path), state, 8, 0)
        _, fields = read_snapshot(str(path))
        assert not fields["mu"].any()

    def _written(self, tmp_path):
        path = tmp_path / "state.csv"
        write_snapshot(str(path), demo_state(), 8, 3)
        return path

    def test_missing_header_key(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        del lines[2]  # the "# n = 5" line
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="missing 'n'"):
            read_snapshot(str(path))

    def test_truncated_body(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(FormatError, match="truncated"):
            read_snapshot(str(path))

    def test_wrong_field_count(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        lines[10] += ",99"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="line 11: expected 7 fields"):
            read_snapshot(str(path))

    def test_malformed_number(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        first = lines[8].split(",")
        first[3] = "abc"
        lines[8] = ",".join(first)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="malformed number"):
            read_snapshot(str(path))

    def test_out_of_order_index(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        lines[9], lines[10] = lines[10], lines[9]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="out of order"):
            read_snapshot(str(path))

    def test_surplus_rows(self, tmp_path):
        path = self._written(tmp_path)
        lines = path.read_text().splitlines()
        extra = lines[-1].split(",")
        extra[0] = str(int(extra[0]) + 1)
        lines.append(",".join(extra))
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="more rows"):
            read_snapshot(str(path))

    def test_comment_only_file(self, tmp_path):
        path = tmp_path / "state.csv"
        path.write_text("# gelstep snapshot\n# d = 2\n")
        with pytest.raises(FormatError, match="no column header"):
            read_snapshot(str(path))

    def test_header_config_agreement(self, tmp_path):
        path = self._written(tmp_path)
        header, _ = read_snapshot(str(path))
        good = parse_config("[grid]\nn = 5\n\n[time]\nnum_steps = 8\n")
        check_snapshot_header(header, good)
        bad = parse_config("[grid]\nn = 9\n\n[time]\nnum_steps = 4\n")
        with pytest.raises(ValidationError, match="n = 5 vs 9.*M = 8 vs 4"):
            check_snapshot_header(header, bad)


@pytest.fixture(scope="module")
def tiny_traj():
    return run_simulation(parse_config(TINY_RUN))


class TestEnergyLedgerFormat:
    def test_round_trip_is_exact(self, tmp_path, tiny_traj):
        path = tmp_path / "energy.csv"
        write_energy_csv(str(path), tiny_traj.records)
        rows = read_energy_csv(str(path))
        assert len(rows) == len(tiny_traj.records)
        for row, rec in zip(rows, tiny_traj.records):
            assert row["m"] == rec.m
            for name in ("t", "total", "edi_lhs", "edi_rhs", "det_min", "mass"):
                assert row[name] == getattr(rec, name), name

    def test_identical_runs_write_identical_bytes(self, tmp_path, tiny_traj):
        again = run_simulation(parse_config(TINY_RUN))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_energy_csv(str(a), tiny_traj.records)
        write_energy_csv(str(b), again.records)
        assert a.read_bytes() == b.read_bytes()

    def test_header_required(self, tmp_path, tiny_traj):
        path = tmp_path / "energy.csv"
        write_energy_csv(str(path), tiny_traj.records)
        lines = path.read_text().splitlines()
        lines[0] = lines[0].replace("edi_lhs", "lhs")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="expected columns"):
            read_energy_csv(str(path))

    def test_empty_and_headless_files(self, tmp_path, tiny_traj):
        path = tmp_path / "energy.csv"
        path.write_text("")
        with pytest.raises(FormatError, match="empty"):
            read_energy_csv(str(path))
        write_energy_csv(str(path), tiny_traj.records)
        header = path.read_text().splitlines()[0]
        path.write_text(header + "\n")
        with pytest.raises(FormatError, match="no rows"):
            read_energy_csv(str(path))

    def test_damaged_rows(self, tmp_path, tiny_traj):
        path = tmp_path / "energy.csv"
        write_energy_csv(str(path), tiny_traj.records)
        lines = path.read_text().splitlines()
        short = lines[:]
        short[2] = short[2].rsplit(",", 1)[0]
        path.write_text("\n".join(short) + "\n")
        with pytest.raises(FormatError, match="line 3: expected 13 fields"):
            read_energy_csv(str(path))
        bad = lines[2].split(",")
        bad[5] = "oops"
        lines[2] = ",".join(bad)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="malformed number"):
            read_energy_csv(str(path))

    def test_write_trajectory_layout(self, tmp_path, tiny_traj):
        out = tmp_path / "run"
        paths = write_trajectory(tiny_traj, str(out), snapshot_every=2)
        names = sorted(p.name for p in out.iterdir())
        assert names == ["energy.csv", "state_0000.csv", "state_0002.csv", "state_0003.csv"]
        assert len(paths) == 4
        header, _ = read_snapshot(str(out / "state_0003.csv"))
        assert header["step"] == 3 and header["M"] == 3
